#include "stampacchia/grid_field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

#include "stampacchia/errors.hpp"

namespace stampacchia::pde {

GridField::GridField(int n, double fill) : n_(n) {
    if (n < 1) throw InputError("grid size must be positive");
    values_.assign(static_cast<std::size_t>(n) * n * n, fill);
}

std::array<double, 3> GridField::center(int i, int j, int k) const {
    const double h = spacing();
    return {(i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h};
}

double GridField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_u64(std::ostream& os, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint64_t get_le(std::istream& is, int bytes) {
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof()) throw InputError("truncated field file");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
    }
    return v;
}

}  // namespace

void write_binary(const GridField& field, std::ostream& os) {
    put_u32(os, static_cast<std::uint32_t>(field.n()));
    for (int b = 0; b < 12; ++b) os.put('\0');
    for (double v : field.values()) put_u64(os, std::bit_cast<std::uint64_t>(v));
}

GridField read_binary(std::istream& is) {
    const auto n = static_cast<std::int32_t>(get_le(is, 4));
    get_le(is, 4);
    get_le(is, 8);
    if (n < 1 || n > 4096) throw InputError("field header has invalid size " + std::to_string(n));
    GridField field(n);
    for (auto& v : field.values()) v = std::bit_cast<double>(get_le(is, 8));
    return field;
}

void save_binary(const GridField& field, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    write_binary(field, os);
}

GridField load_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path.string());
    return read_binary(is);
}

void write_csv(const GridField& field, std::ostream& os) {
    os << "i,j,k,value\n";
    os << std::setprecision(17);
    const int n = field.n();
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) os << i << ',' << j << ',' << k << ',' << field(i, j, k) << '\n';
}

GridField restrict_to_coarse(const GridField& fine) {
    if (fine.n() % 2 != 0) throw InputError("restriction needs an even grid size");
    const int nc = fine.n() / 2;
    GridField coarse(nc);
    for (int k = 0; k < nc; ++k)
        for (int j = 0; j < nc; ++j)
            for (int i = 0; i < nc; ++i) {
                double s = 0.0;
                for (int dk = 0; dk < 2; ++dk)
                    for (int dj = 0; dj < 2; ++dj)
                        for (int di = 0; di < 2; ++di) s += fine(2 * i + di, 2 * j + dj, 2 * k + dk);
                coarse(i, j, k) = s / 8.0;
            }
    return coarse;
}

}  // namespace stampacchia::pde
