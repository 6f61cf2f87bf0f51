#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace stampacchia::pde {

/// Cell-centred scalar field on the unit cube split into N^3 cells of side
/// h = 1/N. Storage is x-fastest: index = i + N (j + N k). The homogeneous
/// Dirichlet condition lives in the stencil, not in the storage.
class GridField {
  public:
    GridField() = default;
    explicit GridField(int n, double fill = 0.0);

    int n() const { return n_; }
    double spacing() const { return 1.0 / n_; }
    double cell_volume() const { return spacing() * spacing() * spacing(); }
    std::size_t size() const { return values_.size(); }

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(n_) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(n_) * k);
    }

    double& operator()(int i, int j, int k) { return values_[index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return values_[index(i, j, k)]; }
    double& operator[](std::size_t idx) { return values_[idx]; }
    double operator[](std::size_t idx) const { return values_[idx]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    std::array<double, 3> center(int i, int j, int k) const;

    double max_abs() const;

    friend bool operator==(const GridField&, const GridField&) = default;

  private:
    int n_ = 0;
    std::vector<double> values_;
};

/// 16-byte header {int32 N, 12 reserved zero bytes} followed by N^3
/// little-endian doubles in x-fastest order.
void write_binary(const GridField& field, std::ostream& os);
GridField read_binary(std::istream& is);
void save_binary(const GridField& field, const std::filesystem::path& path);
GridField load_binary(const std::filesystem::path& path);

/// CSV with header "i,j,k,value".
void write_csv(const GridField& field, std::ostream& os);

/// Averages each 2x2x2 block of a field with even N onto the N/2 grid.
GridField restrict_to_coarse(const GridField& fine);

}  // namespace stampacchia::pde
