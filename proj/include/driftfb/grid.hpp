#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "driftfb/kernel_geometry.hpp"

namespace driftfb {

// Uniform grid on [-R, R]^n with the origin as a node. Values are stored with
// the x index fastest.
class Grid {
public:
    Grid(int dimension, double h, double R);

    int dimension() const { return dimension_; }
    double h() const { return h_; }
    double R() const { return R_; }
    int n() const { return n_; }  // nodes per axis, 2R/h + 1
    std::size_t size() const;

    double coord(int i) const { return -R_ + h_ * i; }
    std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(j) * n_ + i; }
    int ix(std::size_t idx) const { return static_cast<int>(idx % n_); }
    int iy(std::size_t idx) const { return dimension_ == 1 ? 0 : static_cast<int>(idx / n_); }
    Vector point(std::size_t idx) const;

    // Same box, spacing multiplied by `factor`.
    Grid coarsened(int factor) const;

    bool operator==(const Grid& other) const;

private:
    int dimension_;
    double h_;
    double R_;
    int n_;
};

struct Field {
    Grid grid;
    Vector values;

    Field(Grid g, Vector v);
    explicit Field(Grid g);
};

Field sample(const Grid& grid, const std::function<double(std::span<const double>)>& f);

// Guard against accidental giant allocations.
constexpr std::size_t kMaxNodes = std::size_t{1} << 22;

}  // namespace driftfb
