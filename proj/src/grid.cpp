#include "driftfb/grid.hpp"

#include <cmath>
#include <string>

#include "driftfb/errors.hpp"

namespace driftfb {

Grid::Grid(int dimension, double h, double R) : dimension_(dimension), h_(h), R_(R), n_(0) {
    if (dimension != 1 && dimension != 2) {
        throw UnsupportedDimension("grid dimension must be 1 or 2, got " + std::to_string(dimension));
    }
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("grid spacing must be positive");
    if (!(R >= 4.0) || !std::isfinite(R)) throw InvalidInput("grid half-extent R must be at least 4");
    const double cells = R / h;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * cells) throw InvalidInput("R/h must be an integer");
    const double per_axis = 2.0 * rounded + 1.0;
    if (std::pow(per_axis, dimension) > static_cast<double>(kMaxNodes)) {
        throw InvalidInput("grid exceeds the node-count guardrail of 2^22 nodes");
    }
    n_ = static_cast<int>(per_axis);
}

std::size_t Grid::size() const {
    return dimension_ == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
}

Vector Grid::point(std::size_t idx) const {
    if (dimension_ == 1) return {coord(static_cast<int>(idx))};
    return {coord(ix(idx)), coord(iy(idx))};
}

Grid Grid::coarsened(int factor) const { return Grid(dimension_, h_ * factor, R_); }

bool Grid::operator==(const Grid& other) const {
    return dimension_ == other.dimension_ && n_ == other.n_ && h_ == other.h_ && R_ == other.R_;
}

Field::Field(Grid g, Vector v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) throw InvalidInput("field size does not match grid");
}

Field::Field(Grid g) : grid(std::move(g)), values(grid.size(), 0.0) {}

Field sample(const Grid& grid, const std::function<double(std::span<const double>)>& f) {
    Field out(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vector p = grid.point(i);
        out.values[i] = f(p);
    }
    return out;
}

}  // namespace driftfb
