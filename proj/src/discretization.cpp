#include "driftfb/discretization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "driftfb/analytic_profiles.hpp"
#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Cells whose centre lies within this many cells of the origin get the
// polar treatment; farther cells use tensor Gauss-Legendre.
constexpr int kPolarZone = 16;

using boost::math::quadrature::gauss;

// Angle pieces on [a, b] split at the kernel's breakpoints (shifted by 2 pi m).
std::vector<double> split_angles(const KernelSpec& kernel, double a, double b, std::vector<double> extra) {
    std::vector<double> cuts{a, b};
    for (double t : extra) {
        if (t > a && t < b) cuts.push_back(t);
    }
    for (double bp : kernel.breakpoints()) {
        for (double t = bp + kTwoPi * std::floor((a - bp) / kTwoPi); t < b; t += kTwoPi) {
            if (t > a) cuts.push_back(t);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    return cuts;
}

// int_cell N_c(y) mu(theta) |y|^{-3} dy for the four bilinear corner functions,
// corners ordered (x0,y0), (x1,y0), (x0,y1), (x1,y1). Unit cell [x0,x0+1]x[y0,y0+1].
void polar_cell(const KernelSpec& kernel, double x0, double y0, std::array<double, 4>& val,
                std::array<double, 4>& err) {
    const double x1 = x0 + 1.0;
    const double y1 = y0 + 1.0;
    const double centre = std::atan2(y0 + 0.5, x0 + 0.5);
    std::vector<double> corner;
    for (double cx : {x0, x1}) {
        for (double cy : {y0, y1}) {
            if (cx == 0.0 && cy == 0.0) continue;
            double t = std::atan2(cy, cx) - centre;
            t = std::remainder(t, kTwoPi);
            corner.push_back(centre + t);
        }
    }
    const auto [lo_it, hi_it] = std::minmax_element(corner.begin(), corner.end());
    const auto cuts = split_angles(kernel, *lo_it, *hi_it, corner);

    auto radial = [&](double theta, int which) {
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        double r_in = 0.0;
        double r_out = 1e300;
        auto slab = [&](double dir, double lo, double hi) {
            if (std::abs(dir) < 1e-300) {
                if (lo > 0.0 || hi < 0.0) r_out = -1.0;
                return;
            }
            const double t1 = lo / dir;
            const double t2 = hi / dir;
            r_in = std::max(r_in, std::min(t1, t2));
            r_out = std::min(r_out, std::max(t1, t2));
        };
        slab(c, x0, x1);
        slab(s, y0, y1);
        if (!(r_out > r_in) || r_in <= 0.0) return 0.0;
        // Corner function along the ray: (p0 + p1 r)(q0 + q1 r).
        double p0, p1, q0, q1;
        if (which == 0 || which == 2) { p0 = x1; p1 = -c; } else { p0 = -x0; p1 = c; }
        if (which == 0 || which == 1) { q0 = y1; q1 = -s; } else { q0 = -y0; q1 = s; }
        const double a0 = p0 * q0;
        const double a1 = p0 * q1 + p1 * q0;
        const double a2 = p1 * q1;
        const double integral = a0 * (1.0 / r_in - 1.0 / r_out) + a1 * std::log(r_out / r_in) + a2 * (r_out - r_in);
        return kernel(theta) * integral;
    };
    for (int w = 0; w < 4; ++w) {
        auto f = [&](double theta) { return radial(theta, w); };
        double fine = 0.0;
        double coarse = 0.0;
        for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
            if (cuts[p + 1] <= cuts[p]) continue;
            fine += gauss<double, 20>::integrate(f, cuts[p], cuts[p + 1]);
            coarse += gauss<double, 10>::integrate(f, cuts[p], cuts[p + 1]);
        }
        val[w] = fine;
        err[w] = std::abs(fine - coarse);
    }
}

constexpr std::array<double, 4> kG4x{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kG4w{0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
constexpr std::array<double, 3> kG3x{-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr std::array<double, 3> kG3w{0.5555555555555556, 0.8888888888888888, 0.5555555555555556};

template <std::size_t Q>
void tensor_cell(const KernelSpec& kernel, double x0, double y0, const std::array<double, Q>& xs,
                 const std::array<double, Q>& ws, std::array<double, 4>& val) {
    val.fill(0.0);
    const bool constant = kernel.is_constant();
    const double mu_const = constant ? kernel(0.0) : 0.0;
    for (std::size_t a = 0; a < Q; ++a) {
        const double tx = 0.5 * (1.0 + xs[a]);
        const double x = x0 + tx;
        for (std::size_t b = 0; b < Q; ++b) {
            const double ty = 0.5 * (1.0 + xs[b]);
            const double y = y0 + ty;
            const double r2 = x * x + y * y;
            const double mu = constant ? mu_const : kernel(std::atan2(y, x));
            const double k = 0.25 * ws[a] * ws[b] * mu / (r2 * std::sqrt(r2));
            val[0] += k * (1.0 - tx) * (1.0 - ty);
            val[1] += k * tx * (1.0 - ty);
            val[2] += k * (1.0 - tx) * ty;
            val[3] += k * tx * ty;
        }
    }
}

}  // namespace

DriftScheme parse_drift_scheme(const std::string& name) {
    if (name == "upwind") return DriftScheme::upwind;
    if (name == "central") return DriftScheme::central;
    throw InvalidInput("unknown drift scheme '" + name + "' (expected upwind or central)");
}

std::string to_string(DriftScheme s) { return s == DriftScheme::upwind ? "upwind" : "central"; }

double StencilWeights::at(int kx, int ky) const {
    const int w = 2 * extent + 1;
    if (std::abs(kx) > extent || std::abs(ky) > extent) return 0.0;
    if (dimension == 1) return values[kx + extent];
    return values[static_cast<std::size_t>(ky + extent) * w + kx + extent];
}

StencilWeights nonlocal_weights(const KernelSpec& kernel, int extent) {
    if (extent < 1) throw InvalidInput("stencil extent must be at least 1");
    StencilWeights out;
    out.dimension = kernel.dimension();
    out.extent = extent;
    const int width = 2 * extent + 1;

    if (out.dimension == 1) {
        // mu(+1) = mu(-1) by evenness. Taylor on [-1, 1] plus the hat integrals
        // outside it; sum_k W_k = 4 mu.
        const double m = kernel(0.0);
        out.values.assign(width, 0.0);
        for (int k = 1; k <= extent; ++k) {
            const double kk = static_cast<double>(k);
            const double w = k == 1 ? m * (2.0 - std::log(2.0)) : m * std::log(kk * kk / (kk * kk - 1.0));
            out.values[extent + k] = w;
            out.values[extent - k] = w;
        }
        out.total = 4.0 * m;
        return out;
    }

    out.values.assign(static_cast<std::size_t>(width) * width, 0.0);
    auto add = [&](int kx, int ky, double v) {
        if (std::abs(kx) > extent || std::abs(ky) > extent) return;
        out.values[static_cast<std::size_t>(ky + extent) * width + kx + extent] += v;
    };

    // Central square [-1,1]^2: second-order Taylor of the interpolant with
    // moments M_ab = int mu e_a e_b / max(|cos|,|sin|) dtheta.
    std::vector<double> octants;
    for (int q = 1; q < 8; ++q) octants.push_back(q * kPi / 4.0);
    const auto cuts = split_angles(kernel, 0.0, kTwoPi, octants);
    auto moment = [&](auto&& g) {
        double fine = 0.0;
        double coarse = 0.0;
        for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
            fine += gauss<double, 20>::integrate(g, cuts[p], cuts[p + 1]);
            coarse += gauss<double, 10>::integrate(g, cuts[p], cuts[p + 1]);
        }
        return std::pair{fine, std::abs(fine - coarse)};
    };
    auto inv_rho = [](double t) { return std::max(std::abs(std::cos(t)), std::abs(std::sin(t))); };
    const auto [mxx, exx] = moment([&](double t) { return kernel(t) * std::cos(t) * std::cos(t) / inv_rho(t); });
    const auto [myy, eyy] = moment([&](double t) { return kernel(t) * std::sin(t) * std::sin(t) / inv_rho(t); });
    const auto [mxy, exy] = moment([&](double t) { return kernel(t) * std::cos(t) * std::sin(t) / inv_rho(t); });
    const auto [outer, eout] = moment([&](double t) { return kernel(t) * inv_rho(t); });
    add(1, 0, 0.5 * mxx);
    add(-1, 0, 0.5 * mxx);
    add(0, 1, 0.5 * myy);
    add(0, -1, 0.5 * myy);
    add(1, 1, 0.25 * mxy);
    add(-1, -1, 0.25 * mxy);
    add(1, -1, -0.25 * mxy);
    add(-1, 1, -0.25 * mxy);
    out.total = mxx + myy + outer;
    double qerr = exx + eyy + 0.5 * exy + eout;

    // Cells [i,i+1]x[j,j+1] with j >= 0; the point reflection y -> -y covers j < 0.
    std::array<double, 4> v{};
    std::array<double, 4> e{};
    std::array<double, 4> coarse{};
    for (int j = 0; j <= extent; ++j) {
        for (int i = -extent - 1; i <= extent; ++i) {
            if (j == 0 && (i == -1 || i == 0)) continue;
            const double cx = i + 0.5;
            const double cy = j + 0.5;
            if (std::max(std::abs(cx), std::abs(cy)) < kPolarZone) {
                polar_cell(kernel, i, j, v, e);
            } else {
                tensor_cell(kernel, i, j, kG4x, kG4w, v);
                tensor_cell(kernel, i, j, kG3x, kG3w, coarse);
                for (int c = 0; c < 4; ++c) e[c] = std::abs(v[c] - coarse[c]);
            }
            const int nx[4] = {i, i + 1, i, i + 1};
            const int ny[4] = {j, j, j + 1, j + 1};
            for (int c = 0; c < 4; ++c) {
                add(nx[c], ny[c], v[c]);
                add(-nx[c], -ny[c], v[c]);
                qerr += 2.0 * e[c];
            }
        }
    }
    out.quadrature_error = qerr;
    return out;
}

std::size_t DiscreteOperator::offset_index(int kx, int ky) const {
    const int n = data_->grid.n();
    const int width = 2 * n - 1;
    if (std::abs(kx) > n - 1 || std::abs(ky) > n - 1) return static_cast<std::size_t>(-1);
    if (data_->grid.dimension() == 1) return static_cast<std::size_t>(kx + n - 1);
    return static_cast<std::size_t>(ky + n - 1) * width + kx + n - 1;
}

double DiscreteOperator::weight(int kx, int ky) const {
    if (grid().dimension() == 1 && ky != 0) return 0.0;
    const auto idx = offset_index(kx, ky);
    return idx == static_cast<std::size_t>(-1) ? 0.0 : data_->weights[idx];
}

double DiscreteOperator::coefficient(int kx, int ky) const {
    if (grid().dimension() == 1 && ky != 0) return 0.0;
    const auto idx = offset_index(kx, ky);
    return idx == static_cast<std::size_t>(-1) ? 0.0 : data_->coeffs[idx];
}

Vector DiscreteOperator::apply(const Vector& u) const {
    if (u.size() != grid().size()) throw InvalidInput("field does not match the operator grid");
    return data_->fft->multiply(u);
}

Vector DiscreteOperator::apply_direct(const Vector& u) const {
    const Grid& g = grid();
    if (u.size() != g.size()) throw InvalidInput("field does not match the operator grid");
    const int n = g.n();
    Vector out(u.size(), 0.0);
    if (g.dimension() == 1) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += data_->coeffs[j - i + n - 1] * u[j];
            out[i] = s;
        }
        return out;
    }
    const int width = 2 * n - 1;
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            double s = 0.0;
            for (int jy = 0; jy < n; ++jy) {
                const double* row = data_->coeffs.data() + static_cast<std::size_t>(jy - iy + n - 1) * width + (n - 1 - ix);
                const double* uy = u.data() + static_cast<std::size_t>(jy) * n;
                for (int jx = 0; jx < n; ++jx) s += row[jx] * uy[jx];
            }
            out[g.index(ix, iy)] = s;
        }
    }
    return out;
}

Vector DiscreteOperator::precondition(const Vector& r) const { return data_->fft->circulant_solve(r); }

DiscreteOperator build_operator(const Grid& grid, const KernelSpec& kernel, const Vector& b, DriftScheme scheme) {
    if (kernel.dimension() != grid.dimension()) throw InvalidInput("kernel and grid dimensions differ");
    if (static_cast<int>(b.size()) != grid.dimension()) throw InvalidInput("drift length does not match grid dimension");
    for (double v : b) {
        if (!std::isfinite(v)) throw InvalidInput("drift must be finite");
    }
    const int n = grid.n();
    const int dim = grid.dimension();
    const double h = grid.h();
    const int width = 2 * n - 1;

    auto data = std::make_shared<DiscreteOperator::Data>(
        DiscreteOperator::Data{grid, kernel, b, scheme, {}, {}, {}, 0.0, true, nullptr});
    const StencilWeights sw = nonlocal_weights(kernel, n - 1);
    data->weights = sw.values;
    for (double& w : data->weights) w /= h;
    data->quadrature_error = sw.quadrature_error / h;
    data->coeffs.resize(data->weights.size());
    for (std::size_t k = 0; k < data->weights.size(); ++k) data->coeffs[k] = -data->weights[k];
    auto at = [&](int kx, int ky) -> double& {
        return dim == 1 ? data->coeffs[kx + n - 1] : data->coeffs[static_cast<std::size_t>(ky + n - 1) * width + kx + n - 1];
    };
    at(0, 0) = sw.total / h;
    for (int a = 0; a < dim; ++a) {
        const int ex = a == 0 ? 1 : 0;
        const int ey = a == 1 ? 1 : 0;
        const double ba = b[a];
        if (scheme == DriftScheme::upwind) {
            if (ba > 0.0) {
                at(0, 0) += ba / h;
                at(-ex, -ey) -= ba / h;
            } else if (ba < 0.0) {
                at(0, 0) -= ba / h;
                at(ex, ey) += ba / h;
            }
        } else {
            at(ex, ey) += 0.5 * ba / h;
            at(-ex, -ey) -= 0.5 * ba / h;
        }
    }

    // Exterior mass = sum of the row coefficients landing inside the box,
    // via a summed-area table over offsets.
    data->exterior_mass.resize(grid.size());
    if (dim == 1) {
        std::vector<long double> prefix(width + 1, 0.0L);
        for (int k = 0; k < width; ++k) prefix[k + 1] = prefix[k] + data->coeffs[k];
        for (int i = 0; i < n; ++i) {
            // offsets -i .. n-1-i  ->  indices n-1-i .. 2n-2-i
            data->exterior_mass[i] = static_cast<double>(prefix[2 * n - 1 - i] - prefix[n - 1 - i]);
        }
    } else {
        std::vector<long double> sat(static_cast<std::size_t>(width + 1) * (width + 1), 0.0L);
        auto S = [&](int r, int c) -> long double& { return sat[static_cast<std::size_t>(r) * (width + 1) + c]; };
        for (int r = 0; r < width; ++r) {
            for (int c = 0; c < width; ++c) {
                S(r + 1, c + 1) = data->coeffs[static_cast<std::size_t>(r) * width + c] + S(r, c + 1) + S(r + 1, c) - S(r, c);
            }
        }
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                const int r0 = n - 1 - iy;
                const int r1 = 2 * n - 1 - iy;
                const int c0 = n - 1 - ix;
                const int c1 = 2 * n - 1 - ix;
                data->exterior_mass[grid.index(ix, iy)] = static_cast<double>(S(r1, c1) - S(r0, c1) - S(r1, c0) + S(r0, c0));
            }
        }
    }

    // M-matrix: positive diagonal, nonpositive couplings, nonnegative row sums.
    const std::size_t centre = grid.index(n / 2, dim == 1 ? 0 : n / 2);
    if (!(at(0, 0) > 0.0)) throw MMatrixViolation("nonpositive diagonal", centre);
    for (std::size_t k = 0; k < data->coeffs.size(); ++k) {
        const int kx = dim == 1 ? static_cast<int>(k) - (n - 1) : static_cast<int>(k % width) - (n - 1);
        const int ky = dim == 1 ? 0 : static_cast<int>(k / width) - (n - 1);
        if (kx == 0 && ky == 0) continue;
        if (data->coeffs[k] > 0.0) {
            // Report a row that actually couples through this offset.
            const int rx = std::clamp(n / 2, std::max(0, -kx), std::min(n - 1, n - 1 - kx));
            const int ry = dim == 1 ? 0 : std::clamp(n / 2, std::max(0, -ky), std::min(n - 1, n - 1 - ky));
            throw MMatrixViolation("positive off-diagonal coefficient at offset (" + std::to_string(kx) + ", " +
                                       std::to_string(ky) + ")",
                                   grid.index(rx, ry));
        }
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (data->exterior_mass[i] < -1e-12 * at(0, 0)) throw MMatrixViolation("negative row sum", i);
    }
    data->fft = std::make_unique<ToeplitzFFT>(dim, n, data->coeffs);
    DiscreteOperator op;
    op.data_ = std::move(data);
    return op;
}

Field apply(const DiscreteOperator& op, const Field& field) {
    if (!(field.grid == op.grid())) throw InvalidInput("field grid does not match operator grid");
    return Field(field.grid, op.apply(field.values));
}

double power_tail_correction(const DiscreteOperator& op, double beta, double x) {
    if (op.grid().dimension() != 1) throw UnsupportedDimension("power tail correction is 1-D");
    const double m = op.kernel()(0.0);
    const double edge = op.grid().R() + 0.5 * op.grid().h();
    boost::math::quadrature::exp_sinh<double> rule;
    auto f = [&](double y) { return m * std::pow(y, beta) / ((y - x) * (y - x)); };
    return rule.integrate(f, edge, std::numeric_limits<double>::infinity());
}

ConsistencyReport consistency_report(const DiscreteOperator& op, double beta, double b_scalar, double window_lo,
                                     double window_hi) {
    const Grid& g = op.grid();
    if (g.dimension() != 1) throw UnsupportedDimension("consistency_report needs a 1-D operator");
    if (std::abs(op.drift()[0] - b_scalar) > 1e-14 * (1.0 + std::abs(b_scalar))) {
        throw InvalidInput("b_scalar differs from the operator's drift");
    }
    if (!(window_lo > 0.0) || !(window_hi > window_lo)) throw InvalidInput("evaluation window must be inside (0, inf)");
    if (window_hi > 0.5 * g.R()) throw InvalidInput("evaluation window touches the truncation boundary");

    Vector u(g.size());
    for (int i = 0; i < g.n(); ++i) u[i] = g.coord(i) > 0.0 ? std::pow(g.coord(i), beta) : 0.0;
    const Vector au = op.apply(u);
    ConsistencyReport rep;
    rep.h = g.h();
    rep.beta = beta;
    rep.b = b_scalar;
    const double coef = power_image_coefficient(beta, b_scalar);
    for (int i = 0; i < g.n(); ++i) {
        const double x = g.coord(i);
        if (x < window_lo - 1e-12 || x > window_hi + 1e-12) continue;
        ConsistencyRow row{x, au[i] - power_tail_correction(op, beta, x), coef * std::pow(x, beta - 1.0)};
        rep.max_abs_error = std::max(rep.max_abs_error, std::abs(row.computed - row.expected));
        rep.scale = std::max(rep.scale, beta * std::pow(x, beta - 1.0) * (1.0 + std::abs(b_scalar)));
        rep.rows.push_back(row);
    }
    if (rep.rows.empty()) throw InvalidInput("evaluation window contains no grid nodes");
    rep.relative_error = rep.max_abs_error / rep.scale;
    return rep;
}

ConvergenceOrder consistency_convergence(const KernelSpec& kernel, double beta, double b_scalar, double h0, double R,
                                         double window_lo, double window_hi, int levels, DriftScheme scheme) {
    ConvergenceOrder out;
    for (int l = 0; l < levels; ++l) {
        const Grid g(1, h0 / std::pow(2.0, l), R);
        const auto op = build_operator(g, kernel, {b_scalar}, scheme);
        out.levels.push_back(consistency_report(op, beta, b_scalar, window_lo, window_hi));
    }
    for (std::size_t l = 1; l < out.levels.size(); ++l) {
        out.orders.push_back(std::log2(out.levels[l - 1].max_abs_error / out.levels[l].max_abs_error));
    }
    return out;
}

}  // namespace driftfb
