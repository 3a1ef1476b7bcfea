#pragma once

// Monotone discretization of A = -L + b.grad on a uniform grid, zero data
// outside the box.

#include <memory>
#include <string>
#include <vector>

#include "driftfb/grid.hpp"
#include "driftfb/kernel_geometry.hpp"
#include "driftfb/toeplitz_fft.hpp"

namespace driftfb {

enum class DriftScheme { upwind, central };

DriftScheme parse_drift_scheme(const std::string& name);
std::string to_string(DriftScheme s);

// Translation-invariant weights W_k of the interpolant quadrature of L, in units
// of 1/h, on offsets |k_x|, |k_y| <= extent. `total` is sum_k W_k over the
// infinite lattice (computed in closed form, not by summing the table).
struct StencilWeights {
    int dimension = 1;
    int extent = 0;
    std::vector<double> values;  // (2 extent + 1)^dim, x fastest
    double total = 0.0;
    double quadrature_error = 0.0;

    double at(int kx, int ky = 0) const;
};

StencilWeights nonlocal_weights(const KernelSpec& kernel, int extent);

class DiscreteOperator {
public:
    const Grid& grid() const { return data_->grid; }
    const KernelSpec& kernel() const { return data_->kernel; }
    const Vector& drift() const { return data_->drift; }
    DriftScheme scheme() const { return data_->scheme; }

    // Nonlocal weight W_k (already divided by h); k != 0.
    double weight(int kx, int ky = 0) const;
    // Coefficient of u_{i+k} in (Au)_i, including drift and diagonal.
    double coefficient(int kx, int ky = 0) const;
    double diagonal() const { return coefficient(0, 0); }
    // A applied to the all-ones field: mass coupled to the exterior.
    const Vector& exterior_mass() const { return data_->exterior_mass; }
    double stencil_quadrature_error() const { return data_->quadrature_error; }
    bool is_m_matrix() const { return data_->m_matrix; }

    Vector apply(const Vector& u) const;         // FFT
    Vector apply_direct(const Vector& u) const;  // direct summation
    // Approximate inverse (padded circulant), used as a preconditioner.
    Vector precondition(const Vector& r) const;

    // Dense coefficient table, (2n-1)^dim, x fastest.
    const Vector& coefficients() const { return data_->coeffs; }

private:
    struct Data {
        Grid grid;
        KernelSpec kernel;
        Vector drift;
        DriftScheme scheme;
        Vector coeffs;
        Vector weights;
        Vector exterior_mass;
        double quadrature_error = 0.0;
        bool m_matrix = true;
        std::unique_ptr<ToeplitzFFT> fft;
    };
    std::shared_ptr<const Data> data_;

    std::size_t offset_index(int kx, int ky) const;
    friend DiscreteOperator build_operator(const Grid&, const KernelSpec&, const Vector&, DriftScheme);
};

// Throws MMatrixViolation if the assembled matrix is not an M-matrix.
DiscreteOperator build_operator(const Grid& grid, const KernelSpec& kernel, const Vector& b,
                                DriftScheme scheme = DriftScheme::upwind);

Field apply(const DiscreteOperator& op, const Field& field);

// Missing contribution of (x_+)^beta beyond the right end of a 1-D box:
// the amount to subtract from the truncated operator value at x.
double power_tail_correction(const DiscreteOperator& op, double beta, double x);

struct ConsistencyRow {
    double x = 0.0;
    double computed = 0.0;
    double expected = 0.0;
};

struct ConsistencyReport {
    double h = 0.0;
    double beta = 0.0;
    double b = 0.0;
    std::vector<ConsistencyRow> rows;
    double max_abs_error = 0.0;
    double scale = 0.0;           // max over the window of beta x^{beta-1} (1 + |b|)
    double relative_error = 0.0;  // max_abs_error / scale
};

// A applied to (x_+)^beta against beta (cot(beta pi) + b) x^{beta-1} on window.
ConsistencyReport consistency_report(const DiscreteOperator& op, double beta, double b_scalar,
                                     double window_lo, double window_hi);

struct ConvergenceOrder {
    std::vector<ConsistencyReport> levels;
    std::vector<double> orders;  // log2(err(h) / err(h/2))
};

ConvergenceOrder consistency_convergence(const KernelSpec& kernel, double beta, double b_scalar,
                                         double h0, double R, double window_lo, double window_hi,
                                         int levels = 3, DriftScheme scheme = DriftScheme::upwind);

}  // namespace driftfb
