#include "driftfb/krylov.hpp"

#include <cmath>

#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

double norm2(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

GmresResult gmres(const LinearMap& a, const Vector& b, const LinearMap& precondition, const Vector& x0,
                  double rtol, int restart, int max_iterations) {
    const std::size_t n = b.size();
    GmresResult out;
    out.x = x0.empty() ? Vector(n, 0.0) : x0;
    if (out.x.size() != n) throw InvalidInput("gmres: initial guess has the wrong size");
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        out.x.assign(n, 0.0);
        out.converged = true;
        return out;
    }
    auto residual = [&](const Vector& x) {
        Vector r = a(x);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        return r;
    };
    auto m = [&](const Vector& v) { return precondition ? precondition(v) : v; };

    Vector r = residual(out.x);
    double beta = norm2(r);
    out.relative_residual = beta / bnorm;
    while (out.iterations < max_iterations && out.relative_residual > rtol) {
        const int k_max = std::min(restart, max_iterations - out.iterations);
        std::vector<Vector> v;
        v.reserve(k_max + 1);
        v.push_back(r);
        for (double& x : v[0]) x /= beta;
        std::vector<std::vector<double>> hmat(k_max + 1, std::vector<double>(k_max, 0.0));
        std::vector<double> cs(k_max), sn(k_max), g(k_max + 1, 0.0);
        g[0] = beta;
        int k = 0;
        for (; k < k_max; ++k) {
            Vector w = a(m(v[k]));
            for (int j = 0; j <= k; ++j) {
                double hj = 0.0;
                for (std::size_t i = 0; i < n; ++i) hj += w[i] * v[j][i];
                hmat[j][k] = hj;
                for (std::size_t i = 0; i < n; ++i) w[i] -= hj * v[j][i];
            }
            const double hn = norm2(w);
            hmat[k + 1][k] = hn;
            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * hmat[j][k] + sn[j] * hmat[j + 1][k];
                hmat[j + 1][k] = -sn[j] * hmat[j][k] + cs[j] * hmat[j + 1][k];
                hmat[j][k] = t;
            }
            const double den = std::hypot(hmat[k][k], hmat[k + 1][k]);
            cs[k] = den == 0.0 ? 1.0 : hmat[k][k] / den;
            sn[k] = den == 0.0 ? 0.0 : hmat[k + 1][k] / den;
            hmat[k][k] = den;
            hmat[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++out.iterations;
            if (std::abs(g[k + 1]) / bnorm <= rtol || hn == 0.0) {
                ++k;
                break;
            }
            for (double& x : w) x /= hn;
            v.push_back(std::move(w));
        }
        // back substitution
        std::vector<double> y(k, 0.0);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int j = i + 1; j < k; ++j) s -= hmat[i][j] * y[j];
            y[i] = s / hmat[i][i];
        }
        Vector z(n, 0.0);
        for (int j = 0; j < k; ++j) {
            for (std::size_t i = 0; i < n; ++i) z[i] += y[j] * v[j][i];
        }
        z = m(z);
        for (std::size_t i = 0; i < n; ++i) out.x[i] += z[i];
        r = residual(out.x);
        beta = norm2(r);
        const double previous = out.relative_residual;
        out.relative_residual = beta / bnorm;
        if (beta == 0.0 || out.relative_residual >= previous) break;  // stagnation
    }
    out.converged = out.relative_residual <= rtol;
    return out;
}

}  // namespace driftfb
