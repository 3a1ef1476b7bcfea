#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace driftfb {

// Multiplication by a (block-)Toeplitz matrix through a zero-padded circulant.
// coeffs holds the coefficient of u_{i+k} for k in [-(n-1), n-1]^dim, x fastest.
class ToeplitzFFT {
public:
    ToeplitzFFT(int dimension, int n, const std::vector<double>& coeffs);
    ~ToeplitzFFT();
    ToeplitzFFT(const ToeplitzFFT&) = delete;
    ToeplitzFFT& operator=(const ToeplitzFFT&) = delete;

    std::vector<double> multiply(const std::vector<double>& u) const;
    // Inverse of the padded circulant, restricted back to the box.
    std::vector<double> circulant_solve(const std::vector<double>& r) const;

    int fft_size() const { return m_; }
    // Smallest 2^a 3^b 5^c 7^d >= n.
    static int smooth_size(int n);

private:
    std::vector<double> transform(const std::vector<double>& u, bool inverse_symbol) const;

    int dim_;
    int n_;
    int m_;
    std::vector<std::complex<double>> symbol_;
    struct Plans;
    std::unique_ptr<Plans> plans_;
};

}  // namespace driftfb
