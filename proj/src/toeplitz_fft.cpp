#include "driftfb/toeplitz_fft.hpp"

#include <cstring>
#include <mutex>

#include <fftw3.h>

#include "driftfb/errors.hpp"

namespace driftfb {

namespace {

// FFTW planning is not thread-safe; execution with the new-array API is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t count) : ptr(static_cast<double*>(fftw_malloc(sizeof(double) * count))) {
        if (ptr == nullptr) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(ptr); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
    double* ptr;
};

}  // namespace

struct ToeplitzFFT::Plans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    std::size_t real_count = 0;
    std::size_t complex_count = 0;
};

int ToeplitzFFT::smooth_size(int n) {
    // 2^a 3^b with b <= 2: fast under FFTW_ESTIMATE planning.
    int best = 0;
    for (int odd : {1, 3, 9}) {
        int m = odd;
        while (m < n) m *= 2;
        if (best == 0 || m < best) best = m;
    }
    return best;
}

ToeplitzFFT::ToeplitzFFT(int dimension, int n, const std::vector<double>& coeffs)
    : dim_(dimension), n_(n), m_(smooth_size(2 * n - 1)), plans_(std::make_unique<Plans>()) {
    const int width = 2 * n - 1;
    const std::size_t expected = dim_ == 1 ? width : static_cast<std::size_t>(width) * width;
    if (coeffs.size() != expected) throw InvalidInput("Toeplitz coefficient array has the wrong size");

    const std::size_t m = m_;
    plans_->real_count = dim_ == 1 ? m : m * m;
    plans_->complex_count = dim_ == 1 ? m / 2 + 1 : m * (m / 2 + 1);
    FftwBuffer real(plans_->real_count);
    FftwBuffer cplx(2 * plans_->complex_count);
    auto* c = reinterpret_cast<fftw_complex*>(cplx.ptr);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (dim_ == 1) {
            plans_->forward = fftw_plan_dft_r2c_1d(m_, real.ptr, c, FFTW_ESTIMATE);
            plans_->backward = fftw_plan_dft_c2r_1d(m_, c, real.ptr, FFTW_ESTIMATE);
        } else {
            plans_->forward = fftw_plan_dft_r2c_2d(m_, m_, real.ptr, c, FFTW_ESTIMATE);
            plans_->backward = fftw_plan_dft_c2r_2d(m_, m_, c, real.ptr, FFTW_ESTIMATE);
        }
    }
    if (plans_->forward == nullptr || plans_->backward == nullptr) throw Error("FFTW planning failed");

    // Convolution kernel c_j = a_{-j}, wrapped modulo m.
    std::memset(real.ptr, 0, sizeof(double) * plans_->real_count);
    auto wrap = [&](int k) { return static_cast<std::size_t>(((-k) % m_ + m_) % m_); };
    if (dim_ == 1) {
        for (int k = -(n - 1); k <= n - 1; ++k) real.ptr[wrap(k)] = coeffs[k + n - 1];
    } else {
        for (int ky = -(n - 1); ky <= n - 1; ++ky) {
            for (int kx = -(n - 1); kx <= n - 1; ++kx) {
                real.ptr[wrap(ky) * m + wrap(kx)] = coeffs[static_cast<std::size_t>(ky + n - 1) * width + kx + n - 1];
            }
        }
    }
    fftw_execute_dft_r2c(plans_->forward, real.ptr, c);
    symbol_.resize(plans_->complex_count);
    for (std::size_t i = 0; i < plans_->complex_count; ++i) symbol_[i] = {c[i][0], c[i][1]};
}

ToeplitzFFT::~ToeplitzFFT() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plans_->forward) fftw_destroy_plan(plans_->forward);
    if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

std::vector<double> ToeplitzFFT::transform(const std::vector<double>& u, bool inverse_symbol) const {
    const std::size_t box = dim_ == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
    if (u.size() != box) throw InvalidInput("vector size does not match the Toeplitz operator");
    const std::size_t m = m_;
    FftwBuffer real(plans_->real_count);
    FftwBuffer cplx(2 * plans_->complex_count);
    auto* c = reinterpret_cast<fftw_complex*>(cplx.ptr);
    std::memset(real.ptr, 0, sizeof(double) * plans_->real_count);
    if (dim_ == 1) {
        std::memcpy(real.ptr, u.data(), sizeof(double) * n_);
    } else {
        for (int j = 0; j < n_; ++j) std::memcpy(real.ptr + j * m, u.data() + static_cast<std::size_t>(j) * n_, sizeof(double) * n_);
    }
    fftw_execute_dft_r2c(plans_->forward, real.ptr, c);
    for (std::size_t i = 0; i < plans_->complex_count; ++i) {
        const std::complex<double> z(c[i][0], c[i][1]);
        const std::complex<double> y = inverse_symbol ? z / symbol_[i] : z * symbol_[i];
        c[i][0] = y.real();
        c[i][1] = y.imag();
    }
    fftw_execute_dft_c2r(plans_->backward, c, real.ptr);
    const double scale = 1.0 / static_cast<double>(plans_->real_count);
    std::vector<double> out(box);
    if (dim_ == 1) {
        for (int i = 0; i < n_; ++i) out[i] = real.ptr[i] * scale;
    } else {
        for (int j = 0; j < n_; ++j) {
            for (int i = 0; i < n_; ++i) out[static_cast<std::size_t>(j) * n_ + i] = real.ptr[j * m + i] * scale;
        }
    }
    return out;
}

std::vector<double> ToeplitzFFT::multiply(const std::vector<double>& u) const { return transform(u, false); }

std::vector<double> ToeplitzFFT::circulant_solve(const std::vector<double>& r) const { return transform(r, true); }

}  // namespace driftfb
