#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "vocim/common.hpp"

namespace vocim {

/// Iterative radix-2 FFT with precomputed twiddles. Real input is handled with
/// the usual half-size complex packing, so a 2048-point real transform costs a
/// 1024-point complex one.
class FftPlan {
public:
    explicit FftPlan(std::size_t n) : n_(n) {
        if (n < 2 || (n & (n - 1)) != 0)
            throw ValidationError("FftPlan: size must be a power of two >= 2");
        half_ = n / 2;
        build_tables();
    }

    std::size_t size() const { return n_; }

    /// Power spectrum of a real frame: n/2+1 bins, |X_k|^2.
    void power_spectrum(const float* x, double* out) const {
        // pack even/odd samples into a half-size complex signal
        for (std::size_t i = 0; i < half_; ++i)
            work_[i] = {static_cast<double>(x[2 * i]), static_cast<double>(x[2 * i + 1])};
        fft_inplace(work_.data(), half_);

        // unpack: X[k] = E[k] + W^k O[k]
        for (std::size_t k = 0; k <= half_; ++k) {
            std::complex<double> zk = (k == half_) ? work_[0] : work_[k];
            std::complex<double> znk = (k == 0) ? work_[0] : work_[half_ - k];
            double er = 0.5 * (zk.real() + znk.real());
            double ei = 0.5 * (zk.imag() - znk.imag());
            // odd = -0.5i * (zk - conj(znk))
            double odr = 0.5 * (zk.imag() + znk.imag());
            double odi = 0.5 * (znk.real() - zk.real());
            double wr = unpack_tw_[k].real(), wi = unpack_tw_[k].imag();
            double xr = er + wr * odr - wi * odi;
            double xi = ei + wr * odi + wi * odr;
            out[k] = xr * xr + xi * xi;
        }
    }

private:
    void build_tables() {
        work_.resize(half_);
        rev_.resize(half_);
        std::size_t log2h = 0;
        while ((1u << log2h) < half_) ++log2h;
        for (std::size_t i = 0; i < half_; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2h; ++b)
                if (i & (std::size_t(1) << b)) r |= std::size_t(1) << (log2h - 1 - b);
            rev_[i] = r;
        }
        tw_.resize(half_ / 2);
        for (std::size_t i = 0; i < half_ / 2; ++i) {
            double a = -2.0 * M_PI * static_cast<double>(i) / static_cast<double>(half_);
            tw_[i] = {std::cos(a), std::sin(a)};
        }
        unpack_tw_.resize(half_ + 1);
        for (std::size_t k = 0; k <= half_; ++k) {
            double a = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n_);
            unpack_tw_[k] = {std::cos(a), std::sin(a)};
        }
    }

    void fft_inplace(std::complex<double>* a, std::size_t n) const {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = rev_[i];
            if (i < j) std::swap(a[i], a[j]);
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            std::size_t step = n / len;
            for (std::size_t i = 0; i < n; i += len) {
                for (std::size_t j = 0; j < len / 2; ++j) {
                    const std::complex<double>& w = tw_[j * step];
                    std::complex<double>& lo = a[i + j];
                    std::complex<double>& hi = a[i + j + len / 2];
                    double ur = lo.real(), ui = lo.imag();
                    double vr = hi.real() * w.real() - hi.imag() * w.imag();
                    double vi = hi.real() * w.imag() + hi.imag() * w.real();
                    lo = {ur + vr, ui + vi};
                    hi = {ur - vr, ui - vi};
                }
            }
        }
    }

    std::size_t n_ = 0, half_ = 0;
    std::vector<std::size_t> rev_;
    std::vector<std::complex<double>> tw_;
    std::vector<std::complex<double>> unpack_tw_;
    mutable std::vector<std::complex<double>> work_;
};

} // namespace vocim
