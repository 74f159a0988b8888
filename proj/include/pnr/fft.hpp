#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "pnr/error.hpp"

namespace pnr {

/// Real-to-complex transform pair of fixed length backed by FFTW. Plans are
/// created once per length; execution through the new-array interface is
/// thread-safe, planning is serialized.
class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n)
    {
        require(n >= 2, Errc::invalid_argument, "FFT length must be at least 2");
        std::vector<double> in(n);
        std::vector<std::complex<double>> spec(n / 2 + 1);
        std::lock_guard lock(planner_mutex());
        const int len = static_cast<int>(n);
        forward_ = fftw_plan_dft_r2c_1d(len, in.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
        inverse_ = fftw_plan_dft_c2r_1d(len, reinterpret_cast<fftw_complex*>(spec.data()), in.data(),
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
        require(forward_ && inverse_, Errc::invalid_argument, "FFTW planning failed");
    }

    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    ~RealFft()
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }

    std::size_t size() const noexcept { return n_; }

    std::vector<std::complex<double>> forward(std::span<const double> x) const
    {
        require(x.size() == n_, Errc::length_mismatch, "FFT input length");
        std::vector<double> in(x.begin(), x.end());
        std::vector<std::complex<double>> out(n_ / 2 + 1);
        fftw_execute_dft_r2c(forward_, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
        return out;
    }

    /// Unnormalized c2r inverse divided by n, so inverse(forward(x)) == x.
    std::vector<double> inverse(std::span<const std::complex<double>> spectrum) const
    {
        require(spectrum.size() == n_ / 2 + 1, Errc::length_mismatch, "inverse FFT input length");
        // c2r destroys its input
        std::vector<std::complex<double>> in(spectrum.begin(), spectrum.end());
        std::vector<double> out(n_);
        fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
        const double scale = 1.0 / static_cast<double>(n_);
        for (double& v : out) {
            v *= scale;
        }
        return out;
    }

    /// Shared instance per length.
    static std::shared_ptr<const RealFft> get(std::size_t n)
    {
        static std::mutex cache_mutex;
        static std::map<std::size_t, std::shared_ptr<const RealFft>> cache;
        std::lock_guard lock(cache_mutex);
        auto& slot = cache[n];
        if (!slot) {
            slot = std::make_shared<const RealFft>(n);
        }
        return slot;
    }

private:
    static std::mutex& planner_mutex()
    {
        static std::mutex m;
        return m;
    }

    std::size_t n_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

} // namespace pnr
