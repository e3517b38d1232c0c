#pragma once

#include <cstddef>
#include <memory>

#include "kinlim/core.hpp"

namespace kinlim {

// Owns FFTW plans and aligned buffers for an L^3 periodic box. Plans use
// FFTW_ESTIMATE so the chosen algorithm, and hence every rounding, is the
// same on every run. One instance per worker; not thread-safe.
class Fft3 {
public:
    explicit Fft3(int L);
    ~Fft3();
    Fft3(const Fft3&) = delete;
    Fft3& operator=(const Fft3&) = delete;

    int side() const { return L_; }
    std::size_t sites() const { return n_; }
    std::size_t half_sites() const { return nh_; }

    double* real() { return real_; }
    cplx* half() { return half_; }
    cplx* full() { return full_; }

    void forward_real();    // real() -> half(), unnormalized
    void backward_real();   // half() -> real(), unnormalized; destroys half()
    void forward_full();    // full() in place, exp(-i ...)
    void backward_full();   // full() in place, exp(+i ...)

private:
    int L_;
    std::size_t n_, nh_;
    double* real_ = nullptr;
    cplx* half_ = nullptr;
    cplx* full_ = nullptr;
    struct Plans;
    std::unique_ptr<Plans> plans_;
};

}  // namespace kinlim
