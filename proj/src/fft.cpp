#include "kinlim/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <new>

namespace kinlim {

namespace {
// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct Fft3::Plans {
    fftw_plan r2c = nullptr, c2r = nullptr, fwd = nullptr, bwd = nullptr;
};

Fft3::Fft3(int L) : L_(L), n_(std::size_t(L) * L * L), nh_(std::size_t(L) * L * (L / 2 + 1)) {
    if (L < 2) throw InvalidParameter("FFT box side must be at least 2");
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n_));
    half_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * nh_));
    full_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n_));
    if (!real_ || !half_ || !full_) throw std::bad_alloc();
    plans_ = std::make_unique<Plans>();
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto* h = reinterpret_cast<fftw_complex*>(half_);
    auto* f = reinterpret_cast<fftw_complex*>(full_);
    plans_->r2c = fftw_plan_dft_r2c_3d(L, L, L, real_, h, FFTW_ESTIMATE);
    plans_->c2r = fftw_plan_dft_c2r_3d(L, L, L, h, real_, FFTW_ESTIMATE);
    plans_->fwd = fftw_plan_dft_3d(L, L, L, f, f, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_->bwd = fftw_plan_dft_3d(L, L, L, f, f, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft3::~Fft3() {
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (plans_) {
            fftw_destroy_plan(plans_->r2c);
            fftw_destroy_plan(plans_->c2r);
            fftw_destroy_plan(plans_->fwd);
            fftw_destroy_plan(plans_->bwd);
        }
    }
    fftw_free(real_);
    fftw_free(half_);
    fftw_free(full_);
}

void Fft3::forward_real() { fftw_execute(plans_->r2c); }
void Fft3::backward_real() { fftw_execute(plans_->c2r); }
void Fft3::forward_full() { fftw_execute(plans_->fwd); }
void Fft3::backward_full() { fftw_execute(plans_->bwd); }

}  // namespace kinlim
