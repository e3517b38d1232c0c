#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kinlim/core.hpp"
#include "kinlim/stats.hpp"

namespace kinlim {

enum class ClosedForm { none, nearest_neighbour, nearest_neighbour_squared };

std::string to_string(ClosedForm c);

// Finite-support elastic couplings y -> alpha(y).
struct Couplings {
    std::map<IVec3, double> entries;
    ClosedForm closed_form = ClosedForm::none;
    double omega0 = 0.0;

    int support_radius() const;
    double value(const IVec3& y) const;

    // alpha_hat(k) = sum_y alpha(y) exp(-i 2 pi k.y)
    cplx fourier(const Vec3& k) const;
    // Real part of alpha_hat and its first two derivatives in k.
    double symbol(const Vec3& k) const;
    Vec3 symbol_gradient(const Vec3& k) const;
    std::array<Vec3, 3> symbol_hessian(const Vec3& k) const;

    double omega(const Vec3& k) const;
    Vec3 omega_gradient(const Vec3& k) const;
    std::array<Vec3, 3> omega_hessian(const Vec3& k) const;
};

Couplings couplings_nn(double omega0);
Couplings couplings_nn_squared(double omega0);

// Closed-form dispersion for the nearest-neighbour family.
double omega_closed_form(const Couplings& c, const Vec3& k);

struct ConditionResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct CouplingsValidation {
    std::vector<ConditionResult> conditions;  // E1..E4 in order
    int resolution = 0;
    double min_symbol = 0.0;        // exact minimum of alpha_hat over the grid
    double max_imag_relative = 0.0;  // max |Im alpha_hat| / max |alpha_hat|
    bool all_pass() const;
};

CouplingsValidation validate_couplings(const Couplings& c, int resolution);

struct DispersionGrid {
    int M = 0;
    Couplings couplings;
    std::vector<double> omega;
    std::vector<Vec3> grad_omega;
    double omega_min = 0.0;
    double omega_max = 0.0;
    ClosedForm closed_form = ClosedForm::none;

    std::size_t size() const { return omega.size(); }
    std::size_t index(int m1, int m2, int m3) const {
        return (std::size_t(wrap(m1, M)) * M + std::size_t(wrap(m2, M))) * M + std::size_t(wrap(m3, M));
    }
    IVec3 coords(std::size_t i) const {
        return {int(i / (std::size_t(M) * M)), int((i / M) % M), int(i % M)};
    }
    Vec3 k(std::size_t i) const {
        const IVec3 m = coords(i);
        return {double(m[0]) / M, double(m[1]) / M, double(m[2]) / M};
    }
    std::size_t reflect(std::size_t i) const {
        const IVec3 m = coords(i);
        return index(-m[0], -m[1], -m[2]);
    }
    // Nearest grid point to k on the torus.
    std::size_t nearest(const Vec3& k) const;
    double max_grad_norm() const;
    // Largest |omega| difference between grid neighbours.
    double omega_spacing() const;
};

DispersionGrid build_dispersion(const Couplings& c, int M);

// Evaluate an arbitrary symmetric coupling on the grid without validation;
// used for degenerate test inputs.
DispersionGrid build_dispersion_unchecked(const Couplings& c, int M);

struct CriticalPoint {
    Vec3 k{};
    double omega = 0.0;
    double grad_norm = 0.0;
    Vec3 hessian_eigenvalues{};
    double hessian_det = 0.0;
    int morse_index = 0;  // number of negative Hessian eigenvalues
    bool degenerate = false;
    bool converged = false;
    std::string kind;
};

std::vector<CriticalPoint> find_critical_points(const DispersionGrid& g, double refine_tolerance = 1e-10);

struct DecayFit {
    LinearFit fit;
    std::vector<double> t;
    std::vector<double> abs_phi;
    std::vector<bool> used;
    double aliasing_guard = 0.0;
};

using GridWeight = std::function<double(const Vec3&)>;

DecayFit decay_exponent(const DispersionGrid& g, const GridWeight& f, double t_min, double t_max, int samples);

struct CrossingEstimate {
    double beta = 0.0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::size_t samples = 0;
};

struct CrossingSweep {
    std::vector<CrossingEstimate> points;
    LinearFit fit;  // log(estimate) against log(beta)
};

CrossingEstimate crossing_integral_estimate(const DispersionGrid& g, const Vec3& alpha, double beta,
                                            const IVec3& sigma, const Vec3& u, std::size_t n_samples,
                                            std::uint64_t seed, int workers = 1);

CrossingSweep crossing_sweep(const DispersionGrid& g, const Vec3& alpha, const std::vector<double>& betas,
                             const IVec3& sigma, const Vec3& u, std::size_t n_samples, std::uint64_t seed,
                             int workers = 1);

struct DiagnosticsReport {
    std::vector<CriticalPoint> critical_points;
    DecayFit decay;
    CrossingSweep crossing;
};

}  // namespace kinlim
