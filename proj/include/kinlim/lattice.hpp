#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kinlim/core.hpp"
#include "kinlim/dispersion.hpp"
#include "kinlim/fft.hpp"

namespace kinlim {

enum class DisorderLaw { none, uniform, rademacher };

std::string to_string(DisorderLaw law);
DisorderLaw parse_disorder_law(const std::string& tag);
// Support bound of each law at unit variance (0 for the zero field).
double law_bound(DisorderLaw law);

struct DisorderField {
    int L = 0;
    std::vector<double> xi;
    double xi_bar = 0.0;
    DisorderLaw law = DisorderLaw::none;
    std::uint64_t seed = 0;
};

DisorderField sample_disorder(int L, DisorderLaw law, std::uint64_t seed);
// Same, but checks that xi_bar is the bound the law forces.
DisorderField sample_disorder(int L, DisorderLaw law, double xi_bar, std::uint64_t seed);
DisorderField zero_disorder(int L);

// Throws ConfigError unless xi_bar * sqrt(epsilon) < 1.
void check_mass_positivity(double xi_bar, double epsilon);

struct LatticeState {
    int L = 0;
    double epsilon = 0.0;
    double time = 0.0;
    std::vector<double> q;
    std::vector<double> v;
};

struct WaveField {
    int L = 0;
    double epsilon = 0.0;
    std::vector<cplx> psi_plus;
    std::vector<cplx> psi_minus;

    double norm2() const;
    double norm2_plus() const;
};

// Periodic L^3 box with the dispersion sampled at k = m / L.
class Lattice {
public:
    Lattice(const Couplings& c, int L);

    int side() const { return L_; }
    std::size_t sites() const { return grid_.size(); }
    const Couplings& couplings() const { return grid_.couplings; }
    const DispersionGrid& grid() const { return grid_; }
    double omega_max() const { return grid_.omega_max; }
    double omega_min() const { return grid_.omega_min; }

    // Signed site coordinates in [-L/2, L/2)^3.
    IVec3 coords(std::size_t site) const;
    std::size_t site(const IVec3& y) const { return grid_.index(y[0], y[1], y[2]); }

    LatticeState zero_state(double epsilon) const;
    WaveField zero_wave(double epsilon) const;

private:
    int L_;
    DispersionGrid grid_;
};

// Per-worker FFT scratch bound to one lattice.
class Workspace {
public:
    explicit Workspace(const Lattice& lat);

    const Lattice& lattice() const { return lat_; }

    // out = F^{-1}[ mult(k) F[in] ] for a real, even multiplier on the grid.
    void apply_real(const std::vector<double>& mult, const double* in, double* out);
    void omega_apply(const double* in, double* out) { apply_real(omega_, in, out); }
    void omega_inverse_apply(const double* in, double* out) { apply_real(omega_inv_, in, out); }
    void alpha_apply(const double* in, double* out) { apply_real(alpha_, in, out); }
    // (1/N) sum_k alpha_hat(k) |q_hat(k)|^2 = sum_{y,y'} alpha(y-y') q_y q_y'
    double quadratic_form(const double* q);

    Fft3& fft() { return fft_; }

private:
    const Lattice& lat_;
    Fft3 fft_;
    std::vector<double> omega_, omega_inv_, alpha_;
};

double energy(const LatticeState& s, const DisorderField& xi, Workspace& ws);
double energy(const LatticeState& s, const DisorderField& xi, const Lattice& lat);

WaveField to_wavefunction(const LatticeState& s, const DisorderField& xi, Workspace& ws);
WaveField to_wavefunction(const LatticeState& s, const DisorderField& xi, const Lattice& lat);

// q = Omega^{-1}(2 Re psi_+), v = 2 Im psi_+.
LatticeState from_wavefunction(const WaveField& psi, Workspace& ws);
LatticeState from_wavefunction(const WaveField& psi, const Lattice& lat);
// Exact inverse of to_wavefunction for the given disorder: v = (1 + sqrt(eps) xi) 2 Im psi_+.
LatticeState from_wavefunction(const WaveField& psi, const DisorderField& xi, Workspace& ws);

class VerletIntegrator {
public:
    static constexpr double kStabilityFactor = 2.0;

    VerletIntegrator(Workspace& ws, const DisorderField& xi, double epsilon);

    double omega_max_eff() const { return omega_max_eff_; }
    double default_dt(double factor = 0.1) const { return factor / omega_max_eff_; }
    void check_dt(double dt) const;

    // Advances s by t_final: floor(t_final/dt) full steps plus one fractional step.
    void advance(LatticeState& s, double dt, double t_final);
    void step(LatticeState& s, double dt);
    std::size_t steps_taken() const { return steps_; }

private:
    void compute_force(const LatticeState& s);
    void check_finite(const LatticeState& s) const;

    Workspace& ws_;
    const DisorderField& xi_;
    double epsilon_;
    double omega_max_eff_;
    std::vector<double> a2_;  // (1 + sqrt(eps) xi)^2
    std::vector<double> force_;
    std::vector<double> conv_;
    // Force is cached for the state it was computed from.
    const LatticeState* cached_ = nullptr;
    double cached_time_ = 0.0;
    std::size_t steps_ = 0;
};

LatticeState evolve(const LatticeState& s, const DisorderField& xi, const Lattice& lat, double epsilon, double dt,
                    double t_final);

WaveField evolve_free_spectral(const WaveField& psi, const Lattice& lat, double t);
WaveField evolve_free_spectral(const WaveField& psi, Workspace& ws, double t);

using Envelope = std::function<cplx(const Vec3&)>;
using Phase = std::function<double(const Vec3&)>;

struct WkbResult {
    WaveField psi;
    double mass_in_box = 0.0;
    double outside_fraction = 0.0;
    bool tight = true;
    std::string warning;
};

WkbResult wkb_state(const Envelope& h, const Phase& S, double epsilon, int L);

WaveField point_state(const std::map<IVec3, cplx>& psi0, int L, double epsilon = 1.0);

// Fraction of |psi_+|^2 at macroscopic radius |eps y| > R.
double mass_outside_radius(const WaveField& psi, double R);

}  // namespace kinlim
