#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kinlim/core.hpp"
#include "kinlim/dispersion.hpp"
#include "kinlim/io.hpp"
#include "kinlim/kinetic.hpp"
#include "kinlim/lattice.hpp"
#include "kinlim/wigner.hpp"

namespace kinlim {

// Initial data shared by the lattice and the kinetic side.
struct InitialConfig {
    enum class Kind { wkb, point };
    Kind kind = Kind::wkb;
    // WKB: normalized Gaussian h(x) = (pi s^2)^{-3/4} exp(-|x-c|^2/(2 s^2)), phase S = 2 pi k0.(x-c)
    double width = 0.5;
    Vec3 centre{0.0, 0.0, 0.0};
    Vec3 k0{0.0, 0.0, 0.0};
    double extent = 0.0;  // tabulation half-width, 0 selects 6 s
    int bins = 128;
    // point: epsilon-independent finite-support state
    std::map<IVec3, cplx> point;

    Envelope envelope() const;
    Phase phase() const;
    InitialData kinetic_initial() const;
    // Lattice wave field at scale eps on an L^3 box.
    WkbResult lattice_state(double epsilon, int L) const;
    // Radius holding 99% of the limiting mass, in macroscopic units.
    double mass_radius() const;
    // Packet diameter in lattice sites at scale eps.
    double diameter_sites(double epsilon) const;
};

struct BoltzmannSettings {
    int M = 48;
    double beta = 0.06;
    double xi2 = 1.0;
    std::size_t particles = 200000;
    bool dyson = true;
    int m_max = 8;
    std::size_t dyson_samples = 100000;
    double tail_tolerance = 1e-3;
};

struct EnergyTransportSettings {
    bool enabled = true;
    double f_width = 1.0;  // Gaussian test function f(x) = exp(-|x|^2/(2 w^2))
};

struct ConvergenceConfig {
    Couplings couplings;
    std::vector<double> epsilons;
    std::vector<int> L;
    double t_bar = 0.5;
    double dt_factor = 0.1;
    std::size_t realizations = 100;
    DisorderLaw law = DisorderLaw::rademacher;
    InitialConfig initial;
    std::vector<Observable> observables;
    BoltzmannSettings boltzmann;
    EnergyTransportSettings energy;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string output_dir;  // empty: no artifacts
    bool resume = true;
    std::string config_hash;
    // Ceiling on err at the smallest epsilon used in the summary verdict.
    double final_ceiling = 0.2;
};

struct ObservableRow {
    Observable obs;
    WignerEstimate micro;
    WignerEstimate boltzmann;
    std::optional<WignerEstimate> dyson;
    double gap = 0.0;
    double gap_stderr = 0.0;
};

struct EnergyTransportRow {
    double epsilon = 0.0;
    RealEstimate micro;        // E <f, E^eps> at t_bar / eps
    double kinetic = 0.0;      // 2 int mu_t f
    double kinetic_stderr = 0.0;
    double gap = 0.0;
    double gap_stderr = 0.0;
    RealEstimate initial_micro;  // E <f, E^eps[q0, v0]> with disorder-free q0, v0
    double initial_wigner = 0.0; // 2 <J, W[psi^eps]>
    double initial_gap = 0.0;
    double initial_gap_stderr = 0.0;
};

struct EpsilonResult {
    double epsilon = 0.0;
    int L = 0;
    std::vector<ObservableRow> rows;
    double err = 0.0;
    double guard_required = 0.0;  // minimal safe L from the wrap-around guard
    double outside_fraction = 0.0;
    bool tight = true;
    double norm_plus_initial = 0.0;
    std::size_t bound_violations = 0;
    double max_bound_ratio = 0.0;
    std::size_t dropped = 0;
    std::size_t realizations = 0;
    double dt = 0.0;
    std::size_t steps = 0;
    bool resumed = false;
    std::optional<EnergyTransportRow> energy;
};

struct ConvergenceReport {
    std::vector<EpsilonResult> per_epsilon;
    double boltzmann_mass = 0.0;
    double sigma_min = 0.0, sigma_max = 0.0;
    std::optional<DysonResult> dyson;
    bool err_strictly_decreasing = false;
    bool final_below_ceiling = false;
    bool wigner_bound_ok = false;
    std::string config_hash;
    std::uint64_t seed = 0;

    json to_json() const;
};

// Minimal L that keeps transport and packet spread inside the box.
double wrap_guard_required(const ConvergenceConfig& cfg, const DispersionGrid& g, double epsilon);

ConvergenceReport run_convergence(const ConvergenceConfig& cfg);

struct FreeFlightConfig {
    Couplings couplings;
    double epsilon = 0.25;
    int L = 64;
    double width = 1.0;  // macroscopic Gaussian width
    Vec3 k0{0.2, 0.0, 0.0};
    Vec3 start{-4.0, 0.0, 0.0};  // macroscopic packet centre at t = 0
    double t_bar = 10.0;         // macroscopic duration
    int snapshots = 11;
    double dt_factor = 0.1;
};

struct FreeFlightReport {
    std::vector<double> t;
    std::vector<Vec3> centroid;
    Vec3 velocity{};
    Vec3 velocity_stderr{};
    Vec3 predicted{};
    double relative_error = 0.0;
    double boundary_fraction = 0.0;  // largest energy fraction found near the box edge
    json to_json() const;
};

FreeFlightReport free_flight_check(const FreeFlightConfig& cfg);

struct EnergyTransportReport {
    std::vector<EnergyTransportRow> rows;
    bool gap_decreasing = false;
    double initial_ratio = 0.0;  // initial gap(eps_first) / initial gap(eps_last)
    double expected_ratio = 0.0; // sqrt(eps_first / eps_last)
    json to_json() const;
};

EnergyTransportReport energy_transport_from(const ConvergenceReport& rep);
EnergyTransportReport energy_transport_check(const ConvergenceConfig& cfg);

}  // namespace kinlim
