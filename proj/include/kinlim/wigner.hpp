#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kinlim/core.hpp"
#include "kinlim/lattice.hpp"
#include "kinlim/stats.hpp"

namespace kinlim {

struct Observable {
    Vec3 p{0.0, 0.0, 0.0};
    IVec3 n{0, 0, 0};
    bool operator==(const Observable&) const = default;
};

struct WignerEstimate {
    Observable obs;
    cplx mean = 0.0;
    cplx stderr_ = 0.0;  // componentwise standard errors (re, im)
    std::size_t realizations = 0;
};

struct RealEstimate {
    std::string name;
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t realizations = 0;
};

// F(p,n) = sum_y conj(psi_{+,y-n}) psi_{+,y} exp(-i 2 pi eps p.(y - n/2)), y signed.
cplx f_transform(const WaveField& psi, double epsilon, const Observable& obs);
std::vector<cplx> f_transform(const WaveField& psi, double epsilon, const std::vector<Observable>& obs);

using TestFunction = std::function<double(const Vec3&)>;

// <f, E> = sum_y f(eps y) (1/2)((1 + sqrt(eps) xi_y)^{-2} v_y^2 + |(Omega q)_y|^2)
double energy_density_pairing(const LatticeState& s, const DisorderField& xi, double epsilon, const TestFunction& f,
                              Workspace& ws);
// Site energy density, summing to the total energy.
std::vector<double> energy_density(const LatticeState& s, const DisorderField& xi, Workspace& ws);

struct Mode {
    cplx weight = 1.0;
    Observable obs;
};

cplx pair_test_function(const WaveField& psi, double epsilon, const std::vector<Mode>& modes);

// How the lattice (q, v) initial state is built from the target wave packet.
enum class InitialCoupling {
    exact,           // v carries the disorder factor so that psi(0) equals the target exactly
    disorder_free    // q, v independent of xi: q = Omega^{-1} 2 Re psi, v = 2 Im psi
};

using StateFunctional = std::function<double(const LatticeState&, const DisorderField&, Workspace&)>;

struct NamedFunctional {
    std::string name;
    StateFunctional fn;
};

struct DisorderRunConfig {
    Couplings couplings;
    int L = 0;
    double epsilon = 0.0;
    double t_bar = 0.0;  // macroscopic time; the lattice runs to t_bar / epsilon
    double dt_factor = 0.1;
    std::size_t realizations = 0;
    DisorderLaw law = DisorderLaw::rademacher;
    std::uint64_t seed = 0;
    int workers = 1;
    InitialCoupling coupling = InitialCoupling::exact;
    WaveField initial;
    // Extra scalar observables measured on every final state.
    std::vector<NamedFunctional> scalars;
    // Same, measured on the initial lattice state of every realization.
    std::vector<NamedFunctional> initial_scalars;
};

struct DisorderAverageResult {
    std::vector<WignerEstimate> estimates;
    std::vector<RealEstimate> scalars;
    std::vector<RealEstimate> initial_scalars;
    std::size_t attempted = 0;
    std::size_t dropped = 0;
    std::size_t bound_violations = 0;
    double max_bound_ratio = 0.0;  // max over realizations and observables of |F| / F(0,0)
    double dt = 0.0;
    std::size_t steps = 0;
    RealEstimate norm_plus;  // ||psi_+(t)||^2 across realizations
};

std::uint64_t realization_seed(std::uint64_t master, std::size_t r);

DisorderAverageResult disorder_average(const DisorderRunConfig& cfg, const std::vector<Observable>& observables);

}  // namespace kinlim
