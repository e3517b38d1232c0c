#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kinlim/core.hpp"
#include "kinlim/dispersion.hpp"
#include "kinlim/lattice.hpp"
#include "kinlim/rng.hpp"
#include "kinlim/wigner.hpp"

namespace kinlim {

// Lorentzian broadening of the energy-shell delta.
inline double lorentzian(double r, double beta) { return (beta / std::numbers::pi) / (r * r + beta * beta); }

// Grid points grouped by frequency, rounded to 2^-36.
struct OmegaBuckets {
    std::vector<double> omega;           // representative value per bucket
    std::vector<std::uint32_t> count;    // members per bucket
    std::vector<std::uint32_t> of_point;  // bucket index per grid point
};

OmegaBuckets group_by_omega(const DispersionGrid& g);

struct CollisionTable {
    std::shared_ptr<const DispersionGrid> grid;
    double beta = 0.0;
    double xi2 = 1.0;
    OmegaBuckets buckets;
    std::vector<double> bucket_sigma;
    std::vector<double> bucket_cap;         // max over k' of lorentzian * omega'^2
    std::vector<double> bucket_acceptance;  // expected rejection acceptance rate
    std::vector<double> sigma;              // per grid point
    double rejection_cap = 0.0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;

    const DispersionGrid& g() const { return *grid; }
    // Unnormalized jump weight lorentzian(omega - omega') omega'^2.
    double jump_weight(std::size_t k, std::size_t kp) const;
    // R(k,k') = 2 pi xi2 lorentzian(omega - omega') omega'^2.
    double kernel(std::size_t k, std::size_t kp) const { return kTwoPi * xi2 * jump_weight(k, kp); }
    // Broadened total rate at an arbitrary frequency.
    double sigma_at_omega(double w) const;
};

// Default broadening 4 (omega_max - omega_min) / M, clamped to (0, 1].
double default_beta(const DispersionGrid& g);

CollisionTable build_collision_table(std::shared_ptr<const DispersionGrid> g, double beta, double xi2 = 1.0);

std::size_t sample_jump(const CollisionTable& t, std::size_t k, Stream& rng);

struct Particle {
    Vec3 x{0.0, 0.0, 0.0};
    std::uint32_t k = 0;
    std::uint32_t collisions = 0;
    double weight = 0.0;
};

struct ParticleEnsemble {
    std::vector<Particle> particles;
    double total_weight = 0.0;
    double time = 0.0;
};

struct WkbInitial {
    Envelope h;
    Phase S;
    // Optional analytic gradient of S; central differences otherwise.
    std::function<Vec3(const Vec3&)> grad_S;
    Vec3 centre{0.0, 0.0, 0.0};
    double extent = 3.0;  // half-width of the tabulation cube
    int bins = 128;
};

struct PointInitial {
    std::map<IVec3, cplx> psi0;
};

using InitialData = std::variant<WkbInitial, PointInitial>;

// Draws (x, k) from the limiting Wigner measure of the initial data.
class InitialSampler {
public:
    InitialSampler(const InitialData& init, const DispersionGrid& g);
    double mass() const { return mass_; }
    void draw(Stream& rng, Vec3& x, std::size_t& k) const;
    bool is_point() const { return point_; }

private:
    const DispersionGrid& g_;
    bool point_ = false;
    double mass_ = 0.0;
    // WKB tabulation
    WkbInitial wkb_;
    double lo_[3]{}, width_ = 0.0;
    int bins_ = 0;
    std::vector<double> cum_a_, cum_ab_, cum_abc_;
    // point state categorical law over grid indices
    std::vector<double> cum_k_;
};

// Limiting mass of the initial measure.
double initial_mass(const InitialData& init, const DispersionGrid& g);

ParticleEnsemble sample_initial(const InitialData& init, const DispersionGrid& g, std::size_t N, double total_mass,
                                std::uint64_t seed);

ParticleEnsemble simulate(const CollisionTable& t, const ParticleEnsemble& e, double t_final, std::uint64_t seed,
                          int workers = 1);

std::vector<WignerEstimate> characteristic_function(const ParticleEnsemble& e, const DispersionGrid& g,
                                                    const std::vector<Observable>& obs);

// Component (s1, s2) of the gate function at complex frequency w.
cplx gate_component(const DispersionGrid& g, const OmegaBuckets& b, double omega_k, cplx w, int s1, int s2);
cplx theta_plus(const DispersionGrid& g, const Vec3& k, double beta);
cplx theta_minus(const DispersionGrid& g, const Vec3& k, double beta);
cplx theta_plus(const DispersionGrid& g, const OmegaBuckets& b, double omega_k, double beta);
cplx theta_minus(const DispersionGrid& g, const OmegaBuckets& b, double omega_k, double beta);

// Simplex kernel K_N(t, w) via the one-dimensional recursion, N <= 6.
cplx k_simplex(double t, std::span<const cplx> w);

struct DysonResult {
    std::vector<WignerEstimate> estimates;
    double truncation_bound = 0.0;
    bool truncation_warning = false;
    std::string warning;
    std::size_t samples = 0;
    int m_max = 0;
};

DysonResult dyson_characteristic(const InitialData& init, const CollisionTable& t, double t_bar,
                                 const std::vector<Observable>& obs, int m_max, std::size_t n_mc, std::uint64_t seed,
                                 double tail_tolerance = 1e-3, int workers = 1);

void save_collision_table(const std::string& path, const CollisionTable& t, const std::string& config_hash);
// Returns false when the file is missing or its header does not match.
bool load_collision_table(const std::string& path, std::shared_ptr<const DispersionGrid> g, double beta, double xi2,
                          const std::string& config_hash, CollisionTable& out);

}  // namespace kinlim
