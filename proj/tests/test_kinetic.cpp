#include "catch_amalgamated.hpp"

#include <cstdio>

#include "kinlim/kinetic.hpp"
#include "kinlim/stats.hpp"

using namespace kinlim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::shared_ptr<const DispersionGrid> grid(int M) {
    return std::make_shared<const DispersionGrid>(build_dispersion(couplings_nn(1.0), M));
}

WkbInitial gaussian_wkb(double s, const Vec3& k0) {
    WkbInitial w;
    w.h = [s](const Vec3& x) { return cplx(std::pow(std::numbers::pi * s * s, -0.75) * std::exp(-dot(x, x) / (2 * s * s)), 0.0); };
    w.S = [k0](const Vec3& x) { return kTwoPi * dot(k0, x); };
    w.extent = 6.0 * s;
    return w;
}

double normal_cdf(double x, double sd) { return 0.5 * std::erfc(-x / (sd * std::sqrt(2.0))); }

}  // namespace

TEST_CASE("collision table") {
    const auto g = grid(16);
    const double beta = 0.2;
    const CollisionTable t = build_collision_table(g, beta, 1.0);
    CHECK(t.sigma_max <= 2.0 * g->omega_max * g->omega_max / beta);
    CHECK(t.sigma_min > 0.0);
    Stream rng(1, 0);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t k = rng.below(g->size()), kp = rng.below(g->size());
        const double a = g->omega[k] * g->omega[k] * t.kernel(k, kp);
        const double b = g->omega[kp] * g->omega[kp] * t.kernel(kp, k);
        REQUIRE(std::abs(a - b) <= 1e-12 * std::max(a, b));
    }
    // sigma is the row sum of the kernel.
    const std::size_t k = g->index(3, 1, 5);
    double row = 0.0;
    for (std::size_t kp = 0; kp < g->size(); ++kp) row += t.kernel(k, kp);
    CHECK_THAT(t.sigma[k], WithinRel(row / double(g->size()), 1e-10));
    const CollisionTable t2 = build_collision_table(g, beta, 0.5);
    CHECK_THAT(t2.sigma[k], WithinRel(0.5 * t.sigma[k], 1e-12));
    CHECK_THROWS_AS(build_collision_table(g, 0.0, 1.0), InvalidParameter);
    const double db = default_beta(*g);
    CHECK(db > 0.0);
    CHECK(db <= 1.0);
}

TEST_CASE("sigma stabilizes under beta halving") {
    const auto g = grid(48);
    std::vector<double> vals;
    const std::size_t k = g->index(5, 11, 2);
    for (double beta : {0.2, 0.1, 0.05}) vals.push_back(build_collision_table(g, beta, 1.0).sigma[k]);
    CHECK(std::abs(vals[2] - vals[1]) < std::abs(vals[1] - vals[0]));
}

TEST_CASE("jump sampler") {
    const auto g = grid(8);
    const CollisionTable t = build_collision_table(g, 0.25, 1.0);
    const std::size_t k = g->index(1, 2, 0);
    const std::size_t n = g->size();
    std::vector<double> p(n), counts(n, 0.0);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += p[j] = t.jump_weight(k, j);
    Stream rng(2, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) counts[sample_jump(t, k, rng)] += 1.0;
    double chi2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double e = draws * p[j] / z;
        chi2 += (counts[j] - e) * (counts[j] - e) / e;
    }
    // Every expected count exceeds 5 on this grid.
    CHECK(chi_square_sf(chi2, double(n - 1)) > 0.01);
    Stream a(3, 0), b(3, 0);
    for (int i = 0; i < 100; ++i) REQUIRE(sample_jump(t, k, a) == sample_jump(t, k, b));
}

TEST_CASE("jumps concentrate on the energy shell as beta shrinks") {
    const auto g = grid(32);
    const std::size_t k = g->index(3, 5, 1);
    std::vector<double> means;
    for (double beta : {0.4, 0.2, 0.1}) {
        const CollisionTable t = build_collision_table(g, beta, 1.0);
        Stream rng(4, 0);
        double m = 0.0;
        for (int i = 0; i < 20000; ++i) m += std::abs(g->omega[sample_jump(t, k, rng)] - g->omega[k]);
        means.push_back(m / 20000);
    }
    CHECK(means[1] < means[0]);
    CHECK(means[2] < means[1]);
}

TEST_CASE("initial sampling") {
    const auto g = grid(32);
    const Vec3 k0{0.25, 0.125, 0.0};
    const double s = 0.5;
    const ParticleEnsemble e = sample_initial(gaussian_wkb(s, k0), *g, 20000, 0.0, 5);
    CHECK_THAT(e.total_weight, WithinAbs(1.0, 1e-3));
    const std::size_t kk = g->nearest(k0);
    for (const auto& p : e.particles) REQUIRE(p.k == kk);
    // x-marginal of |h|^2 is normal with standard deviation s / sqrt(2).
    for (int a = 0; a < 3; ++a) {
        std::vector<double> xs;
        for (const auto& p : e.particles) xs.push_back(p.x[a]);
        const double d = ks_statistic(xs, [&](double x) { return normal_cdf(x, s / std::sqrt(2.0)); });
        CHECK(kolmogorov_sf(d, xs.size()) > 0.01);
    }
    // Point data sits at x = 0, with the lag-one autocorrelation in k.
    const cplx a(0.6, 0.0), b(0.0, 0.8);
    PointInitial pt;
    pt.psi0 = {{{0, 0, 0}, a}, {{1, 0, 0}, b}};
    const ParticleEnsemble ep = sample_initial(pt, *g, 50000, 0.0, 6);
    for (const auto& p : ep.particles) REQUIRE(p.x == Vec3{0.0, 0.0, 0.0});
    CHECK_THAT(ep.total_weight, WithinAbs(1.0, 1e-12));
    const auto f = characteristic_function(ep, *g, {Observable{{0, 0, 0}, {1, 0, 0}}});
    CHECK_THAT(std::abs(f[0].mean), WithinAbs(std::abs(a * b), 4.0 * std::abs(f[0].stderr_)));
}

TEST_CASE("simulate") {
    const auto g = grid(16);
    const ParticleEnsemble e0 = sample_initial(gaussian_wkb(0.5, {0.2, 0.1, 0.0}), *g, 4000, 1.0, 7);
    // Collisionless: exact free transport.
    const CollisionTable free = build_collision_table(g, 0.2, 0.0);
    const ParticleEnsemble ef = simulate(free, e0, 2.0, 8);
    for (std::size_t j = 0; j < ef.particles.size(); ++j) {
        const auto& p0 = e0.particles[j];
        const auto& p1 = ef.particles[j];
        REQUIRE(p1.k == p0.k);
        const Vec3 expect = p0.x + (2.0 / kTwoPi) * g->grad_omega[p0.k];
        REQUIRE(norm(p1.x - expect) < 1e-12);
    }
    const CollisionTable t = build_collision_table(g, 0.2, 1.0);
    const double tf = 0.05;
    const ParticleEnsemble et = simulate(t, e0, tf, 9);
    CHECK(et.total_weight == e0.total_weight);
    // Survival without collisions is exp(-sigma(k0) t).
    const double p_none = std::exp(-t.sigma[e0.particles[0].k] * tf);
    double none = 0.0;
    for (const auto& p : et.particles) none += p.collisions == 0;
    const double n = double(et.particles.size());
    CHECK_THAT(none / n, WithinAbs(p_none, 4.0 * std::sqrt(p_none * (1 - p_none) / n)));
    const ParticleEnsemble again = simulate(t, e0, tf, 9);
    CHECK(again.particles[17].x == et.particles[17].x);
}

TEST_CASE("characteristic function") {
    const auto g = grid(16);
    ParticleEnsemble e;
    const std::size_t k = g->index(3, 2, 5);
    for (int i = 0; i < 12; ++i) e.particles.push_back({{0.0, 0.0, 0.0}, std::uint32_t(k), 0, 0.25});
    e.total_weight = 3.0;
    const Observable n1{{0, 0, 0}, {1, -2, 1}};
    const auto f = characteristic_function(e, *g, {Observable{}, n1});
    CHECK(f[0].mean == cplx(3.0, 0.0));
    const double ph = kTwoPi * dot(to_vec(n1.n), g->k(k));
    CHECK(std::abs(f[1].mean - 3.0 * cplx(std::cos(ph), std::sin(ph))) < 1e-12);
}

TEST_CASE("gate function") {
    const auto g = grid(24);
    const OmegaBuckets b = group_by_omega(*g);
    for (std::size_t k : {g->index(0, 0, 0), g->index(3, 7, 1), g->index(12, 12, 12)}) {
        const double w = g->omega[k];
        const cplx tp = theta_plus(*g, b, w, 0.1), tm = theta_minus(*g, b, w, 0.1);
        CHECK(std::abs(tm - std::conj(tp)) <= 1e-12 * std::abs(tp));
        CHECK(std::abs(theta_plus(*g, g->k(k), 0.1) - tp) <= 1e-12 * std::abs(tp));
    }
}

TEST_CASE("Dyson solver") {
    const auto g = grid(16);
    const CollisionTable t = build_collision_table(g, 0.2, 0.05);
    const WkbInitial init = gaussian_wkb(0.5, {0.2, 0.0, 0.0});
    const std::vector<Observable> obs{Observable{}, Observable{{0.5, 0.0, 0.0}, {1, 0, 0}}};
    const double tb = 0.5;
    const DysonResult d = dyson_characteristic(init, t, tb, obs, 8, 20000, 10);
    CHECK(!d.truncation_warning);
    CHECK_THAT(d.estimates[0].mean.real(), WithinAbs(1.0, 4.0 * d.estimates[0].stderr_.real() + 1e-3));
    // Zeroth order is the free decay term, estimated here from the initial ensemble.
    const DysonResult d0 = dyson_characteristic(init, t, tb, obs, 0, 20000, 11);
    const ParticleEnsemble e0 = sample_initial(init, *g, 20000, 0.0, 12);
    ComplexStats direct;
    for (const auto& p : e0.particles) {
        const double ph = -tb * dot(obs[1].p, g->grad_omega[p.k]) - kTwoPi * (dot(obs[1].p, p.x) - dot(to_vec(obs[1].n), g->k(p.k)));
        direct.add(e0.total_weight * std::exp(-tb * t.sigma[p.k]) * cplx(std::cos(ph), std::sin(ph)));
    }
    const double se = std::abs(d0.estimates[1].stderr_) + std::abs(direct.stderr_mean());
    CHECK(std::abs(d0.estimates[1].mean - direct.mean()) <= 4.0 * se);
    // Against the jump process.
    const ParticleEnsemble et = simulate(t, sample_initial(init, *g, 40000, 0.0, 13), tb, 14);
    const auto jump = characteristic_function(et, *g, obs);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double s2 = std::sqrt(std::norm(jump[i].stderr_) + std::norm(d.estimates[i].stderr_));
        CHECK(std::abs(jump[i].mean - d.estimates[i].mean) <= 4.0 * s2 + 1e-12);
    }
    CHECK_THROWS_AS(dyson_characteristic(init, t, tb, obs, 9, 20000, 10), InvalidParameter);
}

TEST_CASE("collision table persistence") {
    const auto g = grid(16);
    const CollisionTable t = build_collision_table(g, 0.2, 0.7);
    const std::string path = "test_kinetic_table.bin";
    save_collision_table(path, t, "abc");
    CollisionTable back;
    REQUIRE(load_collision_table(path, g, 0.2, 0.7, "abc", back));
    CHECK(back.sigma == t.sigma);
    CHECK(back.rejection_cap == t.rejection_cap);
    CHECK_FALSE(load_collision_table(path, g, 0.2, 0.7, "other", back));
    CHECK_FALSE(load_collision_table(path, g, 0.1, 0.7, "abc", back));
    CHECK_FALSE(load_collision_table("does_not_exist.bin", g, 0.2, 0.7, "abc", back));
    std::remove(path.c_str());
}
