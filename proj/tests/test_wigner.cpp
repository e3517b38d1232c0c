#include "catch_amalgamated.hpp"

#include "kinlim/rng.hpp"
#include "kinlim/wigner.hpp"

using namespace kinlim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// With `compact`, the support stays away from the box edge so no lag wraps around.
WaveField random_wave(int L, double eps, std::uint64_t seed, bool compact = false) {
    const Lattice lat(couplings_nn(1.0), L);
    WaveField w = lat.zero_wave(eps);
    Stream rng(seed, 0);
    for (std::size_t i = 0; i < w.psi_plus.size(); ++i) {
        const IVec3 y = lat.coords(i);
        bool inside = true;
        for (int a = 0; a < 3; ++a) inside = inside && (y[a] < L / 4 || y[a] >= L - L / 4);
        if (compact && !inside) continue;
        w.psi_plus[i] = cplx(rng.normal(), rng.normal());
        w.psi_minus[i] = std::conj(w.psi_plus[i]);
    }
    return w;
}

Observable random_obs(Stream& rng) {
    Observable o;
    for (int a = 0; a < 3; ++a) {
        o.p[a] = 4.0 * rng.uniform() - 2.0;
        o.n[a] = int(rng.below(5)) - 2;
    }
    return o;
}

DisorderRunConfig small_run(double eps, std::size_t realizations, double t_bar) {
    DisorderRunConfig cfg;
    cfg.couplings = couplings_nn(1.0);
    cfg.L = 8;
    cfg.epsilon = eps;
    cfg.t_bar = t_bar;
    cfg.realizations = realizations;
    cfg.law = DisorderLaw::uniform;
    cfg.seed = 99;
    cfg.initial = random_wave(8, eps, 3);
    return cfg;
}

}  // namespace

TEST_CASE("F transform basics") {
    const WaveField w = random_wave(16, 0.25, 1, true);
    const cplx f00 = f_transform(w, 0.25, Observable{});
    CHECK_THAT(f00.real(), WithinRel(w.norm2_plus(), 1e-12));
    CHECK(std::abs(f00.imag()) <= 1e-12 * w.norm2_plus());
    Stream rng(2, 0);
    for (int i = 0; i < 50; ++i) {
        const Observable o = random_obs(rng);
        const cplx f = f_transform(w, 0.25, o);
        REQUIRE(std::abs(f) <= f00.real() * (1 + 1e-12));
        Observable m;
        m.p = -1.0 * o.p;
        m.n = {-o.n[0], -o.n[1], -o.n[2]};
        REQUIRE(std::abs(f_transform(w, 0.25, m) - std::conj(f)) <= 1e-10 * f00.real());
    }
}

TEST_CASE("F transform of point states") {
    const WaveField one = point_state({{{0, 0, 0}, cplx(1.0, 0.0)}}, 8);
    Stream rng(4, 0);
    for (int i = 0; i < 20; ++i) {
        const Observable o = random_obs(rng);
        const cplx expect = o.n == IVec3{0, 0, 0} ? 1.0 : 0.0;
        REQUIRE(std::abs(f_transform(one, 0.5, o) - expect) < 1e-14);
    }
    const cplx a(0.6, 0.2), b(-0.3, 0.7);
    const WaveField two = point_state({{{0, 0, 0}, a}, {{1, 0, 0}, b}}, 8);
    const double eps = 0.25;
    for (double p1 : {0.0, 0.7, -1.3}) {
        Observable o;
        o.p = {p1, 0.0, 0.0};
        o.n = {1, 0, 0};
        const double ph = -kTwoPi * eps * p1 * 0.5;
        const cplx expect = std::conj(a) * b * cplx(std::cos(ph), std::sin(ph));
        CHECK(std::abs(f_transform(two, eps, o) - expect) < 1e-14);
        o.n = {0, 0, 0};
        o.p = {0.0, 0.0, 0.0};
        CHECK_THAT(f_transform(two, eps, o).real(), WithinAbs(std::norm(a) + std::norm(b), 1e-14));
    }
}

TEST_CASE("energy density pairing") {
    const int L = 8;
    const Lattice lat(couplings_nn(1.0), L);
    Workspace ws(lat);
    const DisorderField xi = sample_disorder(L, DisorderLaw::uniform, 7);
    const LatticeState s = from_wavefunction(random_wave(L, 0.25, 5), xi, ws);
    const auto one = [](const Vec3&) { return 1.0; };
    CHECK_THAT(energy_density_pairing(s, xi, 0.25, one, ws), WithinRel(energy(s, xi, ws), 1e-12));
    CHECK(energy_density_pairing(lat.zero_state(0.25), xi, 0.25, one, ws) == 0.0);
    const auto dens = energy_density(s, xi, ws);
    double sum = 0.0;
    for (double d : dens) sum += d;
    CHECK_THAT(sum, WithinRel(energy(s, xi, ws), 1e-12));
}

TEST_CASE("pair test functions") {
    const WaveField w = random_wave(8, 0.25, 9);
    CHECK_THAT(pair_test_function(w, 0.25, {Mode{}}).real(), WithinRel(w.norm2_plus(), 1e-12));
    Mode m1, m2;
    m1.weight = cplx(0.5, -1.0);
    m1.obs.p = {0.3, 0.0, -1.0};
    m1.obs.n = {1, 0, 0};
    m2.weight = cplx(2.0, 0.25);
    m2.obs.p = {0.0, 1.5, 0.0};
    m2.obs.n = {0, -1, 2};
    const cplx both = pair_test_function(w, 0.25, {m1, m2});
    const cplx sep = pair_test_function(w, 0.25, {m1}) + pair_test_function(w, 0.25, {m2});
    CHECK(std::abs(both - sep) <= 1e-12 * w.norm2_plus());
}

TEST_CASE("disorder average") {
    const std::vector<Observable> obs{Observable{}, Observable{{0.5, 0.0, 0.0}, {1, 0, 0}}};
    // Mass positivity: sqrt(3) sqrt(eps) >= 1 is refused.
    CHECK_THROWS_AS(disorder_average(small_run(0.5, 4, 0.1), obs), ValidationError);
    // Zero time reproduces the initial F.
    const auto cfg0 = small_run(0.25, 4, 0.0);
    const auto r0 = disorder_average(cfg0, obs);
    for (std::size_t i = 0; i < obs.size(); ++i)
        CHECK(std::abs(r0.estimates[i].mean - f_transform(cfg0.initial, 0.25, obs[i])) <=
              1e-10 * cfg0.initial.norm2_plus());
    // Stderr shrinks like 1/sqrt(R).
    const auto a = disorder_average(small_run(0.25, 32, 0.5), obs);
    const auto b = disorder_average(small_run(0.25, 128, 0.5), obs);
    const double ratio = a.estimates[1].stderr_.real() / b.estimates[1].stderr_.real();
    CHECK(ratio > 1.4);
    CHECK(ratio < 2.9);
    CHECK(a.bound_violations == 0);
    CHECK(a.max_bound_ratio <= 1.0 + 1e-12);
    // Serial reruns are bitwise identical.
    const auto a2 = disorder_average(small_run(0.25, 32, 0.5), obs);
    CHECK(a2.estimates[1].mean == a.estimates[1].mean);
    CHECK(realization_seed(5, 1) != realization_seed(5, 2));
}
