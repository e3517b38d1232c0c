#include "catch_amalgamated.hpp"

#include "kinlim/dispersion.hpp"
#include "kinlim/rng.hpp"

using namespace kinlim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("nearest-neighbour couplings") {
    const Couplings c = couplings_nn(1.0);
    CHECK(c.value({0, 0, 0}) == 7.0);
    CHECK(c.value({1, 0, 0}) == -1.0);
    CHECK(c.value({0, 0, -1}) == -1.0);
    CHECK(c.value({1, 1, 0}) == 0.0);
    CHECK_THAT(c.symbol({0.5, 0.0, 0.0}), WithinAbs(5.0, 1e-13));
    for (double w0 : {0.5, 1.0, 2.5}) CHECK_THAT(couplings_nn(w0).symbol({0, 0, 0}), WithinAbs(w0 * w0, 1e-13));
    CHECK_THROWS_AS(couplings_nn(0.0), InvalidParameter);
}

TEST_CASE("squared couplings") {
    const Couplings c = couplings_nn_squared(1.0);
    CHECK(c.value({0, 0, 0}) == 55.0);
    CHECK(c.value({2, 0, 0}) == 1.0);
    const Couplings base = couplings_nn(1.0);
    Stream rng(3, 0);
    for (int i = 0; i < 50; ++i) {
        const Vec3 k{rng.uniform(), rng.uniform(), rng.uniform()};
        CHECK_THAT(c.symbol(k), WithinRel(std::pow(base.symbol(k), 2), 1e-12));
    }
}

TEST_CASE("coupling validation") {
    CHECK(validate_couplings(couplings_nn(1.0), 16).all_pass());
    Couplings onsite;
    onsite.entries[{0, 0, 0}] = 1.0;
    const auto v1 = validate_couplings(onsite, 16);
    CHECK_FALSE(v1.conditions[0].pass);
    Couplings asym;
    asym.entries[{0, 0, 0}] = 3.0;
    asym.entries[{1, 0, 0}] = 1.0;
    const auto v2 = validate_couplings(asym, 16);
    CHECK_FALSE(v2.conditions[1].pass);
    CHECK_THROWS_AS(build_dispersion(asym, 16), InvalidParameter);
    CHECK(validate_couplings(couplings_nn(1.0), 16).max_imag_relative <= 1e-12);
}

TEST_CASE("dispersion grid") {
    const DispersionGrid g = build_dispersion(couplings_nn(1.0), 16);
    CHECK(g.omega[g.index(0, 0, 0)] == 1.0);
    CHECK(g.omega[g.index(8, 8, 8)] == std::sqrt(13.0));
    CHECK(g.omega_min == 1.0);
    CHECK(g.omega_max == std::sqrt(13.0));
    CHECK(norm(g.grad_omega[g.index(0, 0, 0)]) == 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(g.omega[g.reflect(i)] == g.omega[i]);
    CHECK_THROWS_AS(build_dispersion(couplings_nn(1.0), 7), InvalidParameter);
}

TEST_CASE("analytic gradient matches central differences") {
    const int M = 64;
    const DispersionGrid g = build_dispersion(couplings_nn(1.0), M);
    Stream rng(9, 0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t idx = rng.below(g.size());
        const IVec3 m = g.coords(idx);
        for (int a = 0; a < 3; ++a) {
            IVec3 up = m, dn = m;
            ++up[a];
            --dn[a];
            const double fd =
                (g.omega[g.index(up[0], up[1], up[2])] - g.omega[g.index(dn[0], dn[1], dn[2])]) * M / 2.0;
            worst = std::max(worst, std::abs(fd - g.grad_omega[idx][a]));
        }
    }
    // O(h^2) with third derivatives of order (2 pi)^3.
    CHECK(worst <= 300.0 / (M * M));
}

TEST_CASE("critical points") {
    const DispersionGrid g = build_dispersion(couplings_nn(1.0), 32);
    const auto cps = find_critical_points(g, 1e-10);
    REQUIRE(cps.size() == 8);
    for (const auto& p : cps) {
        CHECK_FALSE(p.degenerate);
        for (double x : p.k) CHECK((std::abs(x) < 1e-9 || std::abs(x - 0.5) < 1e-9));
    }
    CHECK(cps.front().omega == 1.0);
    CHECK(cps.front().morse_index == 0);
    CHECK(cps.back().morse_index == 3);
}

TEST_CASE("decay exponent") {
    const DispersionGrid g = build_dispersion(couplings_nn(1.0), 64);
    const auto unit = [](const Vec3&) { return 1.0; };
    const DecayFit d = decay_exponent(g, unit, 5.0, 50.0, 40);
    CHECK(d.fit.slope >= -1.7);
    CHECK(d.fit.slope <= -1.3);
    const DecayFit again = decay_exponent(g, unit, 5.0, 50.0, 40);
    CHECK(again.fit.slope == d.fit.slope);
    CHECK(again.abs_phi == d.abs_phi);

    Couplings flat;
    flat.entries[{0, 0, 0}] = 1.0;
    const DispersionGrid c = build_dispersion_unchecked(flat, 16);
    const DecayFit dc = decay_exponent(c, unit, 1.0, 10.0, 10);
    CHECK_THAT(dc.fit.slope, WithinAbs(0.0, 1e-12));
    CHECK_THAT(dc.abs_phi.front(), WithinAbs(1.0, 1e-12));
    CHECK_THROWS_AS(decay_exponent(g, unit, 5.0, 5000.0, 40), ConfigError);
}

TEST_CASE("crossing estimate") {
    const DispersionGrid g = build_dispersion(couplings_nn(1.0), 16);
    const Vec3 alpha{0.3, 0.1, 0.7}, u{0.2, 0.4, 0.1};
    const CrossingEstimate e = crossing_integral_estimate(g, alpha, 1.0, {1, -1, 1}, u, 20000, 7);
    CHECK(e.estimate <= 1.0);
    CHECK(e.estimate > 0.0);
    const CrossingEstimate e2 = crossing_integral_estimate(g, alpha, 1.0, {1, -1, 1}, u, 20000, 7);
    CHECK(e2.estimate == e.estimate);
    CHECK_THROWS_AS(crossing_integral_estimate(g, alpha, 0.0, {1, 1, 1}, u, 20000, 7), InvalidParameter);
    CHECK_THROWS_AS(crossing_integral_estimate(g, alpha, 0.5, {1, 0, 1}, u, 20000, 7), InvalidParameter);
    const CrossingSweep s = crossing_sweep(g, alpha, {0.4, 0.2, 0.1, 0.05}, {1, 1, 1}, u, 20000, 5);
    CHECK(s.fit.slope > -1.0);
}
