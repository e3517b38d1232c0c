#include "catch_amalgamated.hpp"

#include "kinlim/lattice.hpp"
#include "kinlim/rng.hpp"

using namespace kinlim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

WaveField random_wave(const Lattice& lat, std::uint64_t seed) {
    WaveField w = lat.zero_wave(1.0);
    Stream rng(seed, 0);
    for (std::size_t i = 0; i < w.psi_plus.size(); ++i) {
        w.psi_plus[i] = cplx(rng.normal(), rng.normal());
        w.psi_minus[i] = std::conj(w.psi_plus[i]);
    }
    return w;
}

double max_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST_CASE("disorder sampling") {
    const DisorderField u = sample_disorder(64, DisorderLaw::uniform, 17);
    double mean = 0.0;
    for (double x : u.xi) {
        REQUIRE(std::abs(x) <= u.xi_bar);
        mean += x;
    }
    mean /= double(u.xi.size());
    CHECK(std::abs(mean) <= 4.0 / std::sqrt(64.0 * 64 * 64));
    CHECK(sample_disorder(64, DisorderLaw::uniform, 17).xi == u.xi);
    const DisorderField r = sample_disorder(8, DisorderLaw::rademacher, 3);
    for (double x : r.xi) CHECK(std::abs(x) == 1.0);
    CHECK_THROWS_AS(check_mass_positivity(std::sqrt(3.0), 0.5), ValidationError);
    CHECK_NOTHROW(check_mass_positivity(std::sqrt(3.0), 0.25));
}

TEST_CASE("energy") {
    const int L = 8;
    const Lattice lat(couplings_nn(1.0), L);
    const DisorderField xi = zero_disorder(L);
    CHECK(energy(lat.zero_state(1.0), xi, lat) == 0.0);
    // Single cosine mode against the direct double sum.
    const Vec3 k0{1.0 / 8, 2.0 / 8, 0.0};
    LatticeState s = lat.zero_state(1.0);
    for (std::size_t i = 0; i < lat.sites(); ++i) s.q[i] = std::cos(kTwoPi * dot(k0, to_vec(lat.coords(i))));
    double direct = 0.0;
    const Couplings& c = lat.couplings();
    for (std::size_t i = 0; i < lat.sites(); ++i)
        for (const auto& [off, a] : c.entries) {
            const IVec3 y = lat.coords(i);
            const std::size_t j = lat.site({wrap(y[0] + off[0], L), wrap(y[1] + off[1], L), wrap(y[2] + off[2], L)});
            direct += 0.5 * s.q[i] * a * s.q[j];
        }
    const double E = energy(s, xi, lat);
    CHECK_THAT(E, WithinRel(direct, 1e-12));
    CHECK_THAT(E, WithinRel(0.5 * c.symbol(k0) * L * L * L / 2.0, 1e-12));
}

TEST_CASE("wave field conversion") {
    const int L = 8;
    const Lattice lat(couplings_nn(1.0), L);
    Workspace ws(lat);
    const DisorderField xi = sample_disorder(L, DisorderLaw::uniform, 5);
    Stream rng(21, 0);
    LatticeState s = lat.zero_state(0.25);
    for (std::size_t i = 0; i < lat.sites(); ++i) {
        s.q[i] = rng.normal();
        s.v[i] = rng.normal();
    }
    const WaveField w = to_wavefunction(s, xi, ws);
    for (std::size_t i = 0; i < w.psi_plus.size(); ++i) REQUIRE(w.psi_minus[i] == std::conj(w.psi_plus[i]));
    CHECK_THAT(w.norm2(), WithinRel(energy(s, xi, ws), 1e-10));
    // v = 0 gives psi_+ = psi_- = Omega q / 2.
    LatticeState s0 = s;
    std::fill(s0.v.begin(), s0.v.end(), 0.0);
    const WaveField w0 = to_wavefunction(s0, xi, ws);
    std::vector<double> oq(lat.sites());
    ws.omega_apply(s0.q.data(), oq.data());
    for (std::size_t i = 0; i < oq.size(); ++i) {
        REQUIRE(std::abs(w0.psi_plus[i] - cplx(0.5 * oq[i], 0.0)) < 1e-12);
        REQUIRE(w0.psi_plus[i] == w0.psi_minus[i]);
    }
    // Exact coupling inverts the disorder-dependent map.
    const LatticeState back = from_wavefunction(w, xi, ws);
    for (std::size_t i = 0; i < lat.sites(); ++i) REQUIRE(std::abs(back.v[i] - s.v[i]) < 1e-10);
}

TEST_CASE("round trip at zero disorder") {
    const Lattice lat(couplings_nn(1.0), 8);
    Workspace ws(lat);
    const DisorderField xi = zero_disorder(8);
    const WaveField w = random_wave(lat, 4);
    const LatticeState s = from_wavefunction(w, ws);
    const WaveField back = to_wavefunction(s, xi, ws);
    CHECK(max_diff(back.psi_plus, w.psi_plus) <= 1e-10);
    CHECK_THAT(energy(s, xi, ws), WithinRel(w.norm2(), 1e-10));
    WaveField real = w;
    for (auto& z : real.psi_plus) z = z.real();
    real.psi_minus = real.psi_plus;
    const LatticeState sr = from_wavefunction(real, ws);
    for (double v : sr.v) REQUIRE(std::abs(v) < 1e-14);
}

TEST_CASE("spectral free evolution") {
    const Lattice lat(couplings_nn(1.0), 8);
    Workspace ws(lat);
    const WaveField w = random_wave(lat, 6);
    const WaveField a = evolve_free_spectral(w, ws, 1.3);
    CHECK_THAT(a.norm2(), WithinRel(w.norm2(), 1e-12));
    const WaveField b = evolve_free_spectral(evolve_free_spectral(w, ws, 0.4), ws, 0.9);
    CHECK(max_diff(a.psi_plus, b.psi_plus) <= 1e-12 * std::sqrt(w.norm2()));
    for (std::size_t i = 0; i < a.psi_plus.size(); ++i) REQUIRE(std::abs(a.psi_minus[i] - std::conj(a.psi_plus[i])) < 1e-12);
}

TEST_CASE("Verlet evolution") {
    const int L = 8;
    const Lattice lat(couplings_nn(1.0), L);
    Workspace ws(lat);
    const DisorderField none = zero_disorder(L);
    const WaveField w = random_wave(lat, 8);
    const LatticeState s0 = from_wavefunction(w, ws);
    const LatticeState same = evolve(s0, none, lat, 1.0, 0.01, 0.0);
    CHECK(same.q == s0.q);
    CHECK(same.v == s0.v);
    // Second order: Richardson extrapolation approaches the spectral solution.
    const double T = 2.0;
    const WaveField exact = evolve_free_spectral(w, ws, T);
    auto err = [&](double dt) {
        const LatticeState s = evolve(s0, none, lat, 1.0, dt, T);
        return max_diff(to_wavefunction(s, none, ws).psi_plus, exact.psi_plus);
    };
    const double e1 = err(0.02), e2 = err(0.01);
    CHECK_THAT(e1 / e2, WithinAbs(4.0, 0.3));
    // Reality constraint and energy with disorder.
    const DisorderField xi = sample_disorder(L, DisorderLaw::rademacher, 2);
    WaveField wd = w;
    wd.epsilon = 0.25;
    LatticeState s = from_wavefunction(wd, xi, ws);
    s.epsilon = 0.25;
    const double E0 = energy(s, xi, ws);
    VerletIntegrator integ(ws, xi, 0.25);
    integ.advance(s, integ.default_dt(), 20.0);
    CHECK(std::abs(energy(s, xi, ws) - E0) / E0 <= 1e-4);
    const WaveField wt = to_wavefunction(s, xi, ws);
    for (std::size_t i = 0; i < wt.psi_plus.size(); ++i) REQUIRE(wt.psi_minus[i] == std::conj(wt.psi_plus[i]));
    CHECK_THROWS(integ.check_dt(10.0));
}

TEST_CASE("WKB and point states") {
    const double s = 1.0;
    const Envelope h = [&](const Vec3& x) { return cplx(std::pow(std::numbers::pi * s * s, -0.75) * std::exp(-dot(x, x) / (2 * s * s)), 0.0); };
    const Phase zero = [](const Vec3&) { return 0.0; };
    const WkbResult a = wkb_state(h, zero, 0.25, 48);
    const WkbResult b = wkb_state(h, zero, 0.125, 96);
    // eps^3 sum |h(eps y)|^2 approaches the unit mass.
    CHECK_THAT(a.psi.norm2_plus(), WithinAbs(1.0, 1e-6));
    CHECK_THAT(b.psi.norm2_plus(), WithinAbs(1.0, 1e-6));
    for (const auto& z : a.psi.psi_plus) {
        REQUIRE(z.imag() == 0.0);
        REQUIRE(z.real() >= 0.0);
    }
    const WaveField p = point_state({{{0, 0, 0}, cplx(1.0, 0.0)}}, 8);
    CHECK(p.norm2_plus() == 1.0);
    CHECK_THROWS(point_state({{{9, 0, 0}, cplx(1.0, 0.0)}}, 8));
}
