#include "catch_amalgamated.hpp"

#include "kinlim/kinetic.hpp"

using namespace kinlim;

namespace {

const cplx I(0.0, 1.0);

// Divided-difference closed form for pairwise distinct frequencies.
cplx partial_fractions(double t, const std::vector<cplx>& w) {
    cplx s = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        cplx term = std::exp(-I * t * w[l]);
        for (std::size_t m = 0; m < w.size(); ++m)
            if (m != l) term /= -I * (w[l] - w[m]);
        s += term;
    }
    return s;
}

}  // namespace

TEST_CASE("K1 is a plane wave") {
    for (double t : {0.0, 0.3, 2.0, 7.5})
        for (cplx w : {cplx(0.0), cplx(1.3), cplx(-2.0, 0.4)})
            CHECK(std::abs(k_simplex(t, std::vector<cplx>{w}) - std::exp(-I * t * w)) <= 1e-12);
}

TEST_CASE("equal frequencies collapse") {
    for (double t : {0.5, 1.0, 4.0}) {
        const cplx w(1.7, 0.0);
        CHECK(std::abs(k_simplex(t, std::vector<cplx>{w, w}) - t * std::exp(-I * t * w)) <= 1e-12);
        // K_3 at equal w is t^2/2 e^{-itw}.
        CHECK(std::abs(k_simplex(t, std::vector<cplx>{w, w, w}) - 0.5 * t * t * std::exp(-I * t * w)) <= 1e-12);
    }
}

TEST_CASE("distinct frequencies match partial fractions") {
    const std::vector<std::vector<cplx>> cases{
        {0.3, -1.1},
        {2.0, 0.5, -0.7},
        {1.0, -2.5, 0.2, 3.1},
        {cplx(1.0, 0.2), cplx(-0.5, 0.1), cplx(2.0, 0.3), cplx(0.1, 0.05), cplx(-1.7, 0.0)},
        {0.9, -0.3, 1.9, -2.2, 0.4, 2.8},
    };
    for (const auto& w : cases)
        for (double t : {0.4, 1.5, 3.0}) CHECK(std::abs(k_simplex(t, w) - partial_fractions(t, w)) <= 1e-10);
}

TEST_CASE("bound for real frequencies") {
    for (int N = 2; N <= 6; ++N) {
        std::vector<cplx> w;
        for (int j = 0; j < N; ++j) w.emplace_back(0.7 * j - 1.0, 0.0);
        for (double t : {0.5, 2.0, 5.0})
            CHECK(std::abs(k_simplex(t, w)) <= std::pow(t, N - 1) / std::tgamma(double(N)) * (1 + 1e-12));
    }
}

TEST_CASE("simplex kernel errors") {
    CHECK_THROWS_AS(k_simplex(1.0, std::vector<cplx>{}), InvalidParameter);
    CHECK_THROWS_AS(k_simplex(-1.0, std::vector<cplx>{1.0}), InvalidParameter);
    CHECK_THROWS_AS(k_simplex(1.0, std::vector<cplx>(7, cplx(1.0))), Unsupported);
    CHECK(k_simplex(0.0, std::vector<cplx>{1.0, 2.0}) == cplx(0.0));
}
