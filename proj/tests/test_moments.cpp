#include "catch_amalgamated.hpp"

#include "kinlim/moments.hpp"

using namespace kinlim;
using Catch::Matchers::WithinAbs;

TEST_CASE("partition counts") {
    CHECK(enumerate_partitions(1).size() == 1);
    CHECK(enumerate_partitions(4).size() == 15);
    for (int n = 1; n <= 10; ++n) CHECK(enumerate_partitions(n).size() == bell_number(n));
    CHECK(bell_number(10) == 115975);
    CHECK_THROWS_AS(enumerate_partitions(11), InvalidParameter);
}

TEST_CASE("partitions of four with all blocks of size at least two") {
    int count = 0;
    for (const auto& p : enumerate_partitions(4)) {
        bool ok = true;
        for (const auto& b : p.blocks) ok = ok && b.size() >= 2;
        count += ok;
    }
    CHECK(count == 4);
}

TEST_CASE("exact cumulants") {
    for (auto law : {DisorderLaw::uniform, DisorderLaw::rademacher}) {
        const auto c = cumulants_of(law, 10);
        CHECK(c.exact[1] == 0);
        CHECK(c.exact[2] == 1);
        CHECK(c.exact[3] == 0);
    }
    CHECK(cumulants_of(DisorderLaw::uniform, 4).exact[4] == Rational(-6, 5));
    CHECK(cumulants_of(DisorderLaw::rademacher, 4).exact[4] == Rational(-2));
    CHECK_THROWS_AS(cumulants_of(DisorderLaw::none, 4), InvalidParameter);
    CHECK_THROWS_AS(cumulants_of(DisorderLaw::uniform, 11), InvalidParameter);
}

TEST_CASE("moments from partitions") {
    const auto cu = cumulants_of(DisorderLaw::uniform, 10);
    const IVec3 a{0, 0, 0}, b{1, 0, 0}, c{3, -2, 5};
    CHECK_THAT(moment_via_partitions({a, a}, cu), WithinAbs(1.0, 1e-15));
    CHECK_THAT(moment_via_partitions({a, b}, cu), WithinAbs(0.0, 1e-15));
    CHECK_THAT(moment_via_partitions({a, a, a, a}, cu), WithinAbs(cu(4) + 3.0, 1e-14));
    CHECK_THAT(moment_via_partitions({a, a, a, a}, cu), WithinAbs(9.0 / 5.0, 1e-14));
    // Only the coincidence pattern matters.
    CHECK(moment_via_partitions({a, b, a, b}, cu) == moment_via_partitions({c, a, c, a}, cu));
    // A site appearing once forces zero.
    CHECK_THAT(moment_via_partitions({a, a, a, b}, cu), WithinAbs(0.0, 1e-15));
    // Sixth moment of the uniform law: 27/7.
    CHECK_THAT(moment_via_partitions({a, a, a, a, a, a}, cu), WithinAbs(27.0 / 7.0, 1e-13));
}

TEST_CASE("Monte Carlo moment checks") {
    const IVec3 a{0, 0, 0}, b{0, 1, 0};
    const auto m4 = verify_moment_mc({a, a, a, a}, DisorderLaw::uniform, 1000000, 1);
    CHECK_THAT(m4.formula, WithinAbs(1.8, 1e-14));
    CHECK(std::abs(m4.z) <= 3.0);
    const auto m3 = verify_moment_mc({a, a, a}, DisorderLaw::uniform, 200000, 2);
    CHECK(m3.formula == 0.0);
    CHECK(std::abs(m3.z) <= 3.0);
    const auto m22 = verify_moment_mc({a, a, b, b}, DisorderLaw::uniform, 200000, 3);
    CHECK_THAT(m22.formula, WithinAbs(1.0, 1e-14));
    CHECK(std::abs(m22.z) <= 3.0);
    CHECK_THROWS_AS(verify_moment_mc({a, a}, DisorderLaw::uniform, 100, 4), InvalidParameter);
    // Deterministic given the seed.
    CHECK(verify_moment_mc({a, a}, DisorderLaw::uniform, 20000, 5).mc ==
          verify_moment_mc({a, a}, DisorderLaw::uniform, 20000, 5).mc);
}

TEST_CASE("cumulant bound") {
    for (auto law : {DisorderLaw::uniform, DisorderLaw::rademacher}) {
        const auto rep = check_cumulant_bound(cumulants_of(law, 10));
        CHECK(rep.all_pass());
        CHECK(rep.rows.front().n == 3);
        CHECK(rep.rows.back().n == 10);
    }
    const auto u = check_cumulant_bound(cumulants_of(DisorderLaw::uniform, 4));
    CHECK_THAT(u.rows.back().bound, WithinAbs(3.0 * 9.0 * 24.0, 1e-9));
    const auto r = check_cumulant_bound(cumulants_of(DisorderLaw::rademacher, 4));
    CHECK_THAT(r.rows.back().bound, WithinAbs(72.0, 1e-12));
}
