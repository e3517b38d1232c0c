#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kinlim/core.hpp"
#include "kinlim/lattice.hpp"

namespace kinlim {

using Rational = boost::multiprecision::cpp_rational;

struct Partition {
    std::vector<std::vector<int>> blocks;  // indices 0..N-1, blocks sorted by minimum
};

// Restricted-growth strings in lexicographic order; fn(rgs, block_count).
void for_each_partition(int N, const std::function<void(const std::vector<int>&, int)>& fn);
std::vector<Partition> enumerate_partitions(int N);

// Bell numbers by the Bell-triangle recurrence, independent of the enumeration.
std::uint64_t bell_number(int n);

struct CumulantVector {
    DisorderLaw law = DisorderLaw::none;
    double xi_bar = 0.0;
    std::vector<Rational> exact;  // exact[n] = C_n, exact[0] unused
    std::vector<double> C;        // double copies of exact

    int n_max() const { return int(C.size()) - 1; }
    double operator()(int n) const { return C.at(std::size_t(n)); }
};

// Exact moments m_0..m_nmax of a unit-variance law.
std::vector<Rational> exact_moments(DisorderLaw law, int n_max);
CumulantVector cumulants_of(DisorderLaw law, int n_max);

// E[prod_l xi_{i_l}] = sum_partitions prod_blocks C_|A| 1(block sites coincide).
double moment_via_partitions(const std::vector<IVec3>& sites, const CumulantVector& cum);

struct MomentCheck {
    double mc = 0.0;
    double stderr_ = 0.0;
    double formula = 0.0;
    double z = 0.0;
    std::size_t samples = 0;
};

MomentCheck verify_moment_mc(const std::vector<IVec3>& sites, DisorderLaw law, std::size_t n_samples,
                             std::uint64_t seed, int workers = 1);

struct CumulantBoundRow {
    int n = 0;
    double value = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct CumulantBoundReport {
    std::vector<CumulantBoundRow> rows;
    bool all_pass() const;
};

// |C_n| <= 3 xi_bar^n n! for 2 < n <= n_max.
CumulantBoundReport check_cumulant_bound(const CumulantVector& cum);

std::string to_string(const Rational& r);

}  // namespace kinlim
