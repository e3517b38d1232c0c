#include "kinlim/moments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "kinlim/parallel.hpp"
#include "kinlim/rng.hpp"
#include "kinlim/stats.hpp"

namespace kinlim {

namespace {

void check_partition_size(int N) {
    if (N < 1 || N > 10) throw InvalidParameter("partition size N must lie in [1, 10]");
}

}  // namespace

void for_each_partition(int N, const std::function<void(const std::vector<int>&, int)>& fn) {
    check_partition_size(N);
    // a[i] is the block of index i; m[i] = max(a[0..i-1]) + 1 bounds a[i].
    std::vector<int> a(std::size_t(N), 0), m(std::size_t(N), 1);
    for (;;) {
        fn(a, m[std::size_t(N - 1)] > a[std::size_t(N - 1)] ? m[std::size_t(N - 1)] : a[std::size_t(N - 1)] + 1);
        int i = N - 1;
        while (i > 0 && a[std::size_t(i)] == m[std::size_t(i)]) --i;
        if (i == 0) return;
        ++a[std::size_t(i)];
        for (int j = i + 1; j < N; ++j) {
            a[std::size_t(j)] = 0;
            m[std::size_t(j)] = std::max(m[std::size_t(j - 1)], a[std::size_t(j - 1)] + 1);
        }
    }
}

std::vector<Partition> enumerate_partitions(int N) {
    std::vector<Partition> out;
    for_each_partition(N, [&](const std::vector<int>& a, int blocks) {
        Partition p;
        p.blocks.resize(std::size_t(blocks));
        for (int i = 0; i < N; ++i) p.blocks[std::size_t(a[std::size_t(i)])].push_back(i);
        out.push_back(std::move(p));
    });
    return out;
}

std::uint64_t bell_number(int n) {
    if (n < 0 || n > 25) throw InvalidParameter("bell_number supports 0 <= n <= 25");
    if (n == 0) return 1;
    std::vector<std::uint64_t> row{1};
    for (int i = 1; i < n; ++i) {
        std::vector<std::uint64_t> next{row.back()};
        for (auto x : row) next.push_back(next.back() + x);
        row = std::move(next);
    }
    return row.back();
}

std::string to_string(const Rational& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

std::vector<Rational> exact_moments(DisorderLaw law, int n_max) {
    std::vector<Rational> m(std::size_t(n_max) + 1, Rational(0));
    m[0] = 1;
    for (int n = 2; n <= n_max; n += 2) {
        const int j = n / 2;
        switch (law) {
            case DisorderLaw::uniform: {
                // Uniform on [-sqrt3, sqrt3]: m_2j = 3^j / (2j+1).
                boost::multiprecision::cpp_int p = 1;
                for (int i = 0; i < j; ++i) p *= 3;
                m[std::size_t(n)] = Rational(p, 2 * j + 1);
                break;
            }
            case DisorderLaw::rademacher:
                m[std::size_t(n)] = 1;
                break;
            default:
                throw InvalidParameter("cumulants need a uniform or rademacher law");
        }
    }
    return m;
}

CumulantVector cumulants_of(DisorderLaw law, int n_max) {
    if (n_max < 1 || n_max > 10) throw InvalidParameter("cumulant order n_max must lie in [1, 10]");
    if (law != DisorderLaw::uniform && law != DisorderLaw::rademacher)
        throw InvalidParameter("unsupported disorder law for cumulants: " + to_string(law));
    const auto m = exact_moments(law, n_max);
    // m_n = sum_{k=1}^{n} binom(n-1, k-1) C_k m_{n-k}
    std::vector<Rational> c(std::size_t(n_max) + 1, Rational(0));
    for (int n = 1; n <= n_max; ++n) {
        Rational s = m[std::size_t(n)];
        boost::multiprecision::cpp_int binom = 1;  // binom(n-1, k-1)
        for (int k = 1; k < n; ++k) {
            s -= Rational(binom) * c[std::size_t(k)] * m[std::size_t(n - k)];
            binom = binom * (n - k) / k;
        }
        c[std::size_t(n)] = s;
    }
    CumulantVector out;
    out.law = law;
    out.xi_bar = law_bound(law);
    out.exact = c;
    out.C.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out.C[i] = static_cast<double>(c[i]);
    return out;
}

double moment_via_partitions(const std::vector<IVec3>& sites, const CumulantVector& cum) {
    const int N = int(sites.size());
    check_partition_size(N);
    if (cum.n_max() < N) throw InvalidParameter("cumulant vector too short for this index map");
    // Relabel sites by first occurrence so only the coincidence pattern matters.
    std::map<IVec3, int> label;
    std::vector<int> s(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) s[std::size_t(i)] = label.try_emplace(sites[std::size_t(i)], int(label.size())).first->second;
    double total = 0.0;
    std::vector<int> site_of(static_cast<std::size_t>(N)), size(static_cast<std::size_t>(N));
    for_each_partition(N, [&](const std::vector<int>& a, int blocks) {
        std::fill(size.begin(), size.begin() + blocks, 0);
        std::fill(site_of.begin(), site_of.begin() + blocks, -1);
        for (int i = 0; i < N; ++i) {
            const auto b = std::size_t(a[std::size_t(i)]);
            if (site_of[b] < 0) site_of[b] = s[std::size_t(i)];
            else if (site_of[b] != s[std::size_t(i)]) return;
            ++size[b];
        }
        double prod = 1.0;
        for (int b = 0; b < blocks; ++b) prod *= cum(size[std::size_t(b)]);
        total += prod;
    });
    return total;
}

MomentCheck verify_moment_mc(const std::vector<IVec3>& sites, DisorderLaw law, std::size_t n_samples,
                             std::uint64_t seed, int workers) {
    if (n_samples < 10000) throw InvalidParameter("moment verification needs at least 1e4 samples");
    const auto cum = cumulants_of(law, std::max<int>(2, int(sites.size())));
    MomentCheck r;
    r.formula = moment_via_partitions(sites, cum);
    std::map<IVec3, int> label;
    std::vector<int> power;
    for (const auto& y : sites) {
        auto [it, fresh] = label.try_emplace(y, int(label.size()));
        if (fresh) power.push_back(0);
        ++power[std::size_t(it->second)];
    }
    constexpr std::size_t kBatch = 1 << 16;
    const std::size_t batches = (n_samples + kBatch - 1) / kBatch;
    std::vector<RunningStats> parts(batches);
    const double sq3 = std::sqrt(3.0);
    parallel_for(batches, workers, [&](std::size_t b, int) {
        Stream rng(seed, b);
        const std::size_t end = std::min(n_samples, (b + 1) * kBatch);
        for (std::size_t i = b * kBatch; i < end; ++i) {
            double prod = 1.0;
            for (int p : power) {
                const double xi = law == DisorderLaw::uniform ? sq3 * (2.0 * rng.uniform() - 1.0)
                                                              : ((rng() >> 63) ? 1.0 : -1.0);
                prod *= std::pow(xi, p);
            }
            parts[b].add(prod);
        }
    });
    RunningStats all;
    for (const auto& p : parts) all.merge(p);
    r.mc = all.mean();
    r.stderr_ = all.stderr_mean();
    r.samples = all.count();
    const double diff = r.mc - r.formula;
    if (r.stderr_ > 0.0) r.z = diff / r.stderr_;
    else r.z = std::abs(diff) < 1e-12 ? 0.0 : INFINITY;
    return r;
}

bool CumulantBoundReport::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const CumulantBoundRow& r) { return r.pass; });
}

CumulantBoundReport check_cumulant_bound(const CumulantVector& cum) {
    CumulantBoundReport rep;
    double fact = 2.0;
    for (int n = 3; n <= cum.n_max(); ++n) {
        fact *= n;
        CumulantBoundRow row;
        row.n = n;
        row.value = cum(n);
        row.bound = 3.0 * std::pow(cum.xi_bar, n) * fact;
        row.pass = std::abs(row.value) <= row.bound;
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace kinlim
