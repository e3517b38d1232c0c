#include "kinlim/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "kinlim/io.hpp"
#include "kinlim/parallel.hpp"
#include "kinlim/stats.hpp"

namespace kinlim {

OmegaBuckets group_by_omega(const DispersionGrid& g) {
    const std::size_t n = g.size();
    std::vector<std::pair<long long, std::uint32_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i) keyed[i] = {std::llround(std::ldexp(g.omega[i], 36)), std::uint32_t(i)};
    std::sort(keyed.begin(), keyed.end());
    OmegaBuckets b;
    b.of_point.resize(n);
    std::vector<double> sums;
    long long last = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0 || keyed[i].first != last) {
            sums.push_back(0.0);
            b.count.push_back(0);
            last = keyed[i].first;
        }
        const std::uint32_t bi = std::uint32_t(sums.size() - 1);
        sums[bi] += g.omega[keyed[i].second];
        ++b.count[bi];
        b.of_point[keyed[i].second] = bi;
    }
    b.omega.resize(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i) b.omega[i] = sums[i] / double(b.count[i]);
    return b;
}

double CollisionTable::jump_weight(std::size_t k, std::size_t kp) const {
    const double w = grid->omega[k], wp = grid->omega[kp];
    return lorentzian(w - wp, beta) * wp * wp;
}

double CollisionTable::sigma_at_omega(double w) const {
    double s = 0.0;
    for (std::size_t b = 0; b < buckets.omega.size(); ++b) {
        const double u = buckets.omega[b];
        s += double(buckets.count[b]) * u * u * lorentzian(w - u, beta);
    }
    return kTwoPi * xi2 * s / double(grid->size());
}

double default_beta(const DispersionGrid& g) {
    const double b = 4.0 * (g.omega_max - g.omega_min) / double(g.M);
    return std::min(1.0, b);
}

CollisionTable build_collision_table(std::shared_ptr<const DispersionGrid> g, double beta, double xi2) {
    if (!g) throw InvalidParameter("collision table needs a dispersion grid");
    if (!(beta > 0.0) || !(beta <= 1.0)) throw InvalidParameter("broadening beta must lie in (0, 1]");
    if (!(xi2 >= 0.0) || !std::isfinite(xi2)) throw InvalidParameter("xi2 must be a finite non-negative number");
    CollisionTable t;
    t.grid = g;
    t.beta = beta;
    t.xi2 = xi2;
    t.buckets = group_by_omega(*g);
    const auto& u = t.buckets.omega;
    const auto& c = t.buckets.count;
    const std::size_t U = u.size();
    t.bucket_sigma.resize(U);
    t.bucket_cap.resize(U);
    t.bucket_acceptance.resize(U);
    const double inv_n = 1.0 / double(g->size());
    for (std::size_t b = 0; b < U; ++b) {
        double s = 0.0, cap = 0.0;
        for (std::size_t bp = 0; bp < U; ++bp) {
            const double w = lorentzian(u[b] - u[bp], beta) * u[bp] * u[bp];
            s += double(c[bp]) * w;
            cap = std::max(cap, w);
        }
        s *= inv_n;
        // Headroom for the 2^-36 rounding between bucket and point frequencies.
        t.bucket_cap[b] = cap * (1.0 + 1e-6);
        t.bucket_sigma[b] = kTwoPi * xi2 * s;
        t.bucket_acceptance[b] = s / t.bucket_cap[b];
    }
    t.sigma.resize(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) t.sigma[i] = t.bucket_sigma[t.buckets.of_point[i]];
    t.rejection_cap = *std::max_element(t.bucket_cap.begin(), t.bucket_cap.end());
    t.sigma_min = *std::min_element(t.sigma.begin(), t.sigma.end());
    t.sigma_max = *std::max_element(t.sigma.begin(), t.sigma.end());
    return t;
}

std::size_t sample_jump(const CollisionTable& t, std::size_t k, Stream& rng) {
    if (!(t.sigma[k] > 0.0)) throw InvalidParameter("sample_jump needs sigma(k) > 0");
    const std::uint32_t b = t.buckets.of_point[k];
    if (t.bucket_acceptance[b] < 1e-4) {
        std::ostringstream os;
        os << "rejection acceptance " << t.bucket_acceptance[b] << " below 1e-4 at omega=" << t.grid->omega[k]
           << ": beta=" << t.beta << " is too small for M=" << t.grid->M;
        throw TableError(os.str());
    }
    const double cap = t.bucket_cap[b];
    const auto& om = t.grid->omega;
    const double w = om[k];
    const std::uint64_t n = om.size();
    for (;;) {
        const std::size_t kp = std::size_t(rng.below(n));
        const double wp = om[kp];
        const double weight = lorentzian(w - wp, t.beta) * wp * wp;
        if (rng.uniform() * cap < weight) return kp;
    }
}

InitialSampler::InitialSampler(const InitialData& init, const DispersionGrid& g) : g_(g) {
    if (const auto* p = std::get_if<PointInitial>(&init)) {
        point_ = true;
        if (p->psi0.empty()) throw InvalidParameter("point initial state has empty support");
        const std::size_t n = g.size();
        cum_k_.resize(n);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 k = g.k(i);
            cplx s = 0.0;
            for (const auto& [y, z] : p->psi0) {
                const double ph = -kTwoPi * dot(k, to_vec(y));
                s += z * cplx(std::cos(ph), std::sin(ph));
            }
            acc += std::norm(s);
            cum_k_[i] = acc;
        }
        mass_ = 0.0;
        for (const auto& [y, z] : p->psi0) mass_ += std::norm(z);
        if (!(acc > 0.0) || !std::isfinite(acc) || !(mass_ > 0.0)) throw InvalidParameter("point initial state is not normalizable");
        return;
    }
    wkb_ = std::get<WkbInitial>(init);
    if (!wkb_.h) throw InvalidParameter("WKB initial state needs an envelope");
    if (!(wkb_.extent > 0.0) || wkb_.bins < 4) throw InvalidParameter("WKB tabulation needs extent > 0 and bins >= 4");
    bins_ = wkb_.bins;
    width_ = 2.0 * wkb_.extent / bins_;
    for (int i = 0; i < 3; ++i) lo_[i] = wkb_.centre[i] - wkb_.extent;
    const std::size_t B = std::size_t(bins_);
    cum_abc_.resize(B * B * B);
    cum_ab_.resize(B * B);
    cum_a_.resize(B);
    const double vol = width_ * width_ * width_;
    double total = 0.0;
    for (std::size_t a = 0; a < B; ++a) {
        double row_a = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            double row_ab = 0.0;
            for (std::size_t c = 0; c < B; ++c) {
                const Vec3 x{lo_[0] + (double(a) + 0.5) * width_, lo_[1] + (double(b) + 0.5) * width_,
                             lo_[2] + (double(c) + 0.5) * width_};
                row_ab += std::norm(wkb_.h(x)) * vol;
                cum_abc_[(a * B + b) * B + c] = row_ab;
            }
            row_a += row_ab;
            cum_ab_[a * B + b] = row_a;
        }
        total += row_a;
        cum_a_[a] = total;
    }
    mass_ = total;
    if (!(mass_ > 0.0) || !std::isfinite(mass_)) throw InvalidParameter("WKB envelope is not normalizable");
}

namespace {

// Index of the first cumulative entry exceeding u * cum.back().
std::size_t pick(const double* cum, std::size_t n, double u) {
    const double target = u * cum[n - 1];
    const double* it = std::upper_bound(cum, cum + n, target);
    std::size_t i = std::size_t(it - cum);
    if (i >= n) i = n - 1;
    // Skip empty cells produced by zero-weight prefixes.
    while (i + 1 < n && cum[i] <= target) ++i;
    return i;
}

}  // namespace

void InitialSampler::draw(Stream& rng, Vec3& x, std::size_t& k) const {
    if (point_) {
        x = {0.0, 0.0, 0.0};
        k = pick(cum_k_.data(), cum_k_.size(), rng.uniform());
        return;
    }
    const std::size_t B = std::size_t(bins_);
    const std::size_t a = pick(cum_a_.data(), B, rng.uniform());
    const std::size_t b = pick(&cum_ab_[a * B], B, rng.uniform());
    const std::size_t c = pick(&cum_abc_[(a * B + b) * B], B, rng.uniform());
    x = {lo_[0] + (double(a) + rng.uniform()) * width_, lo_[1] + (double(b) + rng.uniform()) * width_,
         lo_[2] + (double(c) + rng.uniform()) * width_};
    Vec3 grad{0.0, 0.0, 0.0};
    if (wkb_.grad_S) {
        grad = wkb_.grad_S(x);
    } else if (wkb_.S) {
        for (int i = 0; i < 3; ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
            Vec3 xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            grad[i] = (wkb_.S(xp) - wkb_.S(xm)) / (2.0 * h);
        }
    }
    k = g_.nearest((1.0 / kTwoPi) * grad);
}

double initial_mass(const InitialData& init, const DispersionGrid& g) { return InitialSampler(init, g).mass(); }

ParticleEnsemble sample_initial(const InitialData& init, const DispersionGrid& g, std::size_t N, double total_mass,
                                std::uint64_t seed) {
    if (N < 1) throw InvalidParameter("ensemble needs at least one particle");
    const InitialSampler sampler(init, g);
    const double mass = total_mass > 0.0 ? total_mass : sampler.mass();
    ParticleEnsemble e;
    e.particles.resize(N);
    e.total_weight = mass;
    const double w = mass / double(N);
    for (std::size_t j = 0; j < N; ++j) {
        Stream rng(seed, j);
        std::size_t k = 0;
        sampler.draw(rng, e.particles[j].x, k);
        e.particles[j].k = std::uint32_t(k);
        e.particles[j].weight = w;
    }
    return e;
}

ParticleEnsemble simulate(const CollisionTable& t, const ParticleEnsemble& e, double t_final, std::uint64_t seed,
                          int workers) {
    const double duration = t_final - e.time;
    if (!(duration >= 0.0)) throw InvalidParameter("simulate target time precedes the ensemble time");
    ParticleEnsemble out = e;
    out.time = t_final;
    const auto& grad = t.grid->grad_omega;
    constexpr std::size_t kChunk = 4096;
    const std::size_t n = out.particles.size();
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, workers, [&](std::size_t ch, int) {
        const std::size_t end = std::min(n, (ch + 1) * kChunk);
        for (std::size_t j = ch * kChunk; j < end; ++j) {
            Particle& p = out.particles[j];
            Stream rng(seed, j);
            double remaining = duration;
            for (;;) {
                const Vec3 vel = (1.0 / kTwoPi) * grad[p.k];
                const double s = t.sigma[p.k];
                const double tau = s > 0.0 ? rng.exponential(s) : INFINITY;
                if (tau >= remaining) {
                    p.x = p.x + remaining * vel;
                    break;
                }
                p.x = p.x + tau * vel;
                remaining -= tau;
                p.k = std::uint32_t(sample_jump(t, p.k, rng));
                ++p.collisions;
            }
        }
    });
    return out;
}

std::vector<WignerEstimate> characteristic_function(const ParticleEnsemble& e, const DispersionGrid& g,
                                                    const std::vector<Observable>& obs) {
    const std::size_t N = e.particles.size();
    if (N == 0) throw InvalidParameter("characteristic function of an empty ensemble");
    std::vector<WignerEstimate> out;
    std::vector<cplx> a(N);
    for (const auto& o : obs) {
        const Vec3 nv = to_vec(o.n);
        cplx sum = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            const auto& p = e.particles[j];
            const double ph = -kTwoPi * (dot(o.p, p.x) - dot(nv, g.k(p.k)));
            a[j] = p.weight * cplx(std::cos(ph), std::sin(ph));
            sum += a[j];
        }
        // Delete-one jackknife of a sum: var = N/(N-1) sum_j (a_j - mean a)^2.
        const cplx mean = sum / double(N);
        double vr = 0.0, vi = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            const cplx d = a[j] - mean;
            vr += d.real() * d.real();
            vi += d.imag() * d.imag();
        }
        const double f = N > 1 ? double(N) / double(N - 1) : 0.0;
        out.push_back({o, sum, {std::sqrt(f * vr), std::sqrt(f * vi)}, N});
    }
    return out;
}

cplx gate_component(const DispersionGrid& g, const OmegaBuckets& b, double omega_k, cplx w, int s1, int s2) {
    cplx s = 0.0;
    for (int sp : {1, -1}) {
        for (std::size_t i = 0; i < b.omega.size(); ++i) {
            const double u = b.omega[i];
            const double f = 0.25 * (omega_k + s1 * sp * u) * (omega_k + s2 * sp * u);
            s += double(b.count[i]) * cplx(0.0, 1.0) / (w - double(sp) * u) * f;
        }
    }
    return s / double(g.size());
}

namespace {
void check_gate_beta(double beta) {
    if (!(beta > 0.0) || !(beta <= 1.0)) throw InvalidParameter("gate broadening beta must lie in (0, 1]");
}
}  // namespace

cplx theta_plus(const DispersionGrid& g, const OmegaBuckets& b, double omega_k, double beta) {
    check_gate_beta(beta);
    return gate_component(g, b, omega_k, cplx(omega_k, beta), 1, 1);
}

cplx theta_minus(const DispersionGrid& g, const OmegaBuckets& b, double omega_k, double beta) {
    check_gate_beta(beta);
    return gate_component(g, b, omega_k, cplx(-omega_k, beta), -1, -1);
}

cplx theta_plus(const DispersionGrid& g, const Vec3& k, double beta) {
    return theta_plus(g, group_by_omega(g), g.couplings.omega(k), beta);
}

cplx theta_minus(const DispersionGrid& g, const Vec3& k, double beta) {
    return theta_minus(g, group_by_omega(g), g.couplings.omega(k), beta);
}

DysonResult dyson_characteristic(const InitialData& init, const CollisionTable& t, double t_bar,
                                 const std::vector<Observable>& obs, int m_max, std::size_t n_mc, std::uint64_t seed,
                                 double tail_tolerance, int workers) {
    if (m_max < 0 || m_max > 8) throw InvalidParameter("Dyson order m_max must lie in [0, 8]");
    if (n_mc < 1000) throw InvalidParameter("Dyson solver needs at least 1e3 samples");
    if (!(t_bar >= 0.0)) throw InvalidParameter("t_bar must be non-negative");
    const DispersionGrid& g = *t.grid;
    const InitialSampler sampler(init, g);
    const double mass = sampler.mass();
    constexpr std::size_t kBatch = 4096;
    const std::size_t batches = (n_mc + kBatch - 1) / kBatch;
    std::vector<std::vector<ComplexStats>> parts(batches, std::vector<ComplexStats>(obs.size()));
    std::vector<double> log_fact(std::size_t(m_max) + 1, 0.0);
    for (int m = 1; m <= m_max; ++m) log_fact[std::size_t(m)] = log_fact[std::size_t(m - 1)] + std::log(double(m));

    parallel_for(batches, workers, [&](std::size_t bi, int) {
        const std::size_t end = std::min(n_mc, (bi + 1) * kBatch);
        std::vector<double> pm(std::size_t(m_max) + 1), u;
        std::vector<std::size_t> chain;
        for (std::size_t s = bi * kBatch; s < end; ++s) {
            Stream rng(seed, s);
            Vec3 x;
            std::size_t k0 = 0;
            sampler.draw(rng, x, k0);
            const double lambda = t.sigma[k0] * t_bar;
            // Collision order from a Poisson(lambda) law truncated at m_max.
            double Z = 0.0;
            for (int m = 0; m <= m_max; ++m) {
                pm[std::size_t(m)] = poisson_pmf(lambda, m);
                Z += pm[std::size_t(m)];
            }
            int m = 0;
            {
                const double target = rng.uniform() * Z;
                double acc = 0.0;
                for (m = 0; m < m_max; ++m) {
                    acc += pm[std::size_t(m)];
                    if (target < acc) break;
                }
                while (m > 0 && pm[std::size_t(m)] == 0.0) --m;
            }
            // Simplex volume t^m/m! over the sampling probability of m.
            double weight = mass * Z / pm[std::size_t(m)];
            if (m > 0) weight *= std::exp(double(m) * std::log(t_bar) - log_fact[std::size_t(m)]);
            u.resize(std::size_t(m));
            for (auto& ui : u) ui = rng.uniform() * t_bar;
            std::sort(u.begin(), u.end());
            chain.assign(1, k0);
            double prod = 1.0;
            for (int j = 0; j < m; ++j) {
                const double sj = t.sigma[chain.back()];
                if (!(sj > 0.0)) {
                    prod = 0.0;
                    break;
                }
                prod *= sj;
                chain.push_back(sample_jump(t, chain.back(), rng));
            }
            double decay = 0.0;
            Vec3 drift{0.0, 0.0, 0.0};
            if (prod != 0.0) {
                for (int j = 0; j <= m; ++j) {
                    const double start = j == 0 ? 0.0 : u[std::size_t(j - 1)];
                    const double stop = j == m ? t_bar : u[std::size_t(j)];
                    const double r = stop - start;
                    const std::size_t kj = chain[std::size_t(j)];
                    decay += r * t.sigma[kj];
                    drift = drift + r * g.grad_omega[kj];
                }
            }
            const double amp = weight * prod * std::exp(-decay);
            const Vec3 km = g.k(chain.back());
            for (std::size_t o = 0; o < obs.size(); ++o) {
                const double ph = -dot(obs[o].p, drift) - kTwoPi * (dot(obs[o].p, x) - dot(to_vec(obs[o].n), km));
                parts[bi][o].add(amp * cplx(std::cos(ph), std::sin(ph)));
            }
        }
    });

    DysonResult r;
    r.samples = n_mc;
    r.m_max = m_max;
    for (std::size_t o = 0; o < obs.size(); ++o) {
        ComplexStats total;
        for (const auto& p : parts) total.merge(p[o]);
        r.estimates.push_back({obs[o], total.mean(), total.stderr_mean(), total.count()});
    }
    r.truncation_bound = poisson_tail(t.sigma_max * t_bar, m_max);
    if (r.truncation_bound > tail_tolerance) {
        std::ostringstream os;
        os << "Poisson tail P(N > " << m_max << ") at sigma_max*t_bar=" << t.sigma_max * t_bar << " is "
           << r.truncation_bound << ", above tolerance " << tail_tolerance;
        r.truncation_warning = true;
        r.warning = os.str();
    }
    return r;
}

namespace {
constexpr char kTableMagic[8] = {'K', 'L', 'T', 'A', 'B', 'L', 'E', '1'};
constexpr std::uint32_t kTableVersion = 1;
}  // namespace

void save_collision_table(const std::string& path, const CollisionTable& t, const std::string& config_hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write collision table cache: " + path);
    os.write(kTableMagic, 8);
    write_le(os, kTableVersion);
    write_string(os, config_hash);
    write_le(os, std::int32_t(t.grid->M));
    write_le(os, t.beta);
    write_le(os, t.xi2);
    write_le(os, std::uint64_t(t.buckets.omega.size()));
    for (std::size_t b = 0; b < t.buckets.omega.size(); ++b) {
        write_le(os, t.buckets.omega[b]);
        write_le(os, t.buckets.count[b]);
        write_le(os, t.bucket_sigma[b]);
        write_le(os, t.bucket_cap[b]);
        write_le(os, t.bucket_acceptance[b]);
    }
    write_le(os, std::uint64_t(t.buckets.of_point.size()));
    for (auto b : t.buckets.of_point) write_le(os, b);
    if (!os) throw std::runtime_error("failed writing collision table cache: " + path);
}

bool load_collision_table(const std::string& path, std::shared_ptr<const DispersionGrid> g, double beta, double xi2,
                          const std::string& config_hash, CollisionTable& out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return false;
    char magic[8];
    is.read(magic, 8);
    if (!is || !std::equal(magic, magic + 8, kTableMagic)) return false;
    if (read_le<std::uint32_t>(is) != kTableVersion) return false;
    if (read_string(is) != config_hash) return false;
    if (read_le<std::int32_t>(is) != g->M) return false;
    if (read_le<double>(is) != beta || read_le<double>(is) != xi2) return false;
    CollisionTable t;
    t.grid = g;
    t.beta = beta;
    t.xi2 = xi2;
    const auto U = read_le<std::uint64_t>(is);
    t.buckets.omega.resize(U);
    t.buckets.count.resize(U);
    t.bucket_sigma.resize(U);
    t.bucket_cap.resize(U);
    t.bucket_acceptance.resize(U);
    for (std::size_t b = 0; b < U; ++b) {
        t.buckets.omega[b] = read_le<double>(is);
        t.buckets.count[b] = read_le<std::uint32_t>(is);
        t.bucket_sigma[b] = read_le<double>(is);
        t.bucket_cap[b] = read_le<double>(is);
        t.bucket_acceptance[b] = read_le<double>(is);
    }
    const auto n = read_le<std::uint64_t>(is);
    if (n != g->size()) return false;
    t.buckets.of_point.resize(n);
    for (auto& b : t.buckets.of_point) b = read_le<std::uint32_t>(is);
    if (!is) return false;
    t.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.sigma[i] = t.bucket_sigma[t.buckets.of_point[i]];
    t.rejection_cap = *std::max_element(t.bucket_cap.begin(), t.bucket_cap.end());
    t.sigma_min = *std::min_element(t.sigma.begin(), t.sigma.end());
    t.sigma_max = *std::max_element(t.sigma.begin(), t.sigma.end());
    out = std::move(t);
    return true;
}

}  // namespace kinlim
