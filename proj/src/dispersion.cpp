#include "kinlim/dispersion.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cfloat>
#include <cmath>
#include <sstream>

#include "kinlim/parallel.hpp"
#include "kinlim/rng.hpp"

namespace kinlim {

std::string to_string(ClosedForm c) {
    switch (c) {
        case ClosedForm::nearest_neighbour: return "nearest_neighbour";
        case ClosedForm::nearest_neighbour_squared: return "nearest_neighbour_squared";
        default: return "none";
    }
}

int Couplings::support_radius() const {
    int r = 0;
    for (const auto& [y, a] : entries)
        if (a != 0.0) r = std::max({r, std::abs(y[0]), std::abs(y[1]), std::abs(y[2])});
    return r;
}

double Couplings::value(const IVec3& y) const {
    auto it = entries.find(y);
    return it == entries.end() ? 0.0 : it->second;
}

cplx Couplings::fourier(const Vec3& k) const {
    cplx s = 0.0;
    for (const auto& [y, a] : entries) {
        const double ph = -kTwoPi * dot(k, to_vec(y));
        s += a * cplx(std::cos(ph), std::sin(ph));
    }
    return s;
}

double Couplings::symbol(const Vec3& k) const {
    double s = 0.0;
    for (const auto& [y, a] : entries) s += a * std::cos(kTwoPi * dot(k, to_vec(y)));
    return s;
}

Vec3 Couplings::symbol_gradient(const Vec3& k) const {
    Vec3 g{0.0, 0.0, 0.0};
    for (const auto& [y, a] : entries) {
        const double s = std::sin(kTwoPi * dot(k, to_vec(y)));
        for (int i = 0; i < 3; ++i) g[i] -= kTwoPi * y[i] * a * s;
    }
    return g;
}

std::array<Vec3, 3> Couplings::symbol_hessian(const Vec3& k) const {
    std::array<Vec3, 3> h{};
    for (const auto& [y, a] : entries) {
        const double c = std::cos(kTwoPi * dot(k, to_vec(y)));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) h[i][j] -= kTwoPi * kTwoPi * y[i] * y[j] * a * c;
    }
    return h;
}

double Couplings::omega(const Vec3& k) const { return std::sqrt(symbol(k)); }

Vec3 Couplings::omega_gradient(const Vec3& k) const {
    const double w = omega(k);
    return (0.5 / w) * symbol_gradient(k);
}

std::array<Vec3, 3> Couplings::omega_hessian(const Vec3& k) const {
    const double w = omega(k);
    const Vec3 g = symbol_gradient(k);
    auto h = symbol_hessian(k);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) h[i][j] = h[i][j] / (2.0 * w) - g[i] * g[j] / (4.0 * w * w * w);
    return h;
}

Couplings couplings_nn(double omega0) {
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw InvalidParameter("omega0 must be positive");
    Couplings c;
    c.entries[{0, 0, 0}] = omega0 * omega0 + 6.0;
    for (int i = 0; i < 3; ++i) {
        IVec3 e{0, 0, 0};
        e[i] = 1;
        c.entries[e] = -1.0;
        e[i] = -1;
        c.entries[e] = -1.0;
    }
    c.closed_form = ClosedForm::nearest_neighbour;
    c.omega0 = omega0;
    return c;
}

Couplings couplings_nn_squared(double omega0) {
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw InvalidParameter("omega0 must be positive");
    // Square of the nearest-neighbour symbol, i.e. the self-convolution of its couplings.
    const Couplings base = couplings_nn(omega0);
    Couplings c;
    for (const auto& [y1, a1] : base.entries)
        for (const auto& [y2, a2] : base.entries) {
            const IVec3 y{y1[0] + y2[0], y1[1] + y2[1], y1[2] + y2[2]};
            c.entries[y] += a1 * a2;
        }
    c.closed_form = ClosedForm::nearest_neighbour_squared;
    c.omega0 = omega0;
    return c;
}

double omega_closed_form(const Couplings& c, const Vec3& k) {
    const double w0 = c.omega0;
    double s = w0 * w0;
    for (int i = 0; i < 3; ++i) s += 2.0 * (1.0 - std::cos(kTwoPi * k[i]));
    switch (c.closed_form) {
        case ClosedForm::nearest_neighbour: return std::sqrt(s);
        case ClosedForm::nearest_neighbour_squared: return s;
        default: throw InvalidParameter("couplings carry no closed form");
    }
}

namespace {

// cos/sin of 2 pi j / M with exact values at multiples of M/4.
struct PhaseTable {
    std::vector<double> c, s;
    explicit PhaseTable(int M) : c(std::size_t(M)), s(std::size_t(M)) {
        for (int j = 0; j < M; ++j) {
            if (4 * j % M == 0) {
                const int q = 4 * j / M;
                const double cq[4] = {1.0, 0.0, -1.0, 0.0};
                const double sq[4] = {0.0, 1.0, 0.0, -1.0};
                c[std::size_t(j)] = cq[q];
                s[std::size_t(j)] = sq[q];
            } else if (2 * j > M) {
                c[std::size_t(j)] = c[std::size_t(M - j)];
                s[std::size_t(j)] = -s[std::size_t(M - j)];
            } else {
                const double ph = kTwoPi * double(j) / double(M);
                c[std::size_t(j)] = std::cos(ph);
                s[std::size_t(j)] = std::sin(ph);
            }
        }
    }
};

struct GridSymbol {
    double re = 0.0, im = 0.0;
    Vec3 grad{0.0, 0.0, 0.0};
};

GridSymbol grid_symbol(const Couplings& c, const PhaseTable& t, int M, const IVec3& m) {
    GridSymbol out;
    for (const auto& [y, a] : c.entries) {
        const long long p = (long long)m[0] * y[0] + (long long)m[1] * y[1] + (long long)m[2] * y[2];
        const std::size_t j = std::size_t(((p % M) + M) % M);
        out.re += a * t.c[j];
        out.im -= a * t.s[j];
        for (int i = 0; i < 3; ++i) out.grad[i] -= kTwoPi * y[i] * a * t.s[j];
    }
    return out;
}

bool has_offsite(const Couplings& c) {
    for (const auto& [y, a] : c.entries)
        if (a != 0.0 && (y[0] != 0 || y[1] != 0 || y[2] != 0)) return true;
    return false;
}

bool is_symmetric(const Couplings& c, std::string* detail) {
    for (const auto& [y, a] : c.entries) {
        const IVec3 my{-y[0], -y[1], -y[2]};
        if (c.value(my) != a) {
            if (detail) {
                std::ostringstream os;
                os << "alpha(" << y[0] << "," << y[1] << "," << y[2] << ")=" << a << " but alpha(-y)="
                   << c.value(my);
                *detail = os.str();
            }
            return false;
        }
    }
    return true;
}

DispersionGrid fill_grid(const Couplings& c, int M, bool require_positive) {
    if (M < 8 || M % 2 != 0) throw InvalidParameter("grid resolution M must be even and at least 8");
    DispersionGrid g;
    g.M = M;
    g.couplings = c;
    g.closed_form = c.closed_form;
    const std::size_t n = std::size_t(M) * M * M;
    g.omega.resize(n);
    g.grad_omega.resize(n);
    PhaseTable table(M);
    g.omega_min = INFINITY;
    g.omega_max = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
        const GridSymbol s = grid_symbol(c, table, M, g.coords(i));
        if (!(s.re > 0.0)) {
            if (require_positive) {
                const Vec3 k = g.k(i);
                std::ostringstream os;
                os << "alpha_hat=" << s.re << " <= 0 at k=(" << k[0] << "," << k[1] << "," << k[2]
                   << "): mechanical stability violated";
                throw StabilityError(os.str());
            }
        }
        const double w = std::sqrt(std::max(s.re, 0.0));
        g.omega[i] = w;
        g.grad_omega[i] = w > 0.0 ? (0.5 / w) * s.grad : Vec3{0.0, 0.0, 0.0};
        g.omega_min = std::min(g.omega_min, w);
        g.omega_max = std::max(g.omega_max, w);
    }
    return g;
}

}  // namespace

bool CouplingsValidation::all_pass() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const ConditionResult& r) { return r.pass; });
}

CouplingsValidation validate_couplings(const Couplings& c, int resolution) {
    if (resolution < 8) throw InvalidParameter("validation resolution must be at least 8");
    CouplingsValidation v;
    v.resolution = resolution;

    ConditionResult e1{"E1", has_offsite(c), ""};
    e1.detail = e1.pass ? "nonzero off-site coupling present" : "no nonzero alpha(y) with y != 0";
    ConditionResult e2{"E2", false, ""};
    e2.pass = is_symmetric(c, &e2.detail);
    if (e2.pass) e2.detail = "alpha(-y) = alpha(y) for every stored offset";
    ConditionResult e3{"E3", true, "finite support, radius " + std::to_string(c.support_radius())};

    PhaseTable table(resolution);
    const int M = resolution;
    double min_re = INFINITY, max_abs = 0.0, max_im = 0.0;
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int d = 0; d < M; ++d) {
                const GridSymbol s = grid_symbol(c, table, M, {a, b, d});
                min_re = std::min(min_re, s.re);
                max_abs = std::max(max_abs, std::abs(cplx(s.re, s.im)));
                max_im = std::max(max_im, std::abs(s.im));
            }
    v.min_symbol = min_re;
    v.max_imag_relative = max_abs > 0.0 ? max_im / max_abs : 0.0;
    ConditionResult e4{"E4", min_re > 0.0, ""};
    std::ostringstream os;
    os.precision(17);
    os << "grid minimum of alpha_hat = " << min_re << " on " << M << "^3";
    e4.detail = os.str();
    v.conditions = {e1, e2, e3, e4};
    return v;
}

std::size_t DispersionGrid::nearest(const Vec3& kk) const {
    IVec3 m;
    for (int i = 0; i < 3; ++i) m[i] = int(std::llround(kk[i] * M) % M);
    return index(m[0], m[1], m[2]);
}

double DispersionGrid::max_grad_norm() const {
    double best = 0.0;
    for (const auto& g : grad_omega) best = std::max(best, norm(g));
    return best;
}

double DispersionGrid::omega_spacing() const {
    double best = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        const IVec3 m = coords(i);
        for (int a = 0; a < 3; ++a) {
            IVec3 n = m;
            n[a] += 1;
            best = std::max(best, std::abs(omega[index(n[0], n[1], n[2])] - omega[i]));
        }
    }
    return best;
}

DispersionGrid build_dispersion(const Couplings& c, int M) {
    std::string detail;
    if (!has_offsite(c)) throw InvalidParameter("couplings fail E1: no nonzero off-site entry");
    if (!is_symmetric(c, &detail)) throw InvalidParameter("couplings fail E2: " + detail);
    return fill_grid(c, M, true);
}

DispersionGrid build_dispersion_unchecked(const Couplings& c, int M) { return fill_grid(c, M, false); }

namespace {

Eigen::Matrix3d to_eigen(const std::array<Vec3, 3>& h) {
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = h[i][j];
    return m;
}

Vec3 wrap_torus(const Vec3& k) {
    Vec3 r;
    for (int i = 0; i < 3; ++i) r[i] = k[i] - std::floor(k[i]);
    return r;
}

double torus_distance(const Vec3& a, const Vec3& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        double d = a[i] - b[i];
        d -= std::round(d);
        s += d * d;
    }
    return std::sqrt(s);
}

// Damped Newton on grad omega = 0; each accepted step decreases |grad omega|^2.
CriticalPoint refine(const Couplings& c, Vec3 k, double tol) {
    CriticalPoint cp;
    Vec3 g = c.omega_gradient(k);
    double f = dot(g, g);
    for (int it = 0; it < 200 && std::sqrt(f) >= tol; ++it) {
        const Eigen::Matrix3d H = to_eigen(c.omega_hessian(k));
        Eigen::Vector3d rhs(g[0], g[1], g[2]);
        Eigen::Vector3d step = -H.colPivHouseholderQr().solve(rhs);
        if (!step.allFinite()) step = -H * rhs;
        bool moved = false;
        for (int pass = 0; pass < 2 && !moved; ++pass) {
            double t = 1.0;
            for (int h = 0; h < 40; ++h, t *= 0.5) {
                const Vec3 trial = wrap_torus({k[0] + t * step[0], k[1] + t * step[1], k[2] + t * step[2]});
                const Vec3 gt = c.omega_gradient(trial);
                const double ft = dot(gt, gt);
                if (ft < f) {
                    k = trial;
                    g = gt;
                    f = ft;
                    moved = true;
                    break;
                }
            }
            // Fall back to steepest descent on |grad omega|^2.
            step = -H * rhs;
        }
        if (!moved) break;
    }
    cp.k = k;
    cp.grad_norm = std::sqrt(f);
    cp.converged = cp.grad_norm < tol;
    return cp;
}

}  // namespace

std::vector<CriticalPoint> find_critical_points(const DispersionGrid& g, double tol) {
    if (!(tol > 0.0)) throw InvalidParameter("refine tolerance must be positive");
    const int M = g.M;
    std::vector<CriticalPoint> found;
    const double spacing = 1.0 / M;
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int d = 0; d < M; ++d) {
                bool all = true;
                for (int comp = 0; comp < 3 && all; ++comp) {
                    double lo = INFINITY, hi = -INFINITY;
                    for (int corner = 0; corner < 8; ++corner) {
                        const std::size_t idx =
                            g.index(a + (corner & 1), b + ((corner >> 1) & 1), d + ((corner >> 2) & 1));
                        lo = std::min(lo, g.grad_omega[idx][comp]);
                        hi = std::max(hi, g.grad_omega[idx][comp]);
                    }
                    all = lo <= 0.0 && hi >= 0.0;
                }
                if (!all) continue;
                const Vec3 start{(a + 0.5) * spacing, (b + 0.5) * spacing, (d + 0.5) * spacing};
                CriticalPoint cp = refine(g.couplings, start, tol);
                bool merged = false;
                for (auto& other : found) {
                    if (torus_distance(other.k, cp.k) < spacing) {
                        if (cp.grad_norm < other.grad_norm) other = cp;
                        merged = true;
                        break;
                    }
                }
                if (!merged) found.push_back(cp);
            }

    for (auto& cp : found) {
        // Snap coordinates that are zero to rounding so reports read cleanly.
        for (auto& x : cp.k)
            if (std::abs(x - std::round(x)) < 1e-14) x = 0.0;
        cp.omega = g.couplings.omega(cp.k);
        const Eigen::Matrix3d H = to_eigen(g.couplings.omega_hessian(cp.k));
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
        const auto ev = es.eigenvalues();
        cp.morse_index = 0;
        for (int i = 0; i < 3; ++i) {
            cp.hessian_eigenvalues[i] = ev[i];
            if (ev[i] < 0.0) ++cp.morse_index;
        }
        cp.hessian_det = H.determinant();
        cp.degenerate = std::abs(cp.hessian_det) < tol;
        static const char* names[4] = {"minimum", "saddle-1", "saddle-2", "maximum"};
        cp.kind = cp.degenerate ? "degenerate" : names[cp.morse_index];
    }
    std::sort(found.begin(), found.end(), [](const CriticalPoint& x, const CriticalPoint& y) {
        if (x.omega != y.omega) return x.omega < y.omega;
        return x.k < y.k;
    });
    return found;
}

DecayFit decay_exponent(const DispersionGrid& g, const GridWeight& f, double t_min, double t_max, int samples) {
    if (!(t_min > 0.0) || !(t_max > t_min)) throw InvalidParameter("decay window needs 0 < t_min < t_max");
    if (samples < 5) throw InvalidParameter("decay fit needs at least 5 samples");
    DecayFit out;
    // Gradients are taken in units where k lives on [0,1)^3, so the phase
    // advance across one cell is t |grad omega| / (2 pi M).
    out.aliasing_guard = t_max * (1.0 / g.M) * g.max_grad_norm() / kTwoPi;
    if (!(out.aliasing_guard < 1.0)) {
        std::ostringstream os;
        os << "aliasing guard violated: t_max*h*max|grad omega|/(2 pi) = " << out.aliasing_guard
           << " >= 1; increase M or lower t_max";
        throw ConfigError(os.str());
    }
    const std::size_t n = g.size();
    std::vector<double> w(n);
    double abs_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = f ? f(g.k(i)) : 1.0;
        abs_mass += std::abs(w[i]);
    }
    abs_mass /= double(n);
    const double floor = 1e3 * DBL_EPSILON * abs_mass;
    std::vector<double> lx, ly;
    for (int s = 0; s < samples; ++s) {
        const double t = t_min * std::pow(t_max / t_min, double(s) / double(samples - 1));
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ph = t * g.omega[i];
            re += w[i] * std::cos(ph);
            im -= w[i] * std::sin(ph);
        }
        const double a = std::abs(cplx(re, im)) / double(n);
        out.t.push_back(t);
        out.abs_phi.push_back(a);
        const bool ok = a > floor && std::isfinite(a);
        out.used.push_back(ok);
        if (ok) {
            lx.push_back(std::log(t));
            ly.push_back(std::log(a));
        }
    }
    if (lx.size() < 5) throw FitError("fewer than 5 decay samples above the noise floor");
    out.fit = fit_line(lx, ly);
    return out;
}

CrossingEstimate crossing_integral_estimate(const DispersionGrid& g, const Vec3& alpha, double beta,
                                            const IVec3& sigma, const Vec3& u, std::size_t n_samples,
                                            std::uint64_t seed, int workers) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InvalidParameter("beta must lie in (0, 1]");
    if (n_samples < 10000) throw InvalidParameter("crossing estimate needs at least 1e4 samples");
    for (int s : sigma)
        if (s != 1 && s != -1) throw InvalidParameter("sigma entries must be +1 or -1");
    constexpr std::size_t kBatch = 1 << 14;
    const std::size_t batches = (n_samples + kBatch - 1) / kBatch;
    std::vector<RunningStats> parts(batches);
    const Couplings& c = g.couplings;
    parallel_for(batches, workers, [&](std::size_t b, int) {
        Stream rng(seed, b);
        const std::size_t count = std::min(kBatch, n_samples - b * kBatch);
        RunningStats st;
        for (std::size_t s = 0; s < count; ++s) {
            Vec3 k1, k2;
            for (int i = 0; i < 3; ++i) k1[i] = rng.uniform();
            for (int i = 0; i < 3; ++i) k2[i] = rng.uniform();
            const Vec3 k3 = k1 - k2 + u;
            const double d1 = std::abs(cplx(alpha[0] - sigma[0] * c.omega(k1), beta));
            const double d2 = std::abs(cplx(alpha[1] - sigma[1] * c.omega(k2), beta));
            const double d3 = std::abs(cplx(alpha[2] - sigma[2] * c.omega(k3), beta));
            st.add(1.0 / (d1 * d2 * d3));
        }
        parts[b] = st;
    });
    RunningStats total;
    for (const auto& p : parts) total.merge(p);
    return {beta, total.mean(), total.stderr_mean(), total.count()};
}

CrossingSweep crossing_sweep(const DispersionGrid& g, const Vec3& alpha, const std::vector<double>& betas,
                             const IVec3& sigma, const Vec3& u, std::size_t n_samples, std::uint64_t seed,
                             int workers) {
    if (betas.size() < 3) throw InvalidParameter("crossing sweep needs at least 3 beta values");
    CrossingSweep sw;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        auto e = crossing_integral_estimate(g, alpha, betas[i], sigma, u, n_samples, mix64(seed + i), workers);
        sw.points.push_back(e);
        lx.push_back(std::log(e.beta));
        ly.push_back(std::log(e.estimate));
    }
    sw.fit = fit_line(lx, ly);
    return sw;
}

}  // namespace kinlim
