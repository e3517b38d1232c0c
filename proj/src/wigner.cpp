#include "kinlim/wigner.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>
#include <sstream>

#include "kinlim/parallel.hpp"
#include "kinlim/rng.hpp"

namespace kinlim {

namespace {

void check_observable(const Observable& o, int L) {
    for (int i = 0; i < 3; ++i)
        if (std::abs(o.n[i]) > L / 2) {
            std::ostringstream os;
            os << "observable lag n=(" << o.n[0] << "," << o.n[1] << "," << o.n[2] << ") exceeds L/2=" << L / 2;
            throw InvalidParameter(os.str());
        }
}

int signed_coord(int a, int L) { return a >= L / 2 ? a - L : a; }

}  // namespace

cplx f_transform(const WaveField& psi, double epsilon, const Observable& obs) {
    const int L = psi.L;
    check_observable(obs, L);
    const std::size_t n = std::size_t(L) * L * L;
    if (psi.psi_plus.size() != n) throw InvalidParameter("wave field size does not match L");
    // Separable phase exp(-i 2 pi eps p_i (y_i - n_i/2)) per axis.
    std::array<std::vector<cplx>, 3> ph;
    for (int i = 0; i < 3; ++i) {
        ph[i].resize(std::size_t(L));
        for (int a = 0; a < L; ++a) {
            const double arg = -kTwoPi * epsilon * obs.p[i] * (signed_coord(a, L) - 0.5 * obs.n[i]);
            ph[i][std::size_t(a)] = cplx(std::cos(arg), std::sin(arg));
        }
    }
    const cplx* f = psi.psi_plus.data();
    cplx total = 0.0;
    for (int a = 0; a < L; ++a) {
        const std::size_t ra = std::size_t(wrap(a - obs.n[0], L));
        for (int b = 0; b < L; ++b) {
            const std::size_t rb = std::size_t(wrap(b - obs.n[1], L));
            const cplx pab = ph[0][std::size_t(a)] * ph[1][std::size_t(b)];
            const std::size_t row = (std::size_t(a) * L + b) * L;
            const std::size_t srow = (ra * L + rb) * L;
            cplx acc = 0.0;
            for (int c = 0; c < L; ++c) {
                const std::size_t rc = std::size_t(wrap(c - obs.n[2], L));
                acc += std::conj(f[srow + rc]) * f[row + c] * ph[2][std::size_t(c)];
            }
            total += pab * acc;
        }
    }
    return total;
}

std::vector<cplx> f_transform(const WaveField& psi, double epsilon, const std::vector<Observable>& obs) {
    std::vector<cplx> out;
    out.reserve(obs.size());
    for (const auto& o : obs) out.push_back(f_transform(psi, epsilon, o));
#ifndef NDEBUG
    const double f00 = psi.norm2_plus();
    for (const auto& z : out) assert(std::abs(z) <= f00 * (1.0 + 1e-12) + 1e-300);
#endif
    return out;
}

std::vector<double> energy_density(const LatticeState& s, const DisorderField& xi, Workspace& ws) {
    const std::size_t n = s.q.size();
    if (xi.xi.size() != n || s.v.size() != n) throw InvalidParameter("state and disorder sizes differ");
    std::vector<double> oq(n), e(n);
    ws.omega_apply(s.q.data(), oq.data());
    const double se = std::sqrt(s.epsilon);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 1.0 + se * xi.xi[i];
        e[i] = 0.5 * (s.v[i] * s.v[i] / (a * a) + oq[i] * oq[i]);
    }
    return e;
}

double energy_density_pairing(const LatticeState& s, const DisorderField& xi, double epsilon, const TestFunction& f,
                              Workspace& ws) {
    const std::vector<double> e = energy_density(s, xi, ws);
    const Lattice& lat = ws.lattice();
    double total = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] == 0.0) continue;
        total += f(epsilon * to_vec(lat.coords(i))) * e[i];
    }
    return total;
}

cplx pair_test_function(const WaveField& psi, double epsilon, const std::vector<Mode>& modes) {
    if (modes.empty()) throw InvalidParameter("test function needs at least one mode");
    cplx s = 0.0;
    for (const auto& m : modes) s += std::conj(m.weight) * f_transform(psi, epsilon, m.obs);
    return s;
}

std::uint64_t realization_seed(std::uint64_t master, std::size_t r) {
    Stream s(master, 0x5EED0000ULL + r);
    return s();
}

namespace {

struct RealizationResult {
    bool ok = false;
    std::vector<cplx> f;
    std::vector<double> scalars;
    std::vector<double> initial_scalars;
    double norm_plus = 0.0;
    double bound_ratio = 0.0;
    std::size_t steps = 0;
};

}  // namespace

DisorderAverageResult disorder_average(const DisorderRunConfig& cfg, const std::vector<Observable>& observables) {
    if (cfg.realizations < 2) throw ConfigError("disorder average needs at least 2 realizations");
    if (cfg.initial.L != cfg.L) throw ConfigError("initial wave field does not match L");
    if (!(cfg.t_bar >= 0.0)) throw ConfigError("t_bar must be non-negative");
    if (!(cfg.dt_factor > 0.0)) throw ConfigError("dt factor must be positive");
    check_mass_positivity(law_bound(cfg.law), cfg.epsilon);
    for (const auto& o : observables) check_observable(o, cfg.L);

    const Lattice lat(cfg.couplings, cfg.L);
    WaveField initial = cfg.initial;
    initial.epsilon = cfg.epsilon;
    const double T = cfg.t_bar / cfg.epsilon;
    const int workers = std::max(1, cfg.workers);
    std::vector<std::unique_ptr<Workspace>> spaces(static_cast<std::size_t>(workers));

    std::vector<RealizationResult> slots(cfg.realizations);
    parallel_for(cfg.realizations, workers, [&](std::size_t r, int w) {
        auto& ws_ptr = spaces[std::size_t(w)];
        if (!ws_ptr) ws_ptr = std::make_unique<Workspace>(lat);
        Workspace& ws = *ws_ptr;
        RealizationResult res;
        try {
            const DisorderField xi = cfg.law == DisorderLaw::none
                                         ? zero_disorder(cfg.L)
                                         : sample_disorder(cfg.L, cfg.law, realization_seed(cfg.seed, r));
            LatticeState s = cfg.coupling == InitialCoupling::exact ? from_wavefunction(initial, xi, ws)
                                                                     : from_wavefunction(initial, ws);
            s.epsilon = cfg.epsilon;
            for (const auto& f : cfg.initial_scalars) res.initial_scalars.push_back(f.fn(s, xi, ws));
            VerletIntegrator integ(ws, xi, cfg.epsilon);
            integ.advance(s, integ.default_dt(cfg.dt_factor), T);
            res.steps = integ.steps_taken();
            const WaveField psi = to_wavefunction(s, xi, ws);
            res.f = f_transform(psi, cfg.epsilon, observables);
            res.norm_plus = psi.norm2_plus();
            for (const auto& z : res.f) res.bound_ratio = std::max(res.bound_ratio, std::abs(z) / res.norm_plus);
            for (const auto& f : cfg.scalars) res.scalars.push_back(f.fn(s, xi, ws));
            bool finite = std::isfinite(res.norm_plus);
            for (const auto& z : res.f) finite = finite && std::isfinite(z.real()) && std::isfinite(z.imag());
            for (double x : res.scalars) finite = finite && std::isfinite(x);
            res.ok = finite;
        } catch (const NumericalError&) {
            res.ok = false;
        }
        slots[r] = std::move(res);
    });

    DisorderAverageResult out;
    out.attempted = cfg.realizations;
    out.dt = cfg.dt_factor / (lat.omega_max() * (1.0 + std::sqrt(cfg.epsilon) * law_bound(cfg.law)));
    std::vector<ComplexStats> acc(observables.size());
    std::vector<RunningStats> sacc(cfg.scalars.size()), iacc(cfg.initial_scalars.size());
    RunningStats nacc;
    for (const auto& r : slots) {
        if (!r.ok) {
            ++out.dropped;
            continue;
        }
        out.steps = r.steps;
        for (std::size_t j = 0; j < r.f.size(); ++j) acc[j].add(r.f[j]);
        for (std::size_t j = 0; j < r.scalars.size(); ++j) sacc[j].add(r.scalars[j]);
        for (std::size_t j = 0; j < r.initial_scalars.size(); ++j) iacc[j].add(r.initial_scalars[j]);
        nacc.add(r.norm_plus);
        out.max_bound_ratio = std::max(out.max_bound_ratio, r.bound_ratio);
        if (r.bound_ratio > 1.0 + 1e-12) ++out.bound_violations;
    }
    if (double(out.dropped) > 0.05 * double(cfg.realizations)) {
        std::ostringstream os;
        os << out.dropped << " of " << cfg.realizations << " realizations produced non-finite values (> 5%)";
        throw NumericalError(os.str());
    }
    for (std::size_t j = 0; j < observables.size(); ++j)
        out.estimates.push_back({observables[j], acc[j].mean(), acc[j].stderr_mean(), acc[j].count()});
    for (std::size_t j = 0; j < cfg.scalars.size(); ++j)
        out.scalars.push_back({cfg.scalars[j].name, sacc[j].mean(), sacc[j].stderr_mean(), sacc[j].count()});
    for (std::size_t j = 0; j < cfg.initial_scalars.size(); ++j)
        out.initial_scalars.push_back(
            {cfg.initial_scalars[j].name, iacc[j].mean(), iacc[j].stderr_mean(), iacc[j].count()});
    out.norm_plus = {"norm_plus", nacc.mean(), nacc.stderr_mean(), nacc.count()};
    return out;
}

}  // namespace kinlim
