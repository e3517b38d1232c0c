#include "kinlim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "kinlim/moments.hpp"
#include "kinlim/rng.hpp"

namespace kinlim {

namespace fs = std::filesystem;

ConfigReader::ConfigReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
}

const json& ConfigReader::child(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    used_.insert(key);
    return j_.at(key);
}

Vec3 ConfigReader::vec3(const std::string& key, const Vec3& fallback) {
    if (!has(key)) return fallback;
    const auto v = require<std::vector<double>>(key);
    if (v.size() != 3) throw ConfigError(path(key) + ": expected 3 numbers");
    return {v[0], v[1], v[2]};
}

IVec3 ConfigReader::ivec3(const std::string& key, const IVec3& fallback) {
    if (!has(key)) return fallback;
    const json& a = child(key);
    if (!a.is_array() || a.size() != 3) throw ConfigError(path(key) + ": expected 3 integers");
    IVec3 r{};
    for (std::size_t i = 0; i < 3; ++i) {
        if (!a[i].is_number_integer()) throw ConfigError(path(key) + ": expected 3 integers");
        r[i] = a[i].get<int>();
    }
    return r;
}

void ConfigReader::finish() const {
    for (const auto& [key, _] : j_.items())
        if (!used_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
}

Couplings parse_couplings(const json& j, const std::string& where) {
    ConfigReader r(j, where);
    Couplings c;
    if (r.has("entries")) {
        if (r.has("family")) throw ConfigError(where + ": give either 'family' or 'entries', not both");
        c = couplings_from_json(r.child("entries"));
    } else {
        const auto family = r.require<std::string>("family");
        const double w0 = r.get<double>("omega0", 1.0);
        if (family == "nn") c = couplings_nn(w0);
        else if (family == "nn_squared") c = couplings_nn_squared(w0);
        else throw ConfigError(where + ": unknown coupling family '" + family + "' (nn | nn_squared)");
    }
    r.finish();
    const CouplingsValidation v = validate_couplings(c, 16);
    for (const auto& cond : v.conditions)
        if (!cond.pass) throw ConfigError(where + ": condition " + cond.name + " fails: " + cond.detail);
    return c;
}

InitialConfig parse_initial(const json& j, const std::string& where) {
    ConfigReader r(j, where);
    InitialConfig ic;
    const auto type = r.require<std::string>("type");
    if (type == "wkb") {
        ic.kind = InitialConfig::Kind::wkb;
        ic.width = r.get<double>("width", 0.5);
        ic.centre = r.vec3("centre", {0.0, 0.0, 0.0});
        ic.k0 = r.vec3("k0", {0.0, 0.0, 0.0});
        ic.extent = r.get<double>("extent", 0.0);
        ic.bins = r.get<int>("bins", 128);
        if (!(ic.width > 0.0)) throw ConfigError(r.path("width") + ": must be positive");
        if (ic.extent < 0.0) throw ConfigError(r.path("extent") + ": must be non-negative");
        if (ic.bins < 4 || ic.bins > 512) throw ConfigError(r.path("bins") + ": must lie in [4, 512]");
    } else if (type == "point") {
        ic.kind = InitialConfig::Kind::point;
        const json& sites = r.child("sites");
        if (!sites.is_array() || sites.empty()) throw ConfigError(r.path("sites") + ": expected a non-empty list");
        for (std::size_t i = 0; i < sites.size(); ++i) {
            ConfigReader s(sites[i], r.path("sites") + "[" + std::to_string(i) + "]");
            const IVec3 y = s.ivec3("offset", {0, 0, 0});
            const cplx z(s.get<double>("re", 0.0), s.get<double>("im", 0.0));
            s.finish();
            if (ic.point.count(y)) throw ConfigError(r.path("sites") + ": duplicate offset");
            ic.point[y] = z;
        }
    } else {
        throw ConfigError(r.path("type") + ": unknown initial type '" + type + "' (wkb | point)");
    }
    r.finish();
    return ic;
}

std::vector<Observable> parse_observables(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty list of {p, n}");
    std::vector<Observable> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        ConfigReader r(j[i], where + "[" + std::to_string(i) + "]");
        Observable o;
        o.p = r.vec3("p", {0.0, 0.0, 0.0});
        o.n = r.ivec3("n", {0, 0, 0});
        r.finish();
        out.push_back(o);
    }
    return out;
}

std::vector<Observable> default_observables() {
    return {{{0, 0, 0}, {0, 0, 0}},    {{0, 0, 0}, {1, 0, 0}},    {{0, 0, 0}, {0, 1, 0}},
            {{0, 0, 0}, {2, 0, 0}},    {{0, 0, 0}, {1, 1, 0}},    {{0.25, 0, 0}, {0, 0, 0}},
            {{0.5, 0, 0}, {0, 0, 0}},  {{0, 0.5, 0}, {0, 0, 0}},  {{0.25, 0, 0}, {1, 0, 0}},
            {{0.5, 0, 0}, {1, 0, 0}},  {{0, 0.25, 0}, {0, 1, 0}}, {{1, 0, 0}, {0, 0, 0}}};
}

json default_study_json() {
    json obs = json::array();
    for (const auto& o : default_observables())
        obs.push_back({{"p", {o.p[0], o.p[1], o.p[2]}}, {"n", {o.n[0], o.n[1], o.n[2]}}});
    return {{"couplings", {{"family", "nn"}, {"omega0", 1.0}}},
            {"epsilons", {0.5, 0.25, 0.125}},
            {"L", {64, 64, 64}},
            {"t_bar", 0.5},
            {"dt_factor", 0.1},
            {"realizations", 100},
            {"law", "rademacher"},
            {"initial", {{"type", "wkb"}, {"width", 0.5}, {"centre", {0.0, 0.0, 0.0}}, {"k0", {1.0 / 12.0, 0.0, 0.0}}}},
            {"observables", obs},
            {"boltzmann",
             {{"M", 48},
              {"beta", 0.06},
              {"xi2", 1.0},
              {"particles", 200000},
              {"dyson", true},
              {"m_max", 8},
              {"dyson_samples", 100000}}},
            {"energy", {{"enabled", true}, {"f_width", 1.0}}},
            {"final_ceiling", 0.2},
            {"seed", 20240501},
            {"workers", 1}};
}

ConvergenceConfig parse_convergence(const json& j) {
    ConfigReader r(j, "config");
    ConvergenceConfig c;
    c.couplings = parse_couplings(r.child("couplings"));
    c.epsilons = r.require<std::vector<double>>("epsilons");
    if (r.has("L")) {
        const json& Lj = r.child("L");
        if (Lj.is_number_integer()) c.L.assign(c.epsilons.size(), Lj.get<int>());
        else if (Lj.is_array()) {
            for (const auto& x : Lj) {
                if (!x.is_number_integer()) throw ConfigError(r.path("L") + ": expected integers");
                c.L.push_back(x.get<int>());
            }
        } else {
            throw ConfigError(r.path("L") + ": expected an integer or a list");
        }
    } else {
        c.L.assign(c.epsilons.size(), 64);
    }
    c.t_bar = r.get<double>("t_bar", 0.5);
    c.dt_factor = r.get<double>("dt_factor", 0.1);
    c.realizations = r.get<std::size_t>("realizations", 100);
    c.law = parse_disorder_law(r.get<std::string>("law", "rademacher"));
    if (c.law == DisorderLaw::none) throw ConfigError(r.path("law") + ": the comparison needs a random law");
    c.initial = parse_initial(r.child("initial"));
    c.observables = r.has("observables") ? parse_observables(r.child("observables"), r.path("observables"))
                                         : default_observables();
    if (r.has("boltzmann")) {
        ConfigReader b(r.child("boltzmann"), r.path("boltzmann"));
        c.boltzmann.M = b.get<int>("M", 48);
        c.boltzmann.beta = b.get<double>("beta", 0.06);
        c.boltzmann.xi2 = b.get<double>("xi2", 1.0);
        c.boltzmann.particles = b.get<std::size_t>("particles", 200000);
        c.boltzmann.dyson = b.get<bool>("dyson", true);
        c.boltzmann.m_max = b.get<int>("m_max", 8);
        c.boltzmann.dyson_samples = b.get<std::size_t>("dyson_samples", 100000);
        c.boltzmann.tail_tolerance = b.get<double>("tail_tolerance", 1e-3);
        b.finish();
    }
    if (c.boltzmann.M < 8 || c.boltzmann.M % 2) throw ConfigError("config.boltzmann.M: must be even and >= 8");
    if (!(c.boltzmann.beta > 0.0 && c.boltzmann.beta <= 1.0)) throw ConfigError("config.boltzmann.beta: must lie in (0, 1]");
    if (c.boltzmann.m_max < 0 || c.boltzmann.m_max > 8) throw ConfigError("config.boltzmann.m_max: must lie in [0, 8]");
    if (c.boltzmann.dyson && c.boltzmann.dyson_samples < 1000)
        throw ConfigError("config.boltzmann.dyson_samples: must be at least 1000");
    if (r.has("energy")) {
        ConfigReader e(r.child("energy"), r.path("energy"));
        c.energy.enabled = e.get<bool>("enabled", true);
        c.energy.f_width = e.get<double>("f_width", 1.0);
        e.finish();
    }
    c.resume = r.get<bool>("resume", true);
    c.final_ceiling = r.get<double>("final_ceiling", 0.2);
    c.seed = r.get<std::uint64_t>("seed", 0);
    c.workers = r.get<int>("workers", 1);
    c.output_dir = r.get<std::string>("output_dir", "");
    r.finish();
    if (c.workers < 1) throw ConfigError("config.workers: must be at least 1");
    json hashed = j;
    hashed.erase("output_dir");
    hashed.erase("workers");
    hashed.erase("resume");
    c.config_hash = config_hash(hashed);
    return c;
}

namespace {

struct Context {
    json config;
    std::string hash;
    std::uint64_t seed = 0;
    int workers = 1;
    fs::path out;
    bool validate_only = false;
    std::ostream* log = nullptr;

    ArtifactMeta meta() const { return {hash, seed}; }
    std::string file(const std::string& name) const { return (out / name).string(); }
    json with_meta(json j) const {
        j["meta"] = meta().to_json();
        return j;
    }
};

// Shared keys: seed, workers, output_dir.
void read_common(ConfigReader& r, Context& ctx) {
    ctx.seed = r.get<std::uint64_t>("seed", 0);
    ctx.workers = r.get<int>("workers", 1);
    const auto dir = r.get<std::string>("output_dir", "kinlim_out");
    if (ctx.out.empty()) ctx.out = dir;
    if (ctx.workers < 1) throw ConfigError("config.workers: must be at least 1");
}

int cmd_dispersion(Context& ctx) {
    ConfigReader r(ctx.config, "config");
    read_common(r, ctx);
    const Couplings c = parse_couplings(r.child("couplings"));
    const int M = r.get<int>("M", 64);
    const double tol = r.get<double>("critical_tolerance", 1e-10);
    double t_min = 5.0, t_max = 50.0;
    int samples = 40;
    if (r.has("decay")) {
        ConfigReader d(r.child("decay"), r.path("decay"));
        t_min = d.get<double>("t_min", t_min);
        t_max = d.get<double>("t_max", t_max);
        samples = d.get<int>("samples", samples);
        d.finish();
    }
    r.finish();
    if (M < 8 || M % 2) throw ConfigError("config.M: must be even and >= 8");
    if (!(tol > 0.0)) throw ConfigError("config.critical_tolerance: must be positive");
    if (!(t_max > t_min && t_min > 0.0)) throw ConfigError("config.decay: need t_max > t_min > 0");
    if (ctx.validate_only) return 0;

    const DispersionGrid g = build_dispersion(c, M);
    const CouplingsValidation v = validate_couplings(c, M);
    const auto cps = find_critical_points(g, tol);
    const DecayFit decay = decay_exponent(g, [](const Vec3&) { return 1.0; }, t_min, t_max, samples);
    json j;
    j["M"] = M;
    j["omega_min"] = g.omega_min;
    j["omega_max"] = g.omega_max;
    j["closed_form"] = to_string(g.closed_form);
    j["couplings"] = couplings_to_json(c);
    j["validation"] = json::array();
    for (const auto& cond : v.conditions)
        j["validation"].push_back({{"condition", cond.name}, {"pass", cond.pass}, {"detail", cond.detail}});
    j["validation_min_symbol"] = v.min_symbol;
    j["critical_points"] = json::array();
    std::size_t degenerate = 0;
    for (const auto& p : cps) {
        degenerate += p.degenerate;
        j["critical_points"].push_back({{"k", {p.k[0], p.k[1], p.k[2]}},
                                        {"omega", p.omega},
                                        {"grad_norm", p.grad_norm},
                                        {"hessian_eigenvalues", {p.hessian_eigenvalues[0], p.hessian_eigenvalues[1],
                                                                 p.hessian_eigenvalues[2]}},
                                        {"morse_index", p.morse_index},
                                        {"degenerate", p.degenerate},
                                        {"converged", p.converged},
                                        {"kind", p.kind}});
    }
    j["decay"] = {{"slope", decay.fit.slope},
                  {"ci", {decay.fit.ci_low, decay.fit.ci_high}},
                  {"residual_rms", decay.fit.residual_rms},
                  {"points", decay.fit.points},
                  {"aliasing_guard", decay.aliasing_guard}};
    fs::create_directories(ctx.out);
    write_json(ctx.file("dispersion.json"), ctx.with_meta(j));
    write_diagnostics_csv(ctx.file("diagnostics.csv"),
                          {{"omega_min", g.omega_min, 0.0},
                           {"omega_max", g.omega_max, 0.0},
                           {"critical_points", double(cps.size()), 0.0},
                           {"degenerate_points", double(degenerate), 0.0},
                           {"decay_slope", decay.fit.slope, decay.fit.slope_stderr},
                           {"decay_residual_rms", decay.fit.residual_rms, 0.0}},
                          ctx.meta());
    *ctx.log << "omega_min=" << g.omega_min << " omega_max=" << g.omega_max << " critical_points=" << cps.size()
             << " decay_slope=" << decay.fit.slope << "\n";
    return 0;
}

int cmd_kernel(Context& ctx) {
    ConfigReader r(ctx.config, "config");
    read_common(r, ctx);
    const Couplings c = parse_couplings(r.child("couplings"));
    const int M = r.get<int>("M", 48);
    const bool has_beta = r.has("beta");
    double beta = r.get<double>("beta", 0.0);
    const double xi2 = r.get<double>("xi2", 1.0);
    const int theta_points = r.get<int>("theta_points", 20);
    const bool write_sigma = r.get<bool>("write_sigma", true);
    r.finish();
    if (M < 8 || M % 2) throw ConfigError("config.M: must be even and >= 8");
    if (has_beta && !(beta > 0.0 && beta <= 1.0)) throw ConfigError("config.beta: must lie in (0, 1]");
    if (!(xi2 >= 0.0)) throw ConfigError("config.xi2: must be non-negative");
    if (theta_points < 0) throw ConfigError("config.theta_points: must be non-negative");
    if (ctx.validate_only) return 0;

    auto g = std::make_shared<const DispersionGrid>(build_dispersion(c, M));
    if (!has_beta) beta = default_beta(*g);
    const CollisionTable t = build_collision_table(g, beta, xi2);
    fs::create_directories(ctx.out);
    save_collision_table(ctx.file("collision_table.bin"), t, ctx.hash);
    Stream rng(ctx.seed, 0);
    double db = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t k = rng.below(g->size()), kp = rng.below(g->size());
        const double a = g->omega[k] * g->omega[k] * t.kernel(k, kp);
        const double b = g->omega[kp] * g->omega[kp] * t.kernel(kp, k);
        db = std::max(db, std::abs(a - b) / std::max(std::abs(a), 1e-300));
    }
    json theta = json::array();
    for (int i = 0; i < theta_points; ++i) {
        const std::size_t k = rng.below(g->size());
        const cplx th = theta_plus(*g, t.buckets, g->omega[k], beta);
        theta.push_back({{"k", {g->k(k)[0], g->k(k)[1], g->k(k)[2]}},
                         {"re_theta", th.real()},
                         {"im_theta", th.imag()},
                         {"half_sigma", 0.5 * t.sigma[k] / std::max(xi2, 1e-300)},
                         {"relative_gap", std::abs(th.real() - 0.5 * t.sigma[k] / xi2) / (t.sigma[k] / xi2)}});
    }
    const double min_acc = *std::min_element(t.bucket_acceptance.begin(), t.bucket_acceptance.end());
    json j{{"M", M},
           {"beta", beta},
           {"xi2", xi2},
           {"sigma_min", t.sigma_min},
           {"sigma_max", t.sigma_max},
           {"sigma_bound", 2.0 * g->omega_max * g->omega_max * xi2 / beta},
           {"rejection_cap", t.rejection_cap},
           {"min_acceptance", min_acc},
           {"frequency_buckets", t.buckets.omega.size()},
           {"detailed_balance_max_relative", db},
           {"theta", theta}};
    write_json(ctx.file("kernel.json"), ctx.with_meta(j));
    if (write_sigma) {
        std::vector<std::vector<double>> rows;
        rows.reserve(g->size());
        for (std::size_t i = 0; i < g->size(); ++i) {
            const Vec3 k = g->k(i);
            rows.push_back({k[0], k[1], k[2], g->omega[i], t.sigma[i]});
        }
        write_table_csv(ctx.file("sigma.csv"), {"kx", "ky", "kz", "omega", "sigma"}, rows, ctx.meta());
    }
    *ctx.log << "beta=" << beta << " sigma in [" << t.sigma_min << ", " << t.sigma_max << "]\n";
    return 0;
}

int cmd_simulate(Context& ctx) {
    ConfigReader r(ctx.config, "config");
    read_common(r, ctx);
    DisorderRunConfig rc;
    rc.couplings = parse_couplings(r.child("couplings"));
    rc.L = r.require<int>("L");
    rc.epsilon = r.require<double>("epsilon");
    rc.t_bar = r.require<double>("t_bar");
    rc.dt_factor = r.get<double>("dt_factor", 0.1);
    rc.realizations = r.get<std::size_t>("realizations", 10);
    rc.law = parse_disorder_law(r.get<std::string>("law", "rademacher"));
    const InitialConfig ic = parse_initial(r.child("initial"));
    const auto obs = r.has("observables") ? parse_observables(r.child("observables"), r.path("observables"))
                                          : default_observables();
    const bool snapshot = r.get<bool>("snapshot", false);
    r.finish();
    if (rc.L < 8 || rc.L % 2) throw ConfigError("config.L: must be even and >= 8");
    if (!(rc.epsilon > 0.0)) throw ConfigError("config.epsilon: must be positive");
    check_mass_positivity(law_bound(rc.law), rc.epsilon);
    if (!(rc.t_bar >= 0.0)) throw ConfigError("config.t_bar: must be non-negative");
    if (rc.realizations < 2) throw ConfigError("config.realizations: must be at least 2");
    if (!(rc.dt_factor > 0.0 && rc.dt_factor < VerletIntegrator::kStabilityFactor))
        throw ConfigError("config.dt_factor: must lie in (0, 2)");
    for (const auto& o : obs)
        for (int n : o.n)
            if (std::abs(n) > rc.L / 2) throw ConfigError("config.observables: lag exceeds L/2");
    if (ctx.validate_only) return 0;

    const WkbResult init = ic.lattice_state(rc.epsilon, rc.L);
    if (!init.tight) *ctx.log << init.warning << "\n";
    rc.initial = init.psi;
    rc.seed = ctx.seed;
    rc.workers = ctx.workers;
    const DisorderAverageResult dr = disorder_average(rc, obs);
    fs::create_directories(ctx.out);
    write_estimates_csv(ctx.file("wigner.csv"), dr.estimates, ctx.meta());
    json j{{"epsilon", rc.epsilon},
           {"L", rc.L},
           {"t_bar", rc.t_bar},
           {"dt", dr.dt},
           {"steps", dr.steps},
           {"attempted", dr.attempted},
           {"dropped", dr.dropped},
           {"bound_violations", dr.bound_violations},
           {"max_bound_ratio", dr.max_bound_ratio},
           {"norm_plus_mean", dr.norm_plus.mean},
           {"initial_norm_plus", init.psi.norm2_plus()},
           {"outside_fraction", init.outside_fraction},
           {"tight", init.tight}};
    if (!init.warning.empty()) j["warning"] = init.warning;
    if (snapshot) {
        // Final state of realization 0, written as a binary container.
        const Lattice lat(rc.couplings, rc.L);
        Workspace ws(lat);
        const DisorderField xi = sample_disorder(rc.L, rc.law, realization_seed(rc.seed, 0));
        LatticeState s = from_wavefunction(init.psi, xi, ws);
        s.epsilon = rc.epsilon;
        VerletIntegrator integ(ws, xi, rc.epsilon);
        integ.advance(s, integ.default_dt(rc.dt_factor), rc.t_bar / rc.epsilon);
        save_snapshot(ctx.file("snapshot_r0.bin"), s, ctx.meta());
        j["snapshot"] = "snapshot_r0.bin";
    }
    write_json(ctx.file("simulate.json"), ctx.with_meta(j));
    *ctx.log << "realizations=" << dr.attempted - dr.dropped << " F(0,0)=" << dr.estimates.front().mean.real() << "\n";
    return 0;
}

int cmd_boltzmann(Context& ctx) {
    ConfigReader r(ctx.config, "config");
    read_common(r, ctx);
    const Couplings c = parse_couplings(r.child("couplings"));
    const int M = r.get<int>("M", 48);
    const bool has_beta = r.has("beta");
    double beta = r.get<double>("beta", 0.0);
    const double xi2 = r.get<double>("xi2", 1.0);
    const auto particles = r.get<std::size_t>("particles", 200000);
    const double t_bar = r.require<double>("t_bar");
    const InitialConfig ic = parse_initial(r.child("initial"));
    const auto obs = r.has("observables") ? parse_observables(r.child("observables"), r.path("observables"))
                                          : default_observables();
    bool dyson = false;
    int m_max = 8;
    std::size_t dyson_samples = 100000;
    double tail = 1e-3;
    if (r.has("dyson")) {
        ConfigReader d(r.child("dyson"), r.path("dyson"));
        dyson = true;
        m_max = d.get<int>("m_max", m_max);
        dyson_samples = d.get<std::size_t>("samples", dyson_samples);
        tail = d.get<double>("tail_tolerance", tail);
        d.finish();
    }
    r.finish();
    if (M < 8 || M % 2) throw ConfigError("config.M: must be even and >= 8");
    if (has_beta && !(beta > 0.0 && beta <= 1.0)) throw ConfigError("config.beta: must lie in (0, 1]");
    if (particles < 1) throw ConfigError("config.particles: must be at least 1");
    if (!(t_bar >= 0.0)) throw ConfigError("config.t_bar: must be non-negative");
    if (dyson && (m_max < 0 || m_max > 8)) throw ConfigError("config.dyson.m_max: must lie in [0, 8]");
    if (dyson && dyson_samples < 1000) throw ConfigError("config.dyson.samples: must be at least 1000");
    if (ctx.validate_only) return 0;

    auto g = std::make_shared<const DispersionGrid>(build_dispersion(c, M));
    if (!has_beta) beta = default_beta(*g);
    const CollisionTable t = build_collision_table(g, beta, xi2);
    const InitialData init = ic.kinetic_initial();
    const ParticleEnsemble e0 = sample_initial(init, *g, particles, 0.0, Stream(ctx.seed, 1)());
    const ParticleEnsemble et = simulate(t, e0, t_bar, Stream(ctx.seed, 2)(), ctx.workers);
    const auto est = characteristic_function(et, *g, obs);
    fs::create_directories(ctx.out);
    write_estimates_csv(ctx.file("boltzmann.csv"), est, ctx.meta());
    double collisions = 0.0;
    for (const auto& p : et.particles) collisions += p.collisions;
    json j{{"M", M},
           {"beta", beta},
           {"xi2", xi2},
           {"t_bar", t_bar},
           {"particles", particles},
           {"total_weight", et.total_weight},
           {"mean_collisions", collisions / double(et.particles.size())},
           {"sigma_min", t.sigma_min},
           {"sigma_max", t.sigma_max}};
    if (dyson) {
        const DysonResult d = dyson_characteristic(init, t, t_bar, obs, m_max, dyson_samples, Stream(ctx.seed, 3)(),
                                                   tail, ctx.workers);
        write_estimates_csv(ctx.file("dyson.csv"), d.estimates, ctx.meta());
        j["dyson"] = {{"m_max", m_max},
                      {"samples", dyson_samples},
                      {"truncation_bound", d.truncation_bound},
                      {"truncation_warning", d.truncation_warning},
                      {"warning", d.warning}};
        if (d.truncation_warning) *ctx.log << "warning: " << d.warning << "\n";
    }
    write_json(ctx.file("boltzmann.json"), ctx.with_meta(j));
    *ctx.log << "mass=" << et.total_weight << " mean collisions=" << collisions / double(et.particles.size()) << "\n";
    return 0;
}

int cmd_compare(Context& ctx) {
    json cfgj = ctx.config;
    ConvergenceConfig cfg = parse_convergence(cfgj);
    ctx.seed = cfg.seed;
    ctx.hash = cfg.config_hash;
    if (ctx.out.empty()) ctx.out = cfg.output_dir.empty() ? fs::path("kinlim_out") : fs::path(cfg.output_dir);
    cfg.output_dir = ctx.out.string();
    // Guards are checked by run_convergence before compute; run them here for --validate-only.
    const DispersionGrid guard = build_dispersion(cfg.couplings, std::max(16, cfg.boltzmann.M));
    for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
        const double need = wrap_guard_required(cfg, guard, cfg.epsilons[i]);
        if (double(cfg.L[i]) < need)
            throw ConfigError("wrap-around guard: L=" + std::to_string(cfg.L[i]) + " below required " +
                              std::to_string(need));
    }
    if (ctx.validate_only) return 0;
    const ConvergenceReport rep = run_convergence(cfg);
    json s;
    s["err"] = json::array();
    for (const auto& e : rep.per_epsilon) s["err"].push_back({{"epsilon", e.epsilon}, {"L", e.L}, {"err", e.err}});
    s["criteria"] = json::object();
    s["criteria"]["kinetic_limit_convergence"] = {
        {"pass", rep.err_strictly_decreasing && rep.final_below_ceiling && rep.wigner_bound_ok},
        {"err_strictly_decreasing", rep.err_strictly_decreasing},
        {"final_below_ceiling", rep.final_below_ceiling},
        {"ceiling", cfg.final_ceiling},
        {"wigner_bound_ok", rep.wigner_bound_ok}};
    if (cfg.energy.enabled) {
        const EnergyTransportReport et = energy_transport_from(rep);
        const bool ratio_ok = et.initial_ratio >= 0.8 * et.expected_ratio && et.initial_ratio <= 1.2 * et.expected_ratio;
        s["criteria"]["energy_transport"] = {{"pass", et.gap_decreasing && ratio_ok},
                                             {"gap_decreasing", et.gap_decreasing},
                                             {"initial_ratio", et.initial_ratio},
                                             {"expected_ratio", et.expected_ratio},
                                             {"initial_ratio_in_band", ratio_ok}};
        write_json(ctx.file("energy_transport.json"), ctx.with_meta(et.to_json()));
    }
    if (rep.dyson && rep.dyson->truncation_warning) s["warnings"] = {rep.dyson->warning};
    write_json(ctx.file("summary.json"), ctx.with_meta(s));
    for (const auto& e : rep.per_epsilon) *ctx.log << "epsilon=" << e.epsilon << " err=" << e.err << "\n";
    return 0;
}

int cmd_cumulants(Context& ctx) {
    ConfigReader r(ctx.config, "config");
    read_common(r, ctx);
    const DisorderLaw law = parse_disorder_law(r.get<std::string>("law", "uniform"));
    const int n_max = r.get<int>("n_max", 10);
    const auto samples = r.get<std::size_t>("samples", 1000000);
    std::vector<std::vector<IVec3>> patterns;
    if (r.has("patterns")) {
        const json& pj = r.child("patterns");
        if (!pj.is_array()) throw ConfigError("config.patterns: expected a list of site lists");
        for (const auto& p : pj) {
            if (!p.is_array() || p.empty() || p.size() > 10) throw ConfigError("config.patterns: each pattern needs 1..10 sites");
            std::vector<IVec3> sites;
            for (const auto& y : p) {
                if (!y.is_array() || y.size() != 3) throw ConfigError("config.patterns: sites are [i,j,k]");
                sites.push_back({y[0].get<int>(), y[1].get<int>(), y[2].get<int>()});
            }
            patterns.push_back(sites);
        }
    }
    r.finish();
    if (law == DisorderLaw::none) throw ConfigError("config.law: must be uniform or rademacher");
    if (n_max < 1 || n_max > 10) throw ConfigError("config.n_max: must lie in [1, 10]");
    if (samples < 10000) throw ConfigError("config.samples: must be at least 1e4");
    if (ctx.validate_only) return 0;

    const CumulantVector cum = cumulants_of(law, n_max);
    const CumulantBoundReport bound = check_cumulant_bound(cum);
    json j;
    j["law"] = to_string(law);
    j["xi_bar"] = cum.xi_bar;
    j["cumulants"] = json::array();
    for (int n = 1; n <= n_max; ++n)
        j["cumulants"].push_back({{"n", n}, {"exact", to_string(cum.exact[std::size_t(n)])}, {"value", cum(n)}});
    j["bound"] = json::array();
    for (const auto& b : bound.rows)
        j["bound"].push_back({{"n", b.n}, {"value", b.value}, {"bound", b.bound}, {"pass", b.pass}});
    j["bound_pass"] = bound.all_pass();
    j["partition_counts"] = json::array();
    for (int n = 1; n <= 10; ++n) {
        std::uint64_t count = 0;
        for_each_partition(n, [&](const std::vector<int>&, int) { ++count; });
        j["partition_counts"].push_back({{"N", n}, {"count", count}, {"bell", bell_number(n)}});
    }
    j["patterns"] = json::array();
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        const MomentCheck m = verify_moment_mc(patterns[i], law, samples, Stream(ctx.seed, i)(), ctx.workers);
        json sites = json::array();
        for (const auto& y : patterns[i]) sites.push_back({y[0], y[1], y[2]});
        j["patterns"].push_back({{"sites", sites},
                                 {"formula", m.formula},
                                 {"mc", m.mc},
                                 {"stderr", m.stderr_},
                                 {"z", std::isfinite(m.z) ? json(m.z) : json("inf")},
                                 {"samples", m.samples}});
    }
    fs::create_directories(ctx.out);
    write_json(ctx.file("cumulants.json"), ctx.with_meta(j));
    *ctx.log << "law=" << to_string(law) << " C4=" << to_string(cum.exact.at(std::min(4, n_max))) << "\n";
    return 0;
}

int cmd_crossing(Context& ctx) {
    ConfigReader r(ctx.config, "config");
    read_common(r, ctx);
    const Couplings c = parse_couplings(r.child("couplings"));
    const int M = r.get<int>("M", 32);
    const Vec3 alpha = r.vec3("alpha", {0.0, 0.0, 0.0});
    const IVec3 sigma = r.ivec3("sigma", {1, -1, 1});
    const Vec3 u = r.vec3("u", {0.0, 0.0, 0.0});
    const auto betas = r.get<std::vector<double>>("betas", {0.4, 0.2, 0.1, 0.05});
    const auto samples = r.get<std::size_t>("samples", 200000);
    r.finish();
    if (M < 8 || M % 2) throw ConfigError("config.M: must be even and >= 8");
    for (int s : sigma)
        if (s != 1 && s != -1) throw ConfigError("config.sigma: entries must be +1 or -1");
    for (double b : betas)
        if (!(b > 0.0 && b <= 1.0)) throw ConfigError("config.betas: values must lie in (0, 1]");
    if (betas.size() < 3) throw ConfigError("config.betas: need at least 3 values for the fit");
    if (samples < 10000) throw ConfigError("config.samples: must be at least 1e4");
    if (ctx.validate_only) return 0;

    const DispersionGrid g = build_dispersion(c, M);
    const CrossingSweep sw = crossing_sweep(g, alpha, betas, sigma, u, samples, ctx.seed, ctx.workers);
    json pts = json::array();
    std::vector<std::vector<double>> rows;
    for (const auto& p : sw.points) {
        pts.push_back({{"beta", p.beta}, {"estimate", p.estimate}, {"stderr", p.stderr_}, {"samples", p.samples}});
        rows.push_back({p.beta, p.estimate, p.stderr_});
    }
    json j{{"points", pts},
           {"beta_exponent", sw.fit.slope},
           {"beta_exponent_ci", {sw.fit.ci_low, sw.fit.ci_high}},
           {"empirical_gamma", 1.0 + sw.fit.slope}};
    fs::create_directories(ctx.out);
    write_json(ctx.file("crossing.json"), ctx.with_meta(j));
    write_table_csv(ctx.file("crossing.csv"), {"beta", "estimate", "stderr"}, rows, ctx.meta());
    *ctx.log << "beta exponent=" << sw.fit.slope << "\n";
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kinetic-limit simulator for disordered harmonic lattices", kToolName};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    std::string config_path, output_dir;
    bool validate_only = false;
    const std::vector<std::pair<std::string, std::string>> subs{
        {"dispersion", "Build and diagnose a dispersion relation"},
        {"kernel", "Build the broadened collision table and gate check"},
        {"simulate", "Disorder-averaged lattice Wigner observables"},
        {"boltzmann", "Boltzmann characteristic functions (jump process and Dyson series)"},
        {"compare", "Kinetic-limit convergence study"},
        {"cumulants", "Partitions, cumulants and the moments formula"},
        {"crossing", "Crossing-integral Monte Carlo sweep"}};
    for (const auto& [name, desc] : subs) {
        auto* s = app.add_subcommand(name, desc);
        s->add_option("--config", config_path, "JSON run configuration")->required();
        s->add_option("--output-dir", output_dir, "Artifact directory (overrides config and environment)");
        s->add_flag("--validate-only", validate_only, "Validate the configuration and exit");
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    Context ctx;
    ctx.validate_only = validate_only;
    ctx.log = &err;
    try {
        ctx.config = read_json(config_path);
        ctx.hash = config_hash(ctx.config);
        if (!output_dir.empty()) ctx.out = output_dir;
        else if (const char* env = std::getenv("KINLIM_OUTPUT_DIR"); env && *env) ctx.out = env;
        int rc = 0;
        if (sub == "dispersion") rc = cmd_dispersion(ctx);
        else if (sub == "kernel") rc = cmd_kernel(ctx);
        else if (sub == "simulate") rc = cmd_simulate(ctx);
        else if (sub == "boltzmann") rc = cmd_boltzmann(ctx);
        else if (sub == "compare") rc = cmd_compare(ctx);
        else if (sub == "cumulants") rc = cmd_cumulants(ctx);
        else if (sub == "crossing") rc = cmd_crossing(ctx);
        if (validate_only) out << "config ok: " << sub << " hash=" << ctx.hash << "\n";
        else out << "wrote artifacts to " << ctx.out.string() << "\n";
        return rc;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return 2;
    }
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace kinlim
