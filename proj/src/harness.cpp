#include "kinlim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "kinlim/rng.hpp"
#include "kinlim/stats.hpp"

namespace kinlim {

namespace fs = std::filesystem;

Envelope InitialConfig::envelope() const {
    const double s = width;
    const Vec3 c = centre;
    const double norm = std::pow(std::numbers::pi * s * s, -0.75);
    return [s, c, norm](const Vec3& x) -> cplx {
        const Vec3 d = x - c;
        return norm * std::exp(-dot(d, d) / (2.0 * s * s));
    };
}

Phase InitialConfig::phase() const {
    const Vec3 k = k0, c = centre;
    return [k, c](const Vec3& x) { return kTwoPi * dot(k, x - c); };
}

InitialData InitialConfig::kinetic_initial() const {
    if (kind == Kind::point) return PointInitial{point};
    WkbInitial w;
    w.h = envelope();
    w.S = phase();
    const Vec3 g = kTwoPi * k0;
    w.grad_S = [g](const Vec3&) { return g; };
    w.centre = centre;
    w.extent = extent > 0.0 ? extent : 6.0 * width;
    w.bins = bins;
    return w;
}

WkbResult InitialConfig::lattice_state(double epsilon, int L) const {
    if (kind == Kind::wkb) return wkb_state(envelope(), phase(), epsilon, L);
    WkbResult r;
    r.psi = point_state(point, L, epsilon);
    r.mass_in_box = r.psi.norm2_plus();
    return r;
}

double InitialConfig::mass_radius() const {
    if (kind == Kind::point) return 0.0;
    // |h|^2 is an isotropic normal law with per-axis variance s^2/2.
    const boost::math::chi_squared chi(3.0);
    return width * std::sqrt(0.5 * boost::math::quantile(chi, 0.99)) + norm(centre);
}

double InitialConfig::diameter_sites(double epsilon) const {
    if (kind == Kind::wkb) return 2.0 * mass_radius() / epsilon;
    int r = 0;
    for (const auto& [y, z] : point)
        for (int v : y) r = std::max(r, std::abs(v));
    return 2.0 * r + 1.0;
}

double wrap_guard_required(const ConvergenceConfig& cfg, const DispersionGrid& g, double epsilon) {
    const double vmax = g.max_grad_norm() / kTwoPi;
    return 1.5 * (vmax * cfg.t_bar / epsilon + cfg.initial.diameter_sites(epsilon));
}

namespace {

double gaussian_f(const Vec3& x, double w) { return std::exp(-dot(x, x) / (2.0 * w * w)); }

json observable_json(const Observable& o) { return {{"p", {o.p[0], o.p[1], o.p[2]}}, {"n", {o.n[0], o.n[1], o.n[2]}}}; }

json real_json(const RealEstimate& r) {
    return {{"name", r.name}, {"mean", r.mean}, {"stderr", r.stderr_}, {"realizations", r.realizations}};
}

RealEstimate real_from(const json& j) {
    return {j.at("name").get<std::string>(), j.at("mean").get<double>(), j.at("stderr").get<double>(),
            j.at("realizations").get<std::size_t>()};
}

WignerEstimate estimate_from(const json& j) {
    WignerEstimate e;
    for (int i = 0; i < 3; ++i) {
        e.obs.p[std::size_t(i)] = j.at("p").at(std::size_t(i)).get<double>();
        e.obs.n[std::size_t(i)] = j.at("n").at(std::size_t(i)).get<int>();
    }
    e.mean = {j.at("re_mean").get<double>(), j.at("im_mean").get<double>()};
    e.stderr_ = {j.at("re_se").get<double>(), j.at("im_se").get<double>()};
    e.realizations = j.at("realizations").get<std::size_t>();
    return e;
}

double abs_se(const cplx& se) { return std::hypot(se.real(), se.imag()); }

// Microscopic stage output persisted per epsilon so studies can resume.
struct MicroStage {
    std::vector<WignerEstimate> micro;
    std::optional<RealEstimate> energy, initial_energy;
    double initial_wigner = 0.0;
    double outside_fraction = 0.0;
    bool tight = true;
    double norm_plus_initial = 0.0;
    std::size_t bound_violations = 0;
    double max_bound_ratio = 0.0;
    std::size_t dropped = 0, realizations = 0, steps = 0;
    double dt = 0.0;

    json to_json() const {
        json j;
        j["micro"] = json::array();
        for (const auto& e : micro) j["micro"].push_back(estimate_to_json(e));
        if (energy) j["energy"] = real_json(*energy);
        if (initial_energy) j["initial_energy"] = real_json(*initial_energy);
        j["initial_wigner"] = initial_wigner;
        j["outside_fraction"] = outside_fraction;
        j["tight"] = tight;
        j["norm_plus_initial"] = norm_plus_initial;
        j["bound_violations"] = bound_violations;
        j["max_bound_ratio"] = max_bound_ratio;
        j["dropped"] = dropped;
        j["realizations"] = realizations;
        j["steps"] = steps;
        j["dt"] = dt;
        return j;
    }

    static MicroStage from_json(const json& j) {
        MicroStage m;
        for (const auto& e : j.at("micro")) m.micro.push_back(estimate_from(e));
        if (j.contains("energy")) m.energy = real_from(j["energy"]);
        if (j.contains("initial_energy")) m.initial_energy = real_from(j["initial_energy"]);
        m.initial_wigner = j.at("initial_wigner").get<double>();
        m.outside_fraction = j.at("outside_fraction").get<double>();
        m.tight = j.at("tight").get<bool>();
        m.norm_plus_initial = j.at("norm_plus_initial").get<double>();
        m.bound_violations = j.at("bound_violations").get<std::size_t>();
        m.max_bound_ratio = j.at("max_bound_ratio").get<double>();
        m.dropped = j.at("dropped").get<std::size_t>();
        m.realizations = j.at("realizations").get<std::size_t>();
        m.steps = j.at("steps").get<std::size_t>();
        m.dt = j.at("dt").get<double>();
        return m;
    }
};

void validate(const ConvergenceConfig& cfg) {
    if (cfg.epsilons.empty()) throw ConfigError("epsilon ladder is empty");
    if (cfg.L.size() != cfg.epsilons.size()) throw ConfigError("need one lattice side L per epsilon");
    for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
        if (!(cfg.epsilons[i] > 0.0)) throw ConfigError("epsilon values must be positive");
        if (i > 0 && !(cfg.epsilons[i] < cfg.epsilons[i - 1])) throw ConfigError("epsilon ladder must be strictly decreasing");
        if (cfg.L[i] < 8 || cfg.L[i] % 2) throw ConfigError("lattice sides must be even and at least 8");
        check_mass_positivity(law_bound(cfg.law), cfg.epsilons[i]);
    }
    if (!(cfg.t_bar >= 0.0)) throw ConfigError("t_bar must be non-negative");
    if (cfg.realizations < 2) throw ConfigError("need at least 2 realizations per epsilon");
    const Observable zero{};
    if (std::find(cfg.observables.begin(), cfg.observables.end(), zero) == cfg.observables.end())
        throw ConfigError("observable set must include (p,n) = (0,0)");
    if (cfg.boltzmann.particles < 1) throw ConfigError("Boltzmann solver needs at least one particle");
    if (cfg.energy.enabled && !(cfg.energy.f_width > 0.0)) throw ConfigError("energy test function width must be positive");
}

std::string stage_path(const ConvergenceConfig& cfg, std::size_t i) {
    std::ostringstream os;
    os << "micro_eps" << i << ".json";
    return (fs::path(cfg.output_dir) / os.str()).string();
}

}  // namespace

ConvergenceReport run_convergence(const ConvergenceConfig& cfg) {
    validate(cfg);
    const ArtifactMeta meta{cfg.config_hash, cfg.seed};
    if (!cfg.output_dir.empty()) fs::create_directories(cfg.output_dir);

    // Guards first so that a bad box refuses to run before any compute.
    const DispersionGrid guard_grid = build_dispersion(cfg.couplings, std::max(16, cfg.boltzmann.M));
    for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
        const double need = wrap_guard_required(cfg, guard_grid, cfg.epsilons[i]);
        if (double(cfg.L[i]) < need) {
            std::ostringstream os;
            os << "wrap-around guard: L=" << cfg.L[i] << " at epsilon=" << cfg.epsilons[i] << " is below the required "
               << need;
            throw GuardError(os.str());
        }
    }

    ConvergenceReport rep;
    rep.config_hash = cfg.config_hash;
    rep.seed = cfg.seed;

    // Kinetic reference, computed once.
    auto g = std::make_shared<const DispersionGrid>(build_dispersion(cfg.couplings, cfg.boltzmann.M));
    CollisionTable table;
    bool cached = false;
    const std::string table_hash =
        config_hash({{"couplings", couplings_to_json(cfg.couplings)}, {"M", cfg.boltzmann.M},
                     {"beta", cfg.boltzmann.beta}, {"xi2", cfg.boltzmann.xi2}, {"version", kToolVersion}});
    const std::string table_path =
        cfg.output_dir.empty() ? std::string() : (fs::path(cfg.output_dir) / "collision_table.bin").string();
    if (!table_path.empty() && cfg.resume)
        cached = load_collision_table(table_path, g, cfg.boltzmann.beta, cfg.boltzmann.xi2, table_hash, table);
    if (!cached) {
        table = build_collision_table(g, cfg.boltzmann.beta, cfg.boltzmann.xi2);
        if (!table_path.empty()) save_collision_table(table_path, table, table_hash);
    }
    rep.sigma_min = table.sigma_min;
    rep.sigma_max = table.sigma_max;

    const InitialData init = cfg.initial.kinetic_initial();
    const std::uint64_t seed_init = Stream(cfg.seed, 1)();
    const std::uint64_t seed_sim = Stream(cfg.seed, 2)();
    const std::uint64_t seed_dyson = Stream(cfg.seed, 3)();
    const ParticleEnsemble e0 = sample_initial(init, *g, cfg.boltzmann.particles, 0.0, seed_init);
    const ParticleEnsemble et = simulate(table, e0, cfg.t_bar, seed_sim, cfg.workers);
    const std::vector<WignerEstimate> bz = characteristic_function(et, *g, cfg.observables);
    rep.boltzmann_mass = et.total_weight;
    if (cfg.boltzmann.dyson)
        rep.dyson = dyson_characteristic(init, table, cfg.t_bar, cfg.observables, cfg.boltzmann.m_max,
                                         cfg.boltzmann.dyson_samples, seed_dyson, cfg.boltzmann.tail_tolerance,
                                         cfg.workers);

    // 2 int mu_t f with a jackknife error.
    double kin_f = 0.0, kin_f_se = 0.0;
    if (cfg.energy.enabled) {
        const std::size_t N = et.particles.size();
        std::vector<double> a(N);
        for (std::size_t j = 0; j < N; ++j)
            a[j] = 2.0 * et.particles[j].weight * gaussian_f(et.particles[j].x, cfg.energy.f_width);
        double sum = 0.0;
        for (double x : a) sum += x;
        const double mean = sum / double(N);
        double v = 0.0;
        for (double x : a) v += (x - mean) * (x - mean);
        kin_f = sum;
        kin_f_se = N > 1 ? std::sqrt(double(N) / double(N - 1) * v) : 0.0;
    }

    for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
        const double eps = cfg.epsilons[i];
        const int L = cfg.L[i];
        EpsilonResult er;
        er.epsilon = eps;
        er.L = L;
        er.guard_required = wrap_guard_required(cfg, guard_grid, eps);

        MicroStage stage;
        bool loaded = false;
        const std::string path = cfg.output_dir.empty() ? std::string() : stage_path(cfg, i);
        if (!path.empty() && cfg.resume && !cfg.config_hash.empty() && fs::exists(path)) {
            try {
                const json j = read_json(path);
                if (j.at("meta").at("config_hash") == cfg.config_hash && j.at("meta").at("version") == kToolVersion &&
                    j.at("epsilon").get<double>() == eps && j.at("L").get<int>() == L) {
                    stage = MicroStage::from_json(j.at("stage"));
                    loaded = true;
                }
            } catch (const std::exception&) {
                loaded = false;
            }
        }
        if (!loaded) {
            const WkbResult init = cfg.initial.lattice_state(eps, L);
            stage.outside_fraction = init.outside_fraction;
            stage.tight = init.tight;
            stage.norm_plus_initial = init.psi.norm2_plus();

            DisorderRunConfig rc;
            rc.couplings = cfg.couplings;
            rc.L = L;
            rc.epsilon = eps;
            rc.t_bar = cfg.t_bar;
            rc.dt_factor = cfg.dt_factor;
            rc.realizations = cfg.realizations;
            rc.law = cfg.law;
            rc.seed = Stream(cfg.seed, 100 + i)();
            rc.workers = cfg.workers;
            rc.coupling = InitialCoupling::exact;
            rc.initial = init.psi;
            if (cfg.energy.enabled) {
                const double fw = cfg.energy.f_width;
                const TestFunction f = [fw](const Vec3& x) { return gaussian_f(x, fw); };
                rc.scalars.push_back({"energy_f", [f, eps](const LatticeState& s, const DisorderField& xi, Workspace& ws) {
                                          return energy_density_pairing(s, xi, eps, f, ws);
                                      }});
                // Disorder-free lattice data (q0, v0) built once from psi^eps.
                const Lattice lat(cfg.couplings, L);
                auto free0 = std::make_shared<const LatticeState>(from_wavefunction(init.psi, lat));
                rc.initial_scalars.push_back(
                    {"energy_f_initial", [f, eps, free0](const LatticeState&, const DisorderField& xi, Workspace& ws) {
                         LatticeState s = *free0;
                         s.epsilon = eps;
                         return energy_density_pairing(s, xi, eps, f, ws);
                     }});
                double wsum = 0.0;
                for (std::size_t y = 0; y < init.psi.psi_plus.size(); ++y)
                    wsum += f(eps * to_vec(lat.coords(y))) * std::norm(init.psi.psi_plus[y]);
                stage.initial_wigner = 2.0 * wsum;
            }
            const DisorderAverageResult dr = disorder_average(rc, cfg.observables);
            stage.micro = dr.estimates;
            if (cfg.energy.enabled) {
                stage.energy = dr.scalars.at(0);
                stage.initial_energy = dr.initial_scalars.at(0);
            }
            stage.bound_violations = dr.bound_violations;
            stage.max_bound_ratio = dr.max_bound_ratio;
            stage.dropped = dr.dropped;
            stage.realizations = dr.attempted - dr.dropped;
            stage.steps = dr.steps;
            stage.dt = dr.dt;
            if (!path.empty()) {
                json j;
                j["meta"] = meta.to_json();
                j["epsilon"] = eps;
                j["L"] = L;
                j["stage"] = stage.to_json();
                write_json(path, j);
                std::ostringstream csv;
                csv << "wigner_eps" << i << ".csv";
                write_estimates_csv((fs::path(cfg.output_dir) / csv.str()).string(), stage.micro, meta);
            }
        }
        er.resumed = loaded;
        er.outside_fraction = stage.outside_fraction;
        er.tight = stage.tight;
        er.norm_plus_initial = stage.norm_plus_initial;
        er.bound_violations = stage.bound_violations;
        er.max_bound_ratio = stage.max_bound_ratio;
        er.dropped = stage.dropped;
        er.realizations = stage.realizations;
        er.dt = stage.dt;
        er.steps = stage.steps;

        double worst = 0.0;
        for (std::size_t o = 0; o < cfg.observables.size(); ++o) {
            ObservableRow row;
            row.obs = cfg.observables[o];
            row.micro = stage.micro.at(o);
            row.boltzmann = bz[o];
            if (rep.dyson) row.dyson = rep.dyson->estimates[o];
            row.gap = std::abs(row.micro.mean - row.boltzmann.mean);
            row.gap_stderr = std::hypot(abs_se(row.micro.stderr_), abs_se(row.boltzmann.stderr_));
            worst = std::max(worst, row.gap);
            er.rows.push_back(row);
        }
        er.err = worst / rep.boltzmann_mass;

        if (cfg.energy.enabled) {
            EnergyTransportRow et_row;
            et_row.epsilon = eps;
            et_row.micro = *stage.energy;
            et_row.kinetic = kin_f;
            et_row.kinetic_stderr = kin_f_se;
            et_row.gap = std::abs(et_row.micro.mean - kin_f);
            et_row.gap_stderr = std::hypot(et_row.micro.stderr_, kin_f_se);
            et_row.initial_micro = *stage.initial_energy;
            et_row.initial_wigner = stage.initial_wigner;
            et_row.initial_gap = std::abs(et_row.initial_micro.mean - stage.initial_wigner);
            et_row.initial_gap_stderr = et_row.initial_micro.stderr_;
            er.energy = et_row;
        }
        rep.per_epsilon.push_back(std::move(er));
    }

    rep.err_strictly_decreasing = true;
    rep.wigner_bound_ok = true;
    for (std::size_t i = 0; i < rep.per_epsilon.size(); ++i) {
        if (i > 0 && !(rep.per_epsilon[i].err < rep.per_epsilon[i - 1].err)) rep.err_strictly_decreasing = false;
        if (rep.per_epsilon[i].bound_violations > 0) rep.wigner_bound_ok = false;
    }
    rep.final_below_ceiling = rep.per_epsilon.back().err <= cfg.final_ceiling;

    if (!cfg.output_dir.empty()) {
        const fs::path out(cfg.output_dir);
        write_estimates_csv((out / "boltzmann.csv").string(), bz, meta);
        if (rep.dyson) write_estimates_csv((out / "dyson.csv").string(), rep.dyson->estimates, meta);
        std::vector<std::vector<double>> err_rows;
        for (const auto& r : rep.per_epsilon) err_rows.push_back({r.epsilon, double(r.L), r.err});
        write_table_csv((out / "err.csv").string(), {"epsilon", "L", "err"}, err_rows, meta);
        std::vector<std::vector<double>> gap_rows;
        for (const auto& r : rep.per_epsilon)
            for (const auto& row : r.rows)
                gap_rows.push_back({r.epsilon, row.obs.p[0], row.obs.p[1], row.obs.p[2], double(row.obs.n[0]),
                                    double(row.obs.n[1]), double(row.obs.n[2]), row.micro.mean.real(),
                                    row.micro.mean.imag(), row.boltzmann.mean.real(), row.boltzmann.mean.imag(),
                                    row.gap, row.gap_stderr});
        write_table_csv((out / "gaps.csv").string(),
                        {"epsilon", "px", "py", "pz", "n1", "n2", "n3", "re_micro", "im_micro", "re_boltzmann",
                         "im_boltzmann", "gap", "gap_se"},
                        gap_rows, meta);
        json rj = rep.to_json();
        write_json((out / "report.json").string(), rj);
    }
    return rep;
}

json ConvergenceReport::to_json() const {
    json j;
    j["meta"] = ArtifactMeta{config_hash, seed}.to_json();
    j["boltzmann_mass"] = boltzmann_mass;
    j["sigma_min"] = sigma_min;
    j["sigma_max"] = sigma_max;
    if (dyson) {
        j["dyson"] = {{"truncation_bound", dyson->truncation_bound},
                      {"truncation_warning", dyson->truncation_warning},
                      {"warning", dyson->warning},
                      {"samples", dyson->samples},
                      {"m_max", dyson->m_max}};
    }
    j["err"] = json::array();
    for (const auto& r : per_epsilon) {
        json e{{"epsilon", r.epsilon},
               {"L", r.L},
               {"err", r.err},
               {"guard_required_L", r.guard_required},
               {"box_occupancy", r.guard_required / r.L},
               {"outside_fraction", r.outside_fraction},
               {"tight", r.tight},
               {"norm_plus_initial", r.norm_plus_initial},
               {"bound_violations", r.bound_violations},
               {"max_bound_ratio", r.max_bound_ratio},
               {"dropped", r.dropped},
               {"realizations", r.realizations},
               {"dt", r.dt},
               {"steps", r.steps},
               {"resumed", r.resumed}};
        e["observables"] = json::array();
        for (const auto& row : r.rows) {
            json o = observable_json(row.obs);
            o["micro"] = estimate_to_json(row.micro);
            o["boltzmann"] = estimate_to_json(row.boltzmann);
            if (row.dyson) o["dyson"] = estimate_to_json(*row.dyson);
            o["gap"] = row.gap;
            o["gap_stderr"] = row.gap_stderr;
            e["observables"].push_back(o);
        }
        if (r.energy) {
            const auto& en = *r.energy;
            e["energy_transport"] = {{"micro", real_json(en.micro)},
                                     {"kinetic", en.kinetic},
                                     {"kinetic_stderr", en.kinetic_stderr},
                                     {"gap", en.gap},
                                     {"gap_stderr", en.gap_stderr},
                                     {"initial_micro", real_json(en.initial_micro)},
                                     {"initial_wigner", en.initial_wigner},
                                     {"initial_gap", en.initial_gap},
                                     {"initial_gap_stderr", en.initial_gap_stderr}};
        }
        j["err"].push_back(e);
    }
    j["err_strictly_decreasing"] = err_strictly_decreasing;
    j["final_below_ceiling"] = final_below_ceiling;
    j["wigner_bound_ok"] = wigner_bound_ok;
    return j;
}

FreeFlightReport free_flight_check(const FreeFlightConfig& cfg) {
    if (cfg.snapshots < 3) throw ConfigError("free flight needs at least 3 snapshots");
    if (!(cfg.t_bar > 0.0)) throw ConfigError("free flight duration must be positive");
    const Lattice lat(cfg.couplings, cfg.L);
    Workspace ws(lat);
    const DisorderField xi = zero_disorder(cfg.L);
    InitialConfig ic;
    ic.width = cfg.width;
    ic.centre = cfg.start;
    ic.k0 = cfg.k0;
    const WkbResult init = ic.lattice_state(cfg.epsilon, cfg.L);
    LatticeState s = from_wavefunction(init.psi, ws);
    s.epsilon = cfg.epsilon;
    VerletIntegrator integ(ws, xi, cfg.epsilon);
    const double dt = integ.default_dt(cfg.dt_factor);
    const double T = cfg.t_bar / cfg.epsilon;
    const int edge = cfg.L / 2 - 2;

    FreeFlightReport rep;
    std::vector<double> cx[3];
    for (int j = 0; j < cfg.snapshots; ++j) {
        if (j > 0) integ.advance(s, dt, T / (cfg.snapshots - 1));
        const std::vector<double> e = energy_density(s, xi, ws);
        double tot = 0.0, border = 0.0;
        Vec3 c{0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < e.size(); ++i) {
            const IVec3 y = lat.coords(i);
            tot += e[i];
            c = c + (e[i] * cfg.epsilon) * to_vec(y);
            if (std::abs(y[0]) >= edge || std::abs(y[1]) >= edge || std::abs(y[2]) >= edge) border += e[i];
        }
        const double frac = border / tot;
        rep.boundary_fraction = std::max(rep.boundary_fraction, frac);
        if (frac > 1e-4) {
            std::ostringstream os;
            os << "packet left the safe box: energy fraction " << frac << " near the boundary at t_bar="
               << cfg.t_bar * j / (cfg.snapshots - 1);
            throw GuardError(os.str());
        }
        c = (1.0 / tot) * c;
        rep.t.push_back(cfg.t_bar * j / (cfg.snapshots - 1));
        rep.centroid.push_back(c);
        for (int a = 0; a < 3; ++a) cx[a].push_back(c[std::size_t(a)]);
    }
    for (int a = 0; a < 3; ++a) {
        const LinearFit f = fit_line(rep.t, cx[a]);
        rep.velocity[std::size_t(a)] = f.slope;
        rep.velocity_stderr[std::size_t(a)] = f.slope_stderr;
    }
    rep.predicted = (1.0 / kTwoPi) * cfg.couplings.omega_gradient(cfg.k0);
    const double pn = norm(rep.predicted);
    rep.relative_error = pn > 1e-12 ? norm(rep.velocity - rep.predicted) / pn : norm(rep.velocity);
    return rep;
}

json FreeFlightReport::to_json() const {
    json j;
    j["velocity"] = {velocity[0], velocity[1], velocity[2]};
    j["velocity_stderr"] = {velocity_stderr[0], velocity_stderr[1], velocity_stderr[2]};
    j["predicted"] = {predicted[0], predicted[1], predicted[2]};
    j["relative_error"] = relative_error;
    j["boundary_fraction"] = boundary_fraction;
    j["trajectory"] = json::array();
    for (std::size_t i = 0; i < t.size(); ++i)
        j["trajectory"].push_back({{"t", t[i]}, {"x", {centroid[i][0], centroid[i][1], centroid[i][2]}}});
    return j;
}

EnergyTransportReport energy_transport_from(const ConvergenceReport& rep) {
    EnergyTransportReport out;
    for (const auto& r : rep.per_epsilon)
        if (r.energy) out.rows.push_back(*r.energy);
    if (out.rows.size() < 2) return out;
    out.gap_decreasing = true;
    for (std::size_t i = 1; i < out.rows.size(); ++i)
        if (!(out.rows[i].gap < out.rows[i - 1].gap)) out.gap_decreasing = false;
    const auto& a = out.rows.front();
    const auto& b = out.rows.back();
    out.initial_ratio = b.initial_gap > 0.0 ? a.initial_gap / b.initial_gap : INFINITY;
    out.expected_ratio = std::sqrt(a.epsilon / b.epsilon);
    return out;
}

EnergyTransportReport energy_transport_check(const ConvergenceConfig& cfg) {
    ConvergenceConfig c = cfg;
    c.energy.enabled = true;
    return energy_transport_from(run_convergence(c));
}

json EnergyTransportReport::to_json() const {
    json j;
    j["rows"] = json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"epsilon", r.epsilon},
                             {"micro", r.micro.mean},
                             {"micro_stderr", r.micro.stderr_},
                             {"kinetic", r.kinetic},
                             {"kinetic_stderr", r.kinetic_stderr},
                             {"gap", r.gap},
                             {"gap_stderr", r.gap_stderr},
                             {"initial_micro", r.initial_micro.mean},
                             {"initial_wigner", r.initial_wigner},
                             {"initial_gap", r.initial_gap},
                             {"initial_gap_stderr", r.initial_gap_stderr}});
    j["gap_decreasing"] = gap_decreasing;
    j["initial_ratio"] = initial_ratio;
    j["expected_ratio"] = expected_ratio;
    return j;
}

}  // namespace kinlim
