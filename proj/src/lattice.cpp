#include "kinlim/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kinlim/rng.hpp"

namespace kinlim {

std::string to_string(DisorderLaw law) {
    switch (law) {
        case DisorderLaw::uniform: return "uniform";
        case DisorderLaw::rademacher: return "rademacher";
        default: return "none";
    }
}

DisorderLaw parse_disorder_law(const std::string& tag) {
    if (tag == "uniform") return DisorderLaw::uniform;
    if (tag == "rademacher") return DisorderLaw::rademacher;
    if (tag == "none") return DisorderLaw::none;
    throw InvalidParameter("unsupported disorder distribution '" + tag + "' (expected uniform or rademacher)");
}

double law_bound(DisorderLaw law) {
    switch (law) {
        case DisorderLaw::uniform: return std::sqrt(3.0);
        case DisorderLaw::rademacher: return 1.0;
        default: return 0.0;
    }
}

DisorderField sample_disorder(int L, DisorderLaw law, std::uint64_t seed) {
    if (L < 4) throw InvalidParameter("disorder field needs L >= 4");
    if (law == DisorderLaw::none) throw InvalidParameter("sample_disorder needs a random law; use zero_disorder");
    DisorderField f;
    f.L = L;
    f.law = law;
    f.seed = seed;
    f.xi_bar = law_bound(law);
    const std::size_t n = std::size_t(L) * L * L;
    f.xi.resize(n);
    Stream rng(seed, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (law == DisorderLaw::uniform) {
            f.xi[i] = f.xi_bar * (2.0 * rng.uniform() - 1.0);
        } else {
            f.xi[i] = (rng() >> 63) ? 1.0 : -1.0;
        }
    }
    return f;
}

DisorderField sample_disorder(int L, DisorderLaw law, double xi_bar, std::uint64_t seed) {
    if (std::abs(xi_bar - law_bound(law)) > 1e-12) {
        std::ostringstream os;
        os << "xi_bar=" << xi_bar << " is incompatible with unit-variance " << to_string(law) << " law (needs "
           << law_bound(law) << ")";
        throw InvalidParameter(os.str());
    }
    return sample_disorder(L, law, seed);
}

DisorderField zero_disorder(int L) {
    DisorderField f;
    f.L = L;
    f.xi.assign(std::size_t(L) * L * L, 0.0);
    return f;
}

void check_mass_positivity(double xi_bar, double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(xi_bar * std::sqrt(epsilon) < 1.0)) {
        std::ostringstream os;
        os << "epsilon=" << epsilon << " violates mass positivity: xi_bar*sqrt(epsilon)=" << xi_bar * std::sqrt(epsilon)
           << " >= 1";
        throw ConfigError(os.str());
    }
}

double WaveField::norm2_plus() const {
    double s = 0.0;
    for (const auto& z : psi_plus) s += std::norm(z);
    return s;
}

double WaveField::norm2() const {
    double s = norm2_plus();
    for (const auto& z : psi_minus) s += std::norm(z);
    return s;
}

Lattice::Lattice(const Couplings& c, int L) : L_(L), grid_(build_dispersion(c, L)) {}

IVec3 Lattice::coords(std::size_t site) const {
    IVec3 m = grid_.coords(site);
    for (auto& x : m)
        if (x >= L_ / 2) x -= L_;
    return m;
}

LatticeState Lattice::zero_state(double epsilon) const {
    LatticeState s;
    s.L = L_;
    s.epsilon = epsilon;
    s.q.assign(sites(), 0.0);
    s.v.assign(sites(), 0.0);
    return s;
}

WaveField Lattice::zero_wave(double epsilon) const {
    WaveField w;
    w.L = L_;
    w.epsilon = epsilon;
    w.psi_plus.assign(sites(), cplx(0.0));
    w.psi_minus.assign(sites(), cplx(0.0));
    return w;
}

Workspace::Workspace(const Lattice& lat) : lat_(lat), fft_(lat.side()) {
    const auto& w = lat.grid().omega;
    omega_ = w;
    omega_inv_.resize(w.size());
    alpha_.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0)) throw StabilityError("Omega is not invertible: omega(k) = 0 on the lattice grid");
        omega_inv_[i] = 1.0 / w[i];
        alpha_[i] = w[i] * w[i];
    }
}

void Workspace::apply_real(const std::vector<double>& mult, const double* in, double* out) {
    const int L = lat_.side();
    const int Lh = L / 2 + 1;
    const std::size_t n = fft_.sites();
    std::copy(in, in + n, fft_.real());
    fft_.forward_real();
    cplx* h = fft_.half();
    const double scale = 1.0 / double(n);
    for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b) {
            const std::size_t row = (std::size_t(a) * L + b) * L;
            const std::size_t hrow = (std::size_t(a) * L + b) * Lh;
            for (int c = 0; c < Lh; ++c) h[hrow + c] *= mult[row + c] * scale;
        }
    fft_.backward_real();
    std::copy(fft_.real(), fft_.real() + n, out);
}

double Workspace::quadratic_form(const double* q) {
    const int L = lat_.side();
    const int Lh = L / 2 + 1;
    const std::size_t n = fft_.sites();
    std::copy(q, q + n, fft_.real());
    fft_.forward_real();
    const cplx* h = fft_.half();
    double s = 0.0;
    for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b) {
            const std::size_t row = (std::size_t(a) * L + b) * L;
            const std::size_t hrow = (std::size_t(a) * L + b) * Lh;
            for (int c = 0; c < Lh; ++c) {
                // Interior half-spectrum planes stand for their conjugate partners too.
                const double w = (c == 0 || 2 * c == L) ? 1.0 : 2.0;
                s += w * alpha_[row + c] * std::norm(h[hrow + c]);
            }
        }
    return s / double(n);
}

namespace {

void check_shapes(const LatticeState& s, const DisorderField& xi, const Lattice& lat) {
    const std::size_t n = lat.sites();
    if (s.L != lat.side() || s.q.size() != n || s.v.size() != n)
        throw InvalidParameter("lattice state does not match the lattice size");
    if (xi.L != lat.side() || xi.xi.size() != n) throw InvalidParameter("disorder field does not match the lattice");
}

}  // namespace

double energy(const LatticeState& s, const DisorderField& xi, Workspace& ws) {
    check_shapes(s, xi, ws.lattice());
    const double se = std::sqrt(s.epsilon);
    double kin = 0.0;
    for (std::size_t i = 0; i < s.v.size(); ++i) {
        const double a = 1.0 + se * xi.xi[i];
        kin += s.v[i] * s.v[i] / (a * a);
    }
    return 0.5 * (kin + ws.quadratic_form(s.q.data()));
}

double energy(const LatticeState& s, const DisorderField& xi, const Lattice& lat) {
    Workspace ws(lat);
    return energy(s, xi, ws);
}

WaveField to_wavefunction(const LatticeState& s, const DisorderField& xi, Workspace& ws) {
    check_shapes(s, xi, ws.lattice());
    const std::size_t n = s.q.size();
    std::vector<double> oq(n);
    ws.omega_apply(s.q.data(), oq.data());
    WaveField w;
    w.L = s.L;
    w.epsilon = s.epsilon;
    w.psi_plus.resize(n);
    w.psi_minus.resize(n);
    const double se = std::sqrt(s.epsilon);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = s.v[i] / (1.0 + se * xi.xi[i]);
        w.psi_plus[i] = 0.5 * cplx(oq[i], u);
        w.psi_minus[i] = 0.5 * cplx(oq[i], -u);
    }
    return w;
}

WaveField to_wavefunction(const LatticeState& s, const DisorderField& xi, const Lattice& lat) {
    Workspace ws(lat);
    return to_wavefunction(s, xi, ws);
}

LatticeState from_wavefunction(const WaveField& psi, Workspace& ws) {
    const Lattice& lat = ws.lattice();
    const std::size_t n = lat.sites();
    if (psi.L != lat.side() || psi.psi_plus.size() != n) throw InvalidParameter("wave field does not match lattice");
    LatticeState s = lat.zero_state(psi.epsilon);
    std::vector<double> re(n);
    for (std::size_t i = 0; i < n; ++i) {
        re[i] = 2.0 * psi.psi_plus[i].real();
        s.v[i] = 2.0 * psi.psi_plus[i].imag();
    }
    ws.omega_inverse_apply(re.data(), s.q.data());
    return s;
}

LatticeState from_wavefunction(const WaveField& psi, const Lattice& lat) {
    Workspace ws(lat);
    return from_wavefunction(psi, ws);
}

LatticeState from_wavefunction(const WaveField& psi, const DisorderField& xi, Workspace& ws) {
    LatticeState s = from_wavefunction(psi, ws);
    if (xi.xi.size() != s.v.size()) throw InvalidParameter("disorder field does not match lattice");
    check_mass_positivity(xi.xi_bar, psi.epsilon);
    const double se = std::sqrt(psi.epsilon);
    for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] *= 1.0 + se * xi.xi[i];
    return s;
}

VerletIntegrator::VerletIntegrator(Workspace& ws, const DisorderField& xi, double epsilon)
    : ws_(ws), xi_(xi), epsilon_(epsilon) {
    const std::size_t n = ws.lattice().sites();
    if (xi.xi.size() != n) throw InvalidParameter("disorder field does not match lattice");
    check_mass_positivity(xi.xi_bar, epsilon);
    const double se = std::sqrt(epsilon);
    omega_max_eff_ = ws.lattice().omega_max() * (1.0 + se * xi.xi_bar);
    a2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 1.0 + se * xi.xi[i];
        a2_[i] = a * a;
    }
    force_.resize(n);
    conv_.resize(n);
}

void VerletIntegrator::check_dt(double dt) const {
    if (!(dt > 0.0) || !(dt < kStabilityFactor / omega_max_eff_)) {
        std::ostringstream os;
        os << "time step dt=" << dt << " violates the stability bound dt < " << kStabilityFactor
           << "/omega_max_eff = " << kStabilityFactor / omega_max_eff_;
        throw ConfigError(os.str());
    }
}

void VerletIntegrator::compute_force(const LatticeState& s) {
    ws_.alpha_apply(s.q.data(), conv_.data());
    for (std::size_t i = 0; i < conv_.size(); ++i) force_[i] = -a2_[i] * conv_[i];
    cached_ = &s;
    cached_time_ = s.time;
}

void VerletIntegrator::check_finite(const LatticeState& s) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.q.size(); ++i) acc += s.q[i] * s.q[i] + s.v[i] * s.v[i];
    if (!std::isfinite(acc)) {
        std::ostringstream os;
        os << "non-finite lattice state at t=" << s.time << " after " << steps_ << " steps";
        throw NumericalError(os.str());
    }
}

void VerletIntegrator::step(LatticeState& s, double dt) {
    if (cached_ != &s || cached_time_ != s.time) compute_force(s);
    const std::size_t n = s.q.size();
    const double h = 0.5 * dt;
    for (std::size_t i = 0; i < n; ++i) {
        s.v[i] += h * force_[i];
        s.q[i] += dt * s.v[i];
    }
    s.time += dt;
    compute_force(s);
    for (std::size_t i = 0; i < n; ++i) s.v[i] += h * force_[i];
    ++steps_;
    if (steps_ % 64 == 0) check_finite(s);
}

void VerletIntegrator::advance(LatticeState& s, double dt, double t_final) {
    if (!(t_final >= 0.0)) throw ConfigError("t_final must be non-negative");
    if (t_final == 0.0) return;
    check_dt(dt);
    if (std::abs(s.epsilon - epsilon_) > 0.0) throw InvalidParameter("state epsilon differs from integrator epsilon");
    cached_ = nullptr;
    const double t0 = s.time;
    const auto full = static_cast<std::size_t>(std::floor(t_final / dt));
    for (std::size_t i = 0; i < full; ++i) step(s, dt);
    const double rest = t_final - double(full) * dt;
    if (rest > 1e-14 * t_final) step(s, rest);
    s.time = t0 + t_final;
    check_finite(s);
}

LatticeState evolve(const LatticeState& s, const DisorderField& xi, const Lattice& lat, double epsilon, double dt,
                    double t_final) {
    if (!(t_final >= 0.0)) throw ConfigError("t_final must be non-negative");
    LatticeState out = s;
    if (t_final == 0.0) return out;
    Workspace ws(lat);
    VerletIntegrator integ(ws, xi, epsilon);
    integ.advance(out, dt, t_final);
    return out;
}

WaveField evolve_free_spectral(const WaveField& psi, Workspace& ws, double t) {
    const Lattice& lat = ws.lattice();
    const std::size_t n = lat.sites();
    if (psi.psi_plus.size() != n || psi.psi_minus.size() != n) throw InvalidParameter("wave field does not match lattice");
    WaveField out = psi;
    const auto& w = lat.grid().omega;
    Fft3& fft = ws.fft();
    for (int sgn : {1, -1}) {
        auto& comp = sgn == 1 ? out.psi_plus : out.psi_minus;
        std::copy(comp.begin(), comp.end(), fft.full());
        fft.forward_full();
        cplx* f = fft.full();
        const double scale = 1.0 / double(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double ph = -sgn * w[i] * t;
            f[i] *= cplx(std::cos(ph), std::sin(ph)) * scale;
        }
        fft.backward_full();
        std::copy(fft.full(), fft.full() + n, comp.begin());
    }
    return out;
}

WaveField evolve_free_spectral(const WaveField& psi, const Lattice& lat, double t) {
    Workspace ws(lat);
    return evolve_free_spectral(psi, ws, t);
}

WkbResult wkb_state(const Envelope& h, const Phase& S, double epsilon, int L) {
    if (!(epsilon > 0.0)) throw InvalidParameter("epsilon must be positive");
    if (L < 4) throw InvalidParameter("lattice side must be at least 4");
    WkbResult r;
    WaveField& w = r.psi;
    w.L = L;
    w.epsilon = epsilon;
    const std::size_t n = std::size_t(L) * L * L;
    w.psi_plus.resize(n);
    w.psi_minus.resize(n);
    const double amp = std::pow(epsilon, 1.5);
    std::size_t idx = 0;
    for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b)
            for (int c = 0; c < L; ++c, ++idx) {
                const IVec3 y{a >= L / 2 ? a - L : a, b >= L / 2 ? b - L : b, c >= L / 2 ? c - L : c};
                const Vec3 x = epsilon * to_vec(y);
                const double ph = S ? S(x) / epsilon : 0.0;
                const cplx z = amp * h(x) * cplx(std::cos(ph), std::sin(ph));
                w.psi_plus[idx] = z;
                w.psi_minus[idx] = std::conj(z);
            }
    r.mass_in_box = w.norm2_plus();
    // Envelope mass in the shell between the box and a box twice as wide.
    double outside = 0.0;
    const double e3 = epsilon * epsilon * epsilon;
    for (int a = -L; a < L; ++a)
        for (int b = -L; b < L; ++b)
            for (int c = -L; c < L; ++c) {
                const bool inside = a >= -L / 2 && a < L / 2 && b >= -L / 2 && b < L / 2 && c >= -L / 2 && c < L / 2;
                if (inside) continue;
                outside += e3 * std::norm(h(epsilon * Vec3{double(a), double(b), double(c)}));
            }
    const double total = r.mass_in_box + outside;
    r.outside_fraction = total > 0.0 ? outside / total : 0.0;
    r.tight = r.outside_fraction <= 0.01;
    if (!r.tight) {
        std::ostringstream os;
        os << "tightness warning: " << 100.0 * r.outside_fraction << "% of the envelope mass lies outside the box";
        r.warning = os.str();
    }
    return r;
}

WaveField point_state(const std::map<IVec3, cplx>& psi0, int L, double epsilon) {
    if (L < 4) throw InvalidParameter("lattice side must be at least 4");
    WaveField w;
    w.L = L;
    w.epsilon = epsilon;
    const std::size_t n = std::size_t(L) * L * L;
    w.psi_plus.assign(n, cplx(0.0));
    w.psi_minus.assign(n, cplx(0.0));
    for (const auto& [y, z] : psi0) {
        for (int i = 0; i < 3; ++i)
            if (y[i] < -L / 2 || y[i] >= L / 2) throw InvalidParameter("point state support does not fit in the box");
        const std::size_t idx = (std::size_t(wrap(y[0], L)) * L + std::size_t(wrap(y[1], L))) * L + std::size_t(wrap(y[2], L));
        w.psi_plus[idx] = z;
        w.psi_minus[idx] = std::conj(z);
    }
    return w;
}

double mass_outside_radius(const WaveField& psi, double R) {
    const int L = psi.L;
    double out = 0.0, total = 0.0;
    std::size_t idx = 0;
    for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b)
            for (int c = 0; c < L; ++c, ++idx) {
                const Vec3 y{double(a >= L / 2 ? a - L : a), double(b >= L / 2 ? b - L : b),
                             double(c >= L / 2 ? c - L : c)};
                const double m = std::norm(psi.psi_plus[idx]);
                total += m;
                if (psi.epsilon * norm(y) > R) out += m;
            }
    return total > 0.0 ? out / total : 0.0;
}

}  // namespace kinlim
