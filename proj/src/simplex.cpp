#include <algorithm>
#include <cmath>
#include <sstream>

#include "kinlim/kinetic.hpp"

namespace kinlim {

namespace {

constexpr int kNodes = 20;

// Gauss-Legendre rule on [-1,1] with the spectral integration matrix
// S[j][m] = int_{-1}^{x_j} l_m(s) ds for the Lagrange basis l_m on the nodes.
struct PanelRule {
    double x[kNodes];
    double w[kNodes];
    double S[kNodes][kNodes];

    PanelRule() {
        for (int i = 0; i < kNodes; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (kNodes + 0.5));
            for (int it = 0; it < 100; ++it) {
                const auto [p, dp] = legendre(kNodes, z);
                const double dz = p / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            const double dp = legendre(kNodes, z).second;
            x[i] = -z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        // l_m(s) = w_m sum_k (2k+1)/2 P_k(x_m) P_k(s), exact for the discrete orthogonality of GL nodes.
        double P[kNodes + 1][kNodes];
        for (int m = 0; m < kNodes; ++m)
            for (int k = 0; k <= kNodes; ++k) P[k][m] = legendre(k, x[m]).first;
        for (int j = 0; j < kNodes; ++j) {
            for (int m = 0; m < kNodes; ++m) {
                double s = 0.5 * (x[j] + 1.0);
                for (int k = 1; k < kNodes; ++k) s += 0.5 * P[k][m] * (P[k + 1][j] - P[k - 1][j]);
                S[j][m] = w[m] * s;
            }
        }
    }

    // P_n(z) and P_n'(z) by the three-term recurrence.
    static std::pair<double, double> legendre(int n, double z) {
        double p0 = 1.0, p1 = z;
        if (n == 0) return {1.0, 0.0};
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        const double dp = std::abs(z) < 1.0 ? n * (z * p1 - p0) / (z * z - 1.0) : 0.5 * n * (n + 1.0);
        return {p1, dp};
    }
};

const PanelRule& rule() {
    static const PanelRule r;
    return r;
}

// K_N(t) on Q equal panels: each level is the cumulative integral
// K_{l+1}(x) = exp(-i x w_{l+1}) int_0^x exp(i r w_{l+1}) K_l(r) dr evaluated at every node.
cplx k_simplex_panels(double t, std::span<const cplx> w, int Q) {
    const PanelRule& R = rule();
    const double h = t / Q;
    const std::size_t n = std::size_t(Q) * kNodes;
    std::vector<double> r(n);
    for (int q = 0; q < Q; ++q)
        for (int j = 0; j < kNodes; ++j) r[std::size_t(q) * kNodes + j] = h * (q + 0.5 * (R.x[j] + 1.0));
    const cplx I(0.0, 1.0);
    std::vector<cplx> K(n), g(n);
    for (std::size_t i = 0; i < n; ++i) K[i] = std::exp(-I * r[i] * w[0]);
    cplx total = 0.0;
    for (std::size_t l = 1; l < w.size(); ++l) {
        for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(I * r[i] * w[l]) * K[i];
        cplx base = 0.0;
        for (int q = 0; q < Q; ++q) {
            const cplx* gq = &g[std::size_t(q) * kNodes];
            for (int j = 0; j < kNodes; ++j) {
                cplx part = 0.0;
                for (int m = 0; m < kNodes; ++m) part += R.S[j][m] * gq[m];
                K[std::size_t(q) * kNodes + j] = std::exp(-I * r[std::size_t(q) * kNodes + j] * w[l]) * (base + 0.5 * h * part);
            }
            cplx full = 0.0;
            for (int m = 0; m < kNodes; ++m) full += R.w[m] * gq[m];
            base += 0.5 * h * full;
        }
        total = std::exp(-I * t * w[l]) * base;
    }
    if (w.size() == 1) total = std::exp(-I * t * w[0]);
    return total;
}

}  // namespace

cplx k_simplex(double t, std::span<const cplx> w) {
    if (w.empty()) throw InvalidParameter("K_N needs N >= 1 frequencies");
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidParameter("K_N needs a finite t >= 0");
    if (w.size() > 6) {
        std::ostringstream os;
        os << "K_N with N=" << w.size() << " is unsupported (N <= 6)";
        throw Unsupported(os.str());
    }
    double wmax = 0.0;
    for (const auto& z : w) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw InvalidParameter("K_N frequencies must be finite");
        wmax = std::max(wmax, std::abs(z));
    }
    const cplx I(0.0, 1.0);
    if (w.size() == 1) return std::exp(-I * t * w[0]);
    if (t == 0.0) return 0.0;
    // Panel doubling until two successive refinements agree.
    int Q = std::max(1, int(std::ceil(t * wmax / 4.0)));
    // Tolerance relative to the a-priori bound t^{N-1}/(N-1)!.
    const double bound = std::exp((double(w.size()) - 1.0) * std::log(t) - std::lgamma(double(w.size())));
    const double tol = 1e-13 * std::max(1.0, bound);
    cplx prev = k_simplex_panels(t, w, Q);
    for (int it = 0; it < 10; ++it) {
        Q *= 2;
        const cplx cur = k_simplex_panels(t, w, Q);
        if (std::abs(cur - prev) <= tol) return cur;
        prev = cur;
    }
    return prev;
}

}  // namespace kinlim
