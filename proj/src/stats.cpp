#include "kinlim/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

namespace kinlim {

void RunningStats::add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / double(n_);
    m2_ += d * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double n = double(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * double(o.n_) / n;
    m2_ += o.m2_ + d * d * double(n_) * double(o.n_) / n;
    n_ += o.n_;
}

double RunningStats::variance() const { return n_ > 1 ? m2_ / double(n_ - 1) : 0.0; }

double RunningStats::stderr_mean() const { return n_ > 1 ? std::sqrt(variance() / double(n_)) : 0.0; }

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 3 || y.size() != n) throw FitError("linear fit needs at least 3 paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw FitError("degenerate abscissae in linear fit");
    LinearFit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.residual_rms = std::sqrt(ss / double(n));
    f.slope_stderr = std::sqrt(ss / double(n - 2) / sxx);
    boost::math::students_t t(double(n - 2));
    const double q = boost::math::quantile(boost::math::complement(t, 0.025));
    f.ci_low = f.slope - q * f.slope_stderr;
    f.ci_high = f.slope + q * f.slope_stderr;
    return f;
}

double chi_square_sf(double statistic, double dof) {
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

double kolmogorov_sf(double d, std::size_t n) {
    const double sn = std::sqrt(double(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double poisson_tail(double lambda, int m) {
    if (lambda <= 0.0) return 0.0;
    if (m < 0) return 1.0;
    return boost::math::gamma_p(double(m + 1), lambda);
}

double poisson_pmf(double lambda, int m) {
    if (m < 0) return 0.0;
    if (lambda <= 0.0) return m == 0 ? 1.0 : 0.0;
    return std::exp(double(m) * std::log(lambda) - lambda - std::lgamma(double(m) + 1.0));
}

}  // namespace kinlim
