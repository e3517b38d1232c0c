#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kinlim/core.hpp"

namespace kinlim {

// Welford accumulator with Chan's pairwise merge.
class RunningStats {
public:
    void add(double x);
    void merge(const RunningStats& other);
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;
    double stderr_mean() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

class ComplexStats {
public:
    void add(cplx z) {
        re_.add(z.real());
        im_.add(z.imag());
    }
    void merge(const ComplexStats& o) {
        re_.merge(o.re_);
        im_.merge(o.im_);
    }
    std::size_t count() const { return re_.count(); }
    cplx mean() const { return {re_.mean(), im_.mean()}; }
    cplx stderr_mean() const { return {re_.stderr_mean(), im_.stderr_mean()}; }

private:
    RunningStats re_, im_;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double residual_rms = 0.0;
    std::size_t points = 0;
};

// Ordinary least squares with a 95% Student-t interval on the slope.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Upper tail of the chi-square law.
double chi_square_sf(double statistic, double dof);

// Asymptotic Kolmogorov distribution with the small-sample correction
// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) D.
double kolmogorov_sf(double d, std::size_t n);

// One-sample KS statistic of data against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> data, Cdf&& cdf);

// P(N > m) for N ~ Poisson(lambda).
double poisson_tail(double lambda, int m);

// P(N = m) for N ~ Poisson(lambda).
double poisson_pmf(double lambda, int m);

}  // namespace kinlim

#include <algorithm>

namespace kinlim {

template <class Cdf>
double ks_statistic(std::vector<double> data, Cdf&& cdf) {
    std::sort(data.begin(), data.end());
    const double n = double(data.size());
    double d = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double f = cdf(data[i]);
        d = std::max({d, f - double(i) / n, double(i + 1) / n - f});
    }
    return d;
}

}  // namespace kinlim
