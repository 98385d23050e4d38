#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace tontine {

// Tontine pool: n initial subscribers, CRRA longevity risk aversion gamma.
struct PoolSpec {
    int n;
    double gamma;

    PoolSpec(int n_, double gamma_) : n(n_), gamma(gamma_) {
        if (n < 1)
            throw std::domain_error("PoolSpec: pool size n must be >= 1");
        if (!(gamma > 0.0))
            throw std::domain_error("PoolSpec: risk aversion gamma must be > 0");
    }

    // gamma within 1e-9 of 1 routes through the logarithmic-utility identities.
    bool log_utility() const { return std::fabs(gamma - 1.0) < 1e-9; }
};

namespace detail {

// Neumaier-compensated accumulator for sums of many small positive terms.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        comp_ += (std::fabs(sum_) >= std::fabs(v)) ? (sum_ - t) + v : (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace detail

// Binomial functionals of the live-subscriber count N(p), where, conditional
// on the reference member being alive, N(p) - 1 ~ Bin(n-1, p).
//
// Terms are evaluated in log space (log C(n-1,k) + k log p + (n-1-k) log(1-p))
// and accumulated with compensated summation; naive binomial coefficients
// overflow near n = 5000. The log-choose table is cached per instance so a
// quadrature loop pays the lgamma cost once.
class PoolFunctionals {
public:
    explicit PoolFunctionals(const PoolSpec& spec)
        : n_(spec.n), gamma_(spec.gamma), log_case_(spec.log_utility()) {
        const int terms = n_;
        log_choose_.resize(terms);
        share_exponent_.resize(terms);
        log_count_.resize(terms);
        const double lgn = std::lgamma(static_cast<double>(n_));
        const double ln = std::log(static_cast<double>(n_));
        for (int k = 0; k < terms; ++k) {
            log_choose_[k] = lgn - std::lgamma(static_cast<double>(k) + 1.0)
                                 - std::lgamma(static_cast<double>(n_ - k));
            log_count_[k] = std::log(static_cast<double>(k) + 1.0);
            share_exponent_[k] = (1.0 - gamma_) * (ln - log_count_[k]);
        }
    }

    int n() const { return n_; }
    double gamma() const { return gamma_; }

    // theta_{n,gamma}(p) = E[(n/N(p))^{1-gamma}]. theta(1) = 1 exactly;
    // theta(0) is the k=0 term n^{1-gamma}.
    double theta(double p) const {
        check_probability(p);
        if (log_case_ || n_ == 1) return 1.0;
        if (p >= 1.0) return 1.0;
        if (p <= 0.0) return std::exp(share_exponent_[0]);
        return sum_terms(p, [this](int k) { return share_exponent_[k]; });
    }

    // beta_{n,gamma}(p) = p * theta_{n,gamma}(p).
    double beta(double p) const {
        if (log_case_) {
            check_probability(p);
            return p;
        }
        return p * theta(p);
    }

    // beta(p)^{1/gamma}, the shape of the optimal payout.
    double beta_root(double p) const {
        if (log_case_) {
            check_probability(p);
            return p;
        }
        const double b = beta(p);
        return b > 0.0 ? std::pow(b, 1.0 / gamma_) : 0.0;
    }

    // E[log(N(p)/n)], the exact binomial expectation used by the gamma = 1
    // utility and by the appendix log inequality.
    double expected_log_share(double p) const {
        check_probability(p);
        if (n_ == 1) return 0.0;
        if (p >= 1.0) return 0.0;
        const double ln = std::log(static_cast<double>(n_));
        if (p <= 0.0) return -ln;
        detail::CompensatedSum acc;
        const double lp = std::log(p);
        const double lq = std::log1p(-p);
        const auto [lo, hi] = term_window(p);
        for (int k = lo; k <= hi; ++k) {
            const double logw = log_choose_[k] + k * lp + (n_ - 1 - k) * lq;
            acc.add(std::exp(logw) * (log_count_[k] - ln));
        }
        return acc.value();
    }

private:
    template <class ExponentFn>
    double sum_terms(double p, ExponentFn&& extra) const {
        detail::CompensatedSum acc;
        const double lp = std::log(p);
        const double lq = std::log1p(-p);
        const auto [lo, hi] = term_window(p);
        for (int k = lo; k <= hi; ++k) {
            acc.add(std::exp(log_choose_[k] + k * lp + (n_ - 1 - k) * lq + extra(k)));
        }
        return acc.value();
    }

    // For very large pools the binomial pmf is sharply concentrated; summing
    // a +-12 sigma window (plus slack) leaves the result unchanged to well
    // below 1e-25 relative while cutting the cost by orders of magnitude.
    std::pair<int, int> term_window(double p) const {
        const int trials = n_ - 1;
        if (trials <= 10000) return {0, trials};
        const double mean = trials * p;
        const double sd = std::sqrt(trials * p * (1.0 - p));
        const double span = 12.0 * sd + 30.0;
        const int lo = std::max(0, static_cast<int>(std::floor(mean - span)));
        const int hi = std::min(trials, static_cast<int>(std::ceil(mean + span)));
        return {lo, hi};
    }

    static void check_probability(double p) {
        if (!(p >= 0.0) || !(p <= 1.0))
            throw std::domain_error("pool_math: probability must lie in [0, 1]");
    }

    int n_;
    double gamma_;
    bool log_case_;
    std::vector<double> log_choose_;
    std::vector<double> share_exponent_;
    std::vector<double> log_count_;
};

// Stateless wrappers; each call builds the per-(n, gamma) tables.
inline double theta(const PoolSpec& spec, double p) { return PoolFunctionals(spec).theta(p); }
inline double beta(const PoolSpec& spec, double p) { return PoolFunctionals(spec).beta(p); }

// E[log(N(p)/n)] with N(p) - 1 ~ Bin(n-1, p).
inline double expected_log_share(int n, double p) {
    return PoolFunctionals(PoolSpec(n, 2.0)).expected_log_share(p);
}

// Closed form E[n/N(p)] = (1 - (1-p)^n)/p, from the telescoping binomial
// identity in the appendix proof. Strictly below 1/p for p in (0,1).
inline double expected_reciprocal_share(int n, double p) {
    if (n < 1)
        throw std::domain_error("expected_reciprocal_share: n must be >= 1");
    if (!(p > 0.0) || !(p <= 1.0))
        throw std::domain_error("expected_reciprocal_share: p must lie in (0, 1]");
    return -std::expm1(static_cast<double>(n) * std::log1p(-p)) / p;
}

// Payout ratio R_{n,gamma}(p) = beta(p)^{1/gamma} / p: optimal-to-natural
// payout, normalized so R(1) = 1.
inline double payout_ratio(const PoolSpec& spec, double p) {
    if (!(p > 0.0) || !(p <= 1.0))
        throw std::domain_error("payout_ratio: p must lie in (0, 1]");
    if (spec.log_utility()) return 1.0;
    return PoolFunctionals(spec).beta_root(p) / p;
}

// Smallest k with P(Bin(trials, p) <= k) >= q. Direct pmf accumulation in
// log space; trials at desk scale makes O(trials) fine.
inline int binomial_quantile(int trials, double p, double q) {
    if (trials < 0)
        throw std::domain_error("binomial_quantile: trials must be >= 0");
    if (!(p >= 0.0) || !(p <= 1.0))
        throw std::domain_error("binomial_quantile: p must lie in [0, 1]");
    if (!(q > 0.0) || !(q < 1.0))
        throw std::domain_error("binomial_quantile: q must lie in (0, 1)");
    if (trials == 0 || p == 0.0) return 0;
    if (p == 1.0) return trials;
    const double lgt = std::lgamma(static_cast<double>(trials) + 1.0);
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    detail::CompensatedSum cdf;
    for (int k = 0; k <= trials; ++k) {
        const double logpmf = lgt - std::lgamma(static_cast<double>(k) + 1.0)
                                  - std::lgamma(static_cast<double>(trials - k) + 1.0)
                                  + k * lp + (trials - k) * lq;
        cdf.add(std::exp(logpmf));
        if (cdf.value() >= q) return k;
    }
    return trials;
}

} // namespace tontine
