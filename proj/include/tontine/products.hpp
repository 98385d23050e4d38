#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tontine/csv.hpp"
#include "tontine/errors.hpp"
#include "tontine/mortality.hpp"
#include "tontine/pool_math.hpp"
#include "tontine/quadrature.hpp"

namespace tontine {

enum class PayoutKind { flat, natural, optimal, subjective_optimal };

inline const char* to_string(PayoutKind kind) {
    switch (kind) {
        case PayoutKind::flat: return "flat";
        case PayoutKind::natural: return "natural";
        case PayoutKind::optimal: return "optimal";
        case PayoutKind::subjective_optimal: return "subjective_optimal";
    }
    return "unknown";
}

// A payout-rate function of time sampled on an age grid. rates[i] is the
// rate paid per initial dollar at grid[i] years after purchase. Consumers
// interpolate linearly between grid points.
struct PayoutCurve {
    PayoutKind kind;
    std::vector<double> grid;
    std::vector<double> rates;
    MortalityBasis basis;
    std::optional<PoolSpec> pool;
    EconomicBasis econ;
    std::optional<MortalityBasis> subjective;

    double rate_at(double t) const {
        if (!(t >= 0.0))
            throw std::domain_error("PayoutCurve::rate_at: t must be >= 0");
        if (t <= grid.front()) return rates.front();
        if (t >= grid.back()) return rates.back();
        const auto it = std::upper_bound(grid.begin(), grid.end(), t);
        const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
        const std::size_t lo = hi - 1;
        const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
        return rates[lo] + w * (rates[hi] - rates[lo]);
    }
};

// Lifetime utilities of the competing products for one (n, gamma) cell.
// u_natural_tontine is absent when gamma > 2 (the integral diverges).
struct UtilityReport {
    double u_annuity;
    double u_loaded_annuity;
    double u_optimal_tontine;
    std::optional<double> u_natural_tontine;
    double gamma;
    int n;
    MortalityBasis basis;
    EconomicBasis econ;
};

// Truncation point for survival-carrying lifetime integrals:
// min(130 - x, first t with e^{-rt} tp_x < 1e-14).
inline double integration_horizon(const MortalityBasis& basis, double r) {
    return scan_horizon([&basis](double t) { return survival_probability(basis, t); },
                        r, kMaxAge - basis.x);
}

// Fair annuity rate c0 = [int_0^h e^{-rt} s(t) dt]^{-1} for an arbitrary
// survival function. c0 > r always (the integrand is below e^{-rt}).
template <class S>
double fair_annuity_rate_for(S&& survival, double horizon, const EconomicBasis& econ,
                             double rel_tol = kDefaultRelTol) {
    const double a = discounted_integral(survival, econ.r, horizon, rel_tol);
    if (!(a > 0.0))
        throw quadrature_error("fair_annuity_rate: annuity factor is not positive");
    return 1.0 / a;
}

inline double fair_annuity_rate(const MortalityBasis& basis, const EconomicBasis& econ,
                                double rel_tol = kDefaultRelTol) {
    const double horizon = integration_horizon(basis, econ.r);
    return fair_annuity_rate_for([&basis](double t) { return survival_probability(basis, t); },
                                 horizon, econ, rel_tol);
}

// Utility of the loaded life annuity paying (1-loading) c0 for life:
// c0^{-gamma} (1-loading)^{1-gamma} / (1-gamma), or the log form at gamma=1.
// loading = 0 gives the fair annuity utility U^A.
inline double annuity_utility(double gamma, const MortalityBasis& basis, const EconomicBasis& econ,
                              double rel_tol = kDefaultRelTol) {
    if (!(gamma > 0.0))
        throw std::domain_error("annuity_utility: gamma must be > 0");
    const double c0 = fair_annuity_rate(basis, econ, rel_tol);
    if (std::fabs(gamma - 1.0) < 1e-9)
        return (std::log(c0) + std::log1p(-econ.loading)) / c0;
    return std::pow(c0, -gamma) * std::pow(1.0 - econ.loading, 1.0 - gamma) / (1.0 - gamma);
}

namespace detail {

// int_0^h e^{-rt} beta(tp_x)^{1/gamma} dt with the horizon scanned on the
// actual integrand: for gamma > 1 it decays like p^{1/gamma}, much slower
// than survival itself.
inline double beta_root_integral(const PoolFunctionals& pf, const MortalityBasis& basis,
                                 const EconomicBasis& econ, double rel_tol) {
    auto f = [&](double t) { return pf.beta_root(survival_probability(basis, t)); };
    const double horizon = scan_horizon(f, econ.r, kMaxAge - basis.x);
    return discounted_integral(f, econ.r, horizon, rel_tol);
}

// int_0^inf e^{-rt} p^{2-gamma} theta(p) dt for gamma <= 2. At gamma = 2 the
// integrand tends to theta(0) = 1/n rather than 0, so the constant tail is
// integrated analytically and only the residual is quadratured.
inline double natural_weight_integral(const PoolFunctionals& pf, const MortalityBasis& basis,
                                      const EconomicBasis& econ, double rel_tol) {
    const double gamma = pf.gamma();
    const double h0 = (gamma == 2.0) ? std::pow(static_cast<double>(pf.n()), 1.0 - gamma) : 0.0;
    auto residual = [&](double t) {
        const double p = survival_probability(basis, t);
        const double h = (p <= 0.0) ? ((gamma == 2.0) ? h0 : 0.0)
                                    : std::pow(p, 2.0 - gamma) * pf.theta(p);
        return h - h0;
    };
    const double horizon = scan_horizon(residual, econ.r, kMaxAge - basis.x);
    return h0 / econ.r + discounted_integral(residual, econ.r, horizon, rel_tol);
}

} // namespace detail

// Initial withdrawal rate of the optimal tontine,
// D(1) = [int e^{-rt} beta(tp_x)^{1/gamma} dt]^{-1}. Equals c0 at gamma = 1.
inline double optimal_tontine_initial_rate(const PoolSpec& pool, const MortalityBasis& basis,
                                           const EconomicBasis& econ, double rel_tol = kDefaultRelTol) {
    if (pool.log_utility())
        return fair_annuity_rate(basis, econ, rel_tol);
    const PoolFunctionals pf(pool);
    const double b = detail::beta_root_integral(pf, basis, econ, rel_tol);
    if (!(b > 0.0))
        throw quadrature_error("optimal_tontine_initial_rate: budget integral is not positive");
    return 1.0 / b;
}

// Uniform monthly sampling grid on [0, integration horizon].
inline std::vector<double> default_grid(const MortalityBasis& basis, const EconomicBasis& econ,
                                        double step = 1.0 / 12.0) {
    if (!(step > 0.0))
        throw std::domain_error("default_grid: step must be > 0");
    const double horizon = integration_horizon(basis, econ.r);
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(horizon / step) + 2);
    for (double t = 0.0; t < horizon; t += step)
        grid.push_back(t);
    grid.push_back(horizon);
    return grid;
}

// Sample a payout curve on the given grid.
//   flat:    d(t) = r                (the historical constant-rate design)
//   natural: d(t) = c0 tp_x          (declines with the survival curve)
//   optimal: d(t) = D(1) beta(tp_x)^{1/gamma}
inline PayoutCurve tontine_payout_curve(PayoutKind kind, const std::optional<PoolSpec>& pool,
                                        const MortalityBasis& basis, const EconomicBasis& econ,
                                        const std::vector<double>& grid,
                                        double rel_tol = kDefaultRelTol) {
    if (grid.empty() || grid.front() != 0.0)
        throw std::domain_error("tontine_payout_curve: grid must start at t = 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::domain_error("tontine_payout_curve: grid must be strictly ascending");
    if (kind == PayoutKind::subjective_optimal)
        throw std::domain_error("tontine_payout_curve: use subjective_tontine_payout for subjective curves");

    PayoutCurve curve{kind, grid, {}, basis, pool, econ, std::nullopt};
    curve.rates.reserve(grid.size());

    switch (kind) {
        case PayoutKind::flat: {
            curve.pool.reset();
            curve.rates.assign(grid.size(), econ.r);
            break;
        }
        case PayoutKind::natural: {
            curve.pool.reset();
            const double c0 = fair_annuity_rate(basis, econ, rel_tol);
            for (double t : grid)
                curve.rates.push_back(c0 * survival_probability(basis, t));
            break;
        }
        case PayoutKind::optimal: {
            if (!pool)
                throw std::domain_error("tontine_payout_curve: optimal curve requires a PoolSpec");
            const double d1 = optimal_tontine_initial_rate(*pool, basis, econ, rel_tol);
            const PoolFunctionals pf(*pool);
            for (double t : grid)
                curve.rates.push_back(d1 * pf.beta_root(survival_probability(basis, t)));
            break;
        }
        default:
            throw std::domain_error("tontine_payout_curve: invalid payout kind");
    }
    return curve;
}

// Utility of the optimal tontine. For gamma != 1 this is
// (1/(1-gamma)) (int e^{-rt} beta^{1/gamma} dt)^gamma; for gamma = 1 the
// exact binomial expectation of the log payout is integrated.
inline double tontine_utility(const PoolSpec& pool, const MortalityBasis& basis,
                              const EconomicBasis& econ, double rel_tol = kDefaultRelTol) {
    const PoolFunctionals pf(pool);
    if (pool.log_utility()) {
        const double c0 = fair_annuity_rate(basis, econ, rel_tol);
        auto f = [&](double t) {
            const double p = survival_probability(basis, t);
            if (p <= 0.0) return 0.0;
            return p * (std::log(c0 * p) - pf.expected_log_share(p));
        };
        const double horizon = integration_horizon(basis, econ.r);
        return discounted_integral(f, econ.r, horizon, rel_tol);
    }
    const double b = detail::beta_root_integral(pf, basis, econ, rel_tol);
    return std::pow(b, pool.gamma) / (1.0 - pool.gamma);
}

// Utility of the natural tontine,
// (c0^{1-gamma}/(1-gamma)) int e^{-rt} p^{2-gamma} theta(p) dt.
// Diverges for gamma > 2; equals the optimal-tontine utility at gamma = 1.
inline double natural_tontine_utility(const PoolSpec& pool, const MortalityBasis& basis,
                                      const EconomicBasis& econ, double rel_tol = kDefaultRelTol) {
    if (pool.gamma > 2.0)
        throw divergence_error("natural_tontine_utility: integral diverges for gamma > 2");
    if (pool.log_utility())
        return tontine_utility(pool, basis, econ, rel_tol);
    const PoolFunctionals pf(pool);
    const double c0 = fair_annuity_rate(basis, econ, rel_tol);
    const double c = detail::natural_weight_integral(pf, basis, econ, rel_tol);
    return std::pow(c0, 1.0 - pool.gamma) / (1.0 - pool.gamma) * c;
}

// Annuity loading at which the (loaded) annuity and the optimal tontine give
// equal utility. Closed form for gamma != 1; the gamma = 1 branch inverts the
// log-utility loaded-annuity formula.
inline double indifference_loading(const PoolSpec& pool, const MortalityBasis& basis,
                                   const EconomicBasis& econ, double rel_tol = kDefaultRelTol) {
    const double c0 = fair_annuity_rate(basis, econ, rel_tol);
    if (pool.log_utility()) {
        const double u_ot = tontine_utility(pool, basis, econ, rel_tol);
        return 1.0 - std::exp(c0 * u_ot) / c0;
    }
    const PoolFunctionals pf(pool);
    const double b = detail::beta_root_integral(pf, basis, econ, rel_tol);
    return 1.0 - std::pow(c0 * b, pool.gamma / (1.0 - pool.gamma));
}

// Certainty-equivalent ratio of the optimal over the natural tontine:
// the deposit into a natural tontine matching $1 in the optimal one.
// Exactly 1 at gamma = 1; diverges for gamma > 2.
inline double certainty_equivalent_ratio(const PoolSpec& pool, const MortalityBasis& basis,
                                         const EconomicBasis& econ, double rel_tol = kDefaultRelTol) {
    if (pool.gamma > 2.0)
        throw divergence_error("certainty_equivalent_ratio: natural-tontine utility diverges for gamma > 2");
    if (pool.log_utility())
        return 1.0;
    const PoolFunctionals pf(pool);
    const double horizon = integration_horizon(basis, econ.r);
    const double a = discounted_integral([&](double t) { return survival_probability(basis, t); },
                                         econ.r, horizon, rel_tol);
    const double b = detail::beta_root_integral(pf, basis, econ, rel_tol);
    const double c = detail::natural_weight_integral(pf, basis, econ, rel_tol);
    const double g = pool.gamma;
    // log form: the 1/(1-gamma) exponents overflow pow() near gamma = 1
    return std::exp(std::log(a) + (g * std::log(b) - std::log(c)) / (1.0 - g));
}

// Optimal payout under subjective survival beliefs pt~ (objective pt still
// prices the budget): d(t) = D(1,1) (pt~ theta(pt))^{1/gamma}.
inline PayoutCurve subjective_tontine_payout(const PoolSpec& pool, const MortalityBasis& objective,
                                             const MortalityBasis& subjective, const EconomicBasis& econ,
                                             const std::vector<double>& grid,
                                             double rel_tol = kDefaultRelTol) {
    if (grid.empty() || grid.front() != 0.0)
        throw std::domain_error("subjective_tontine_payout: grid must start at t = 0");
    const PoolFunctionals pf(pool);
    const double inv_gamma = 1.0 / pool.gamma;
    auto rate_shape = [&](double t) {
        const double p = survival_probability(objective, t);
        const double ps = survival_probability(subjective, t);
        const double bps = ps * pf.theta(p);
        return bps > 0.0 ? std::pow(bps, inv_gamma) : 0.0;
    };
    const double horizon = scan_horizon(rate_shape, econ.r, kMaxAge - objective.x);
    const double denom = discounted_integral(rate_shape, econ.r, horizon, rel_tol);
    if (!(denom > 0.0))
        throw quadrature_error("subjective_tontine_payout: budget integral is not positive");
    const double d11 = 1.0 / denom;

    PayoutCurve curve{PayoutKind::subjective_optimal, grid, {}, objective, pool, econ, subjective};
    curve.rates.reserve(grid.size());
    for (double t : grid)
        curve.rates.push_back(d11 * rate_shape(t));
    return curve;
}

// Initial rate of the optimal annuity for subjective beliefs,
// c_S(0) = [int e^{-rt} p^{1-1/gamma} pt~^{1/gamma} dt]^{-1}; the stream is
// c_S(t) = c_S(0) (pt~/pt)^{1/gamma}.
inline double subjective_annuity_initial_rate(double gamma, const MortalityBasis& objective,
                                              const MortalityBasis& subjective, const EconomicBasis& econ,
                                              double rel_tol = kDefaultRelTol) {
    if (!(gamma > 0.0))
        throw std::domain_error("subjective_annuity_initial_rate: gamma must be > 0");
    const double inv_gamma = 1.0 / gamma;
    auto f = [&](double t) {
        const double p = survival_probability(objective, t);
        const double ps = survival_probability(subjective, t);
        if (p <= 0.0 || ps <= 0.0) return 0.0;
        return std::pow(p, 1.0 - inv_gamma) * std::pow(ps, inv_gamma);
    };
    const double horizon = scan_horizon(f, econ.r, kMaxAge - objective.x);
    const double a = discounted_integral(f, econ.r, horizon, rel_tol);
    if (!(a > 0.0))
        throw quadrature_error("subjective_annuity_initial_rate: budget integral is not positive");
    return 1.0 / a;
}

// Re-integrate the sponsor budget int e^{-rt} d(t) dt from the curve's
// continuous definition (fresh quadrature, nodes independent of the grid).
// Every curve should return 1 within 1e-6.
inline double budget_integral(const PayoutCurve& curve, double rel_tol = kDefaultRelTol) {
    const auto& basis = curve.basis;
    const double r = curve.econ.r;
    switch (curve.kind) {
        case PayoutKind::flat: {
            const double d0 = curve.rates.front();
            // constant rate never decays; integrate until e^{-rt} d0 is dust
            const double horizon = (std::log(std::max(d0, 1e-30)) - std::log(kTailFloor)) / r;
            return discounted_integral([d0](double) { return d0; }, r, horizon, rel_tol);
        }
        case PayoutKind::natural: {
            const double c0 = curve.rates.front();
            auto f = [&](double t) { return c0 * survival_probability(basis, t); };
            return discounted_integral(f, r, scan_horizon(f, r, kMaxAge - basis.x), rel_tol);
        }
        case PayoutKind::optimal: {
            if (!curve.pool)
                throw std::domain_error("budget_integral: optimal curve lacks a PoolSpec");
            const PoolFunctionals pf(*curve.pool);
            const double d1 = curve.rates.front();
            auto f = [&](double t) { return d1 * pf.beta_root(survival_probability(basis, t)); };
            return discounted_integral(f, r, scan_horizon(f, r, kMaxAge - basis.x), rel_tol);
        }
        case PayoutKind::subjective_optimal: {
            if (!curve.pool || !curve.subjective)
                throw std::domain_error("budget_integral: subjective curve lacks pool or subjective basis");
            const PoolFunctionals pf(*curve.pool);
            const double d11 = curve.rates.front();
            const double inv_gamma = 1.0 / curve.pool->gamma;
            auto f = [&](double t) {
                const double p = survival_probability(basis, t);
                const double ps = survival_probability(*curve.subjective, t);
                const double bps = ps * pf.theta(p);
                return bps > 0.0 ? d11 * std::pow(bps, inv_gamma) : 0.0;
            };
            return discounted_integral(f, r, scan_horizon(f, r, kMaxAge - basis.x), rel_tol);
        }
    }
    throw std::domain_error("budget_integral: invalid payout kind");
}

// CSV serialization of a sampled curve: t, age, rate, survival.
inline std::string to_csv(const PayoutCurve& curve) {
    CsvWriter csv("t,age,rate,survival");
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        const double t = curve.grid[i];
        csv.row({format_number(t), format_number(curve.basis.x + t),
                 format_number(curve.rates[i]),
                 format_number(survival_probability(curve.basis, t))});
    }
    return csv.str();
}

// All four product utilities for one (n, gamma) cell.
inline UtilityReport utility_report(const PoolSpec& pool, const MortalityBasis& basis,
                                    const EconomicBasis& econ, double rel_tol = kDefaultRelTol) {
    UtilityReport report{0.0, 0.0, 0.0, std::nullopt, pool.gamma, pool.n, basis, econ};
    const EconomicBasis fair(econ.r, 0.0);
    report.u_annuity = annuity_utility(pool.gamma, basis, fair, rel_tol);
    report.u_loaded_annuity = annuity_utility(pool.gamma, basis, econ, rel_tol);
    report.u_optimal_tontine = tontine_utility(pool, basis, econ, rel_tol);
    if (pool.gamma <= 2.0)
        report.u_natural_tontine = natural_tontine_utility(pool, basis, econ, rel_tol);
    return report;
}

} // namespace tontine
