#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "tontine/errors.hpp"

namespace tontine {

// Risk-free rate r (doubles as the subjective discount rate) and the
// fraction of annuity deposits deducted as loading.
struct EconomicBasis {
    double r;
    double loading = 0.0;

    EconomicBasis(double r_, double loading_ = 0.0) : r(r_), loading(loading_) {
        if (!(r > 0.0))
            throw std::domain_error("EconomicBasis: rate r must be > 0");
        if (!(loading >= 0.0) || !(loading < 1.0))
            throw std::domain_error("EconomicBasis: loading must lie in [0, 1)");
    }
};

inline constexpr double kDefaultRelTol = 1e-10;

// Integrand tail floor: horizons are scanned until e^{-rt} f(t) stays below
// this, so truncation error is negligible against every tolerance in scope.
inline constexpr double kTailFloor = 1e-14;

namespace detail {

template <class G>
double simpson(G& g, double a, double fa, double b, double fb, double& fm) {
    const double m = 0.5 * (a + b);
    fm = g(m);
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class G>
double adapt(G& g, double a, double fa, double m, double fm, double b, double fb,
             double whole, double tol, int depth) {
    double fml, fmr;
    const double left = simpson(g, a, fa, m, fm, fml);
    const double right = simpson(g, m, fm, b, fb, fmr);
    const double delta = left + right - whole;
    if (std::fabs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    if (depth <= 0)
        throw quadrature_error("discounted_integral: refinement depth exceeded; integrand too rough for requested tolerance");
    const double half_tol = 0.5 * tol;
    return adapt(g, a, fa, 0.5 * (a + m), fml, m, fm, left, half_tol, depth - 1)
         + adapt(g, m, fm, 0.5 * (m + b), fmr, b, fb, right, half_tol, depth - 1);
}

} // namespace detail

// Integral of e^{-rt} f(t) over [0, horizon] by composite adaptive Simpson
// (8 initial panels, depth limit 30, Richardson-corrected). Deterministic:
// the same inputs always sample the same nodes.
//
// Throws quadrature_error when the recursion depth is exhausted before the
// requested relative tolerance is met.
template <class F>
double discounted_integral(F&& f, double r, double horizon, double rel_tol = kDefaultRelTol) {
    if (!(rel_tol > 0.0))
        throw std::domain_error("discounted_integral: rel_tol must be > 0");
    if (!(horizon >= 0.0))
        throw std::domain_error("discounted_integral: horizon must be >= 0");
    if (horizon == 0.0)
        return 0.0;

    auto g = [&f, r](double t) { return std::exp(-r * t) * f(t); };

    constexpr int kPanels = 8;
    constexpr int kMaxDepth = 30;
    const double h = horizon / kPanels;

    double fs[kPanels + 1];
    for (int i = 0; i <= kPanels; ++i)
        fs[i] = g(h * i);

    double rough = 0.0;
    double fm[kPanels];
    double panel[kPanels];
    for (int i = 0; i < kPanels; ++i) {
        panel[i] = detail::simpson(g, h * i, fs[i], h * (i + 1), fs[i + 1], fm[i]);
        rough += panel[i];
    }

    const double abs_tol = rel_tol * std::max(std::fabs(rough), 1e-300);
    double total = 0.0;
    for (int i = 0; i < kPanels; ++i) {
        total += detail::adapt(g, h * i, fs[i], h * i + 0.5 * h, fm[i],
                               h * (i + 1), fs[i + 1], panel[i],
                               abs_tol / kPanels, kMaxDepth);
    }
    return total;
}

// First t (stepping by `step`) beyond which e^{-rt} |f(t)| stays below the
// tail floor, capped at t_cap. Scans the whole range so non-monotone
// integrands cannot truncate early.
template <class F>
double scan_horizon(F&& f, double r, double t_cap, double step = 0.5) {
    if (!(t_cap > 0.0))
        throw std::domain_error("scan_horizon: t_cap must be > 0");
    double last_live = 0.0;
    for (double t = 0.0; t < t_cap + 0.5 * step; t += step) {
        const double v = std::exp(-r * t) * std::fabs(f(std::min(t, t_cap)));
        if (v >= kTailFloor)
            last_live = t;
    }
    const double horizon = last_live + step;
    return horizon < t_cap ? horizon : t_cap;
}

} // namespace tontine
