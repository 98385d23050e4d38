#pragma once

#include <cmath>
#include <stdexcept>

namespace tontine {

// Hard cap on attained age used for grids and integration horizons. For the
// parameter ranges in scope, survival beyond this age is below 1e-12.
inline constexpr double kMaxAge = 130.0;

// Survival values smaller than this clamp to zero so that downstream
// integrals never see denormals.
inline constexpr double kSurvivalUnderflow = 1e-300;

// Gompertz-Makeham mortality law: hazard(t) = makeham + (1/b) e^{(x+t-m)/b}
// for a life aged x. m is the modal age, b the dispersion, makeham the
// age-independent hazard add-on.
struct MortalityBasis {
    double m;
    double b;
    double makeham;
    double x;

    MortalityBasis(double m_, double b_, double makeham_, double x_)
        : m(m_), b(b_), makeham(makeham_), x(x_) {
        if (!(b > 0.0))
            throw std::domain_error("MortalityBasis: dispersion b must be > 0");
        if (!(makeham >= 0.0))
            throw std::domain_error("MortalityBasis: makeham add-on must be >= 0");
        if (!(x >= 0.0) || !(x < kMaxAge))
            throw std::domain_error("MortalityBasis: entry age x must satisfy 0 <= x < 130");
        if (!std::isfinite(m))
            throw std::domain_error("MortalityBasis: modal age m must be finite");
    }
};

// t-year survival probability tp_x = exp(-l t + e^{(x-m)/b} (1 - e^{t/b})),
// the closed-form integral of the Gompertz-Makeham hazard.
inline double survival_probability(const MortalityBasis& basis, double t) {
    if (!(t >= 0.0))
        throw std::domain_error("survival_probability: t must be >= 0");
    if (t == 0.0)
        return 1.0;
    // exp(t/b) overflows for huge t; the survival is 0 long before that.
    const double tb = t / basis.b;
    if (tb > 700.0)
        return 0.0;
    const double lnp = -basis.makeham * t + std::exp((basis.x - basis.m) / basis.b) * (1.0 - std::exp(tb));
    const double p = std::exp(lnp);
    return p < kSurvivalUnderflow ? 0.0 : p;
}

// Instantaneous hazard at time t: makeham + (1/b) e^{(x+t-m)/b}.
inline double hazard_rate(const MortalityBasis& basis, double t) {
    if (!(t >= 0.0))
        throw std::domain_error("hazard_rate: t must be >= 0");
    return basis.makeham + std::exp((basis.x + t - basis.m) / basis.b) / basis.b;
}

// One-year death probability q_{x+t} = 1 - p(t+1)/p(t) for integer year t.
inline double annual_death_prob(const MortalityBasis& basis, int t) {
    if (t < 0)
        throw std::domain_error("annual_death_prob: year index must be >= 0");
    const double pt = survival_probability(basis, static_cast<double>(t));
    if (pt == 0.0)
        throw std::domain_error("annual_death_prob: conditional probability undefined, tp_x = 0");
    const double pt1 = survival_probability(basis, static_cast<double>(t) + 1.0);
    double q = 1.0 - pt1 / pt;
    if (q < 0.0) q = 0.0;
    if (q > 1.0) q = 1.0;
    return q;
}

} // namespace tontine
