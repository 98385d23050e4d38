#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tontine/mortality.hpp"
#include "tontine/pool_math.hpp"
#include "tontine/products.hpp"

namespace tontine {

// Property suites behind the `verify` command: the paper's lemmas and
// theorems checked over parameter grids rather than single values.

struct SuiteResult {
    std::string name;
    std::string grid;
    bool passed = true;
    int checks = 0;
    std::string first_failure;
};

struct VerifyOptions {
    bool small_grid = false;
    // Test-only: invert the named suite's inequality to prove the harness
    // actually fails when a theorem is violated.
    std::string inject_fault;
};

namespace detail {

struct Checker {
    SuiteResult& result;
    bool flip = false;

    void expect(bool ok, const std::function<std::string()>& describe) {
        result.checks += 1;
        if (flip) ok = !ok;
        if (!ok && result.passed) {
            result.passed = false;
            result.first_failure = describe();
        }
    }
};

inline std::string cell(const char* fmt, double a, double b, double c) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), fmt, a, b, c);
    return buf;
}

} // namespace detail

inline std::vector<double> verify_p_grid(bool small_grid) {
    std::vector<double> ps;
    const double step = small_grid ? 0.07 : 0.01;
    for (double p = 0.01; p < 0.995; p += step)
        ps.push_back(p);
    return ps;
}

// Lemma: beta(p) <  p^gamma for gamma < 1, = for gamma = 1, > for gamma > 1.
inline SuiteResult verify_beta_bound(const VerifyOptions& opt) {
    SuiteResult res{"beta-bound", "n x gamma x p grid", true, 0, ""};
    detail::Checker check{res, opt.inject_fault == res.name};
    const std::vector<int> ns = opt.small_grid ? std::vector<int>{2, 25} : std::vector<int>{2, 5, 25, 100, 1000};
    const std::vector<double> gammas = {0.25, 0.5, 1.0, 1.5, 2.0, 4.0, 9.0, 25.0};
    const auto ps = verify_p_grid(opt.small_grid);
    for (int n : ns) {
        if (n < 2) continue;
        for (double g : gammas) {
            const PoolFunctionals pf(PoolSpec(n, g));
            for (double p : ps) {
                const double b = pf.beta(p);
                const double pg = std::pow(p, g);
                bool ok;
                if (std::fabs(g - 1.0) < 1e-9) ok = std::fabs(b - pg) < 1e-12;
                else if (g < 1.0) ok = b < pg;
                else ok = b > pg;
                check.expect(ok, [=] { return detail::cell("beta bound violated at n=%.0f gamma=%g p=%g", n, g, p); });
            }
        }
    }
    return res;
}

// Theorem: R(p) < 1 for gamma < 1, = 1 for gamma = 1, > 1 for gamma > 1.
inline SuiteResult verify_payout_ratio_ordering(const VerifyOptions& opt) {
    SuiteResult res{"payout-ratio-ordering", "n x gamma x p grid", true, 0, ""};
    detail::Checker check{res, opt.inject_fault == res.name};
    const std::vector<int> ns = opt.small_grid ? std::vector<int>{2, 25} : std::vector<int>{2, 5, 25, 100, 1000};
    const std::vector<double> gammas = {0.25, 0.5, 1.0, 1.5, 2.0, 4.0, 9.0, 25.0};
    const auto ps = verify_p_grid(opt.small_grid);
    for (int n : ns) {
        if (n < 2) continue;
        for (double g : gammas) {
            const PoolSpec spec(n, g);
            const PoolFunctionals pf(spec);
            for (double p : ps) {
                const double ratio = spec.log_utility() ? 1.0 : pf.beta_root(p) / p;
                bool ok;
                if (std::fabs(g - 1.0) < 1e-9) ok = std::fabs(ratio - 1.0) < 1e-12;
                else if (g < 1.0) ok = ratio < 1.0;
                else ok = ratio > 1.0;
                check.expect(ok, [=] { return detail::cell("R ordering violated at n=%.0f gamma=%g p=%g", n, g, p); });
            }
        }
    }
    return res;
}

// The direct binomial sum for E[n/N(p)] equals (1-(1-p)^n)/p to 1e-10
// relative, and stays strictly below 1/p.
inline SuiteResult verify_reciprocal_identity(const VerifyOptions& opt) {
    SuiteResult res{"reciprocal-identity", "n up to 5000 x p grid", true, 0, ""};
    detail::Checker check{res, opt.inject_fault == res.name};
    const std::vector<int> ns = opt.small_grid ? std::vector<int>{1, 2, 100} : std::vector<int>{1, 2, 5, 25, 100, 1000, 5000};
    const auto ps = verify_p_grid(opt.small_grid);
    for (int n : ns) {
        // gamma = 2 makes (n/N)^{1-gamma} = N/n; E[n/N] needs its own sum
        const double lgn = std::lgamma(static_cast<double>(n));
        for (double p : ps) {
            detail::CompensatedSum direct;
            const double lp = std::log(p), lq = std::log1p(-p);
            for (int k = 0; k < n; ++k) {
                const double lc = lgn - std::lgamma(k + 1.0) - std::lgamma(static_cast<double>(n - k));
                direct.add(std::exp(lc + k * lp + (n - 1 - k) * lq) * (n / (k + 1.0)));
            }
            const double closed = expected_reciprocal_share(n, p);
            const bool agree = std::fabs(direct.value() - closed) <= 1e-10 * closed;
            // the bound is strict, but once (1-p)^n drops below machine
            // precision the closed form saturates at 1/p exactly
            const bool saturated = std::exp(n * std::log1p(-p)) <= 1e-15;
            const bool bounded = saturated ? closed <= 1.0 / p : closed < 1.0 / p;
            check.expect(agree && bounded, [=] {
                return detail::cell("reciprocal identity violated at n=%.0f p=%g (closed=%g)", n, p, closed);
            });
        }
    }
    return res;
}

// Appendix inequality E[log(N(p)/n)] > log p.
inline SuiteResult verify_log_inequality(const VerifyOptions& opt) {
    SuiteResult res{"log-share-inequality", "n x p grid", true, 0, ""};
    detail::Checker check{res, opt.inject_fault == res.name};
    const std::vector<int> ns = opt.small_grid ? std::vector<int>{2, 25} : std::vector<int>{2, 5, 25, 100, 1000};
    const auto ps = verify_p_grid(opt.small_grid);
    for (int n : ns) {
        const PoolFunctionals pf(PoolSpec(n, 2.0));
        for (double p : ps) {
            check.expect(pf.expected_log_share(p) > std::log(p), [=] {
                return detail::cell("log inequality violated at n=%.0f p=%g", n, p, 0.0);
            });
        }
    }
    return res;
}

// Grid basis shared by the utility-level theorem suites (Table 7/8 basis).
inline MortalityBasis verify_basis(double age) { return MortalityBasis(87.25, 9.5, 0.0, age); }

// Theorem: the optimal tontine's utility is below the fair annuity's for
// every pool size and risk aversion.
inline SuiteResult verify_tontine_vs_annuity(const VerifyOptions& opt) {
    SuiteResult res{"tontine-below-annuity", "n x gamma x age grid", true, 0, ""};
    detail::Checker check{res, opt.inject_fault == res.name};
    const std::vector<int> ns = opt.small_grid ? std::vector<int>{2, 100} : std::vector<int>{2, 20, 100, 1000};
    const std::vector<double> gammas = {0.5, 1.0, 2.0, 9.0};
    const std::vector<double> ages = opt.small_grid ? std::vector<double>{60.0} : std::vector<double>{30.0, 60.0, 65.0, 80.0};
    const EconomicBasis econ(0.03);
    for (double age : ages) {
        const MortalityBasis basis = verify_basis(age);
        for (double g : gammas) {
            const double ua = annuity_utility(g, basis, econ);
            for (int n : ns) {
                const double uot = tontine_utility(PoolSpec(n, g), basis, econ);
                check.expect(uot < ua, [=] {
                    return detail::cell("U^OT >= U^A at age=%g gamma=%g n=%.0f", age, g, n);
                });
            }
        }
    }
    return res;
}

// Theorem: for 1 < gamma <= 2 the indifference loading is below
// (1/n)(c0/r - 1).
inline SuiteResult verify_loading_bound(const VerifyOptions& opt) {
    SuiteResult res{"loading-bound", "n x gamma in (1,2] x age grid", true, 0, ""};
    detail::Checker check{res, opt.inject_fault == res.name};
    const std::vector<int> ns = opt.small_grid ? std::vector<int>{2, 100} : std::vector<int>{2, 20, 100, 1000};
    const std::vector<double> gammas = {1.25, 1.5, 2.0};
    const std::vector<double> ages = opt.small_grid ? std::vector<double>{60.0} : std::vector<double>{30.0, 60.0, 65.0, 80.0};
    const EconomicBasis econ(0.03);
    for (double age : ages) {
        const MortalityBasis basis = verify_basis(age);
        const double c0 = fair_annuity_rate(basis, econ);
        for (double g : gammas) {
            for (int n : ns) {
                const double d = indifference_loading(PoolSpec(n, g), basis, econ);
                const double bound = (c0 / econ.r - 1.0) / static_cast<double>(n);
                check.expect(d > 0.0 && d < bound, [=] {
                    return detail::cell("loading bound violated at age=%g gamma=%g n=%.0f", age, g, n);
                });
            }
        }
    }
    return res;
}

inline std::vector<SuiteResult> run_verification(const VerifyOptions& opt) {
    return {
        verify_beta_bound(opt),
        verify_payout_ratio_ordering(opt),
        verify_reciprocal_identity(opt),
        verify_log_inequality(opt),
        verify_tontine_vs_annuity(opt),
        verify_loading_bound(opt),
    };
}

} // namespace tontine
