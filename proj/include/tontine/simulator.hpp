#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tontine/mortality.hpp"
#include "tontine/pool_math.hpp"
#include "tontine/products.hpp"

namespace tontine {

namespace rng {

// SplitMix64. Counter-based, so per-run substreams derived from (seed, run)
// make parallel and serial execution agree bit-exactly.
struct SplitMix64 {
    std::uint64_t state;

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform on [0, 1)
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline std::uint64_t substream_state(std::uint64_t seed, std::uint64_t run) {
    std::uint64_t z = seed + (run + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline SplitMix64 run_stream(std::uint64_t seed, std::uint64_t run) {
    return SplitMix64{substream_state(seed, run)};
}

} // namespace rng

// One-pass central-moment accumulator (Welford updates through the fourth
// moment). Statistics divide by the count, not count-1: sd = sqrt(m2),
// skewness = m3/m2^{3/2}, kurtosis = m4/m2^2 (raw, not excess).
class MomentAccumulator {
public:
    void add(double x) {
        const std::uint64_t n1 = n_;
        n_ += 1;
        const double dn = static_cast<double>(n_);
        const double delta = x - m1_;
        const double delta_n = delta / dn;
        const double delta_n2 = delta_n * delta_n;
        const double term1 = delta * delta_n * static_cast<double>(n1);
        m1_ += delta_n;
        m4_ += term1 * delta_n2 * (dn * dn - 3.0 * dn + 3.0)
             + 6.0 * delta_n2 * m2_ - 4.0 * delta_n * m3_;
        m3_ += term1 * delta_n * (dn - 2.0) - 3.0 * delta_n * m2_;
        m2_ += term1;
    }

    std::uint64_t count() const { return n_; }
    double mean() const { return m1_; }
    double m2() const { return n_ ? m2_ / static_cast<double>(n_) : 0.0; }
    double m3() const { return n_ ? m3_ / static_cast<double>(n_) : 0.0; }
    double m4() const { return n_ ? m4_ / static_cast<double>(n_) : 0.0; }
    double stddev() const { return std::sqrt(m2()); }
    double skewness() const { const double v = m2(); return v > 0.0 ? m3() / std::pow(v, 1.5) : 0.0; }
    double kurtosis() const { const double v = m2(); return v > 0.0 ? m4() / (v * v) : 0.0; }

private:
    std::uint64_t n_ = 0;
    double m1_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
};

enum class Product { tontine, annuity };

// Appendix-style annual cash-flow simulation: n homogeneous nominees aged x,
// everyone dead by omega, payments at end of year t discounted by (1+R)^t.
struct SimulationConfig {
    explicit SimulationConfig(const MortalityBasis& basis_) : basis(basis_) {}

    MortalityBasis basis;                 // basis.x is the entry age
    int n = 1000;
    double w = 100.0;                     // per-share contribution
    Product product = Product::tontine;
    std::function<double(int)> payout_rate; // tontine d(t), year t >= 1
    double annuity_rate = 0.0;            // annuity payment per unit of w
    double valuation_rate = 0.06;         // R
    int omega = 105;
    int runs = 10000;
    std::uint64_t seed = 0;
    bool seven_survivor_cap = false;      // historical divisor floor of 7
    int threads = 0;                      // 0 = hardware concurrency

    int years() const { return omega - static_cast<int>(basis.x); }

    void validate() const {
        if (n < 1) throw std::domain_error("SimulationConfig: n must be >= 1");
        if (runs < 1) throw std::domain_error("SimulationConfig: runs must be >= 1");
        if (!(w > 0.0)) throw std::domain_error("SimulationConfig: w must be > 0");
        if (years() < 1) throw std::domain_error("SimulationConfig: entry age must be below omega");
        if (omega > static_cast<int>(kMaxAge)) throw std::domain_error("SimulationConfig: omega exceeds the age cap");
        if (!(valuation_rate > -1.0)) throw std::domain_error("SimulationConfig: valuation rate must exceed -1");
        if (product == Product::tontine && !payout_rate)
            throw std::domain_error("SimulationConfig: tontine product needs a payout schedule");
        if (product == Product::annuity && !(annuity_rate >= 0.0))
            throw std::domain_error("SimulationConfig: annuity rate must be >= 0");
    }
};

struct SimulationResult {
    double apv = 0.0;
    double sd = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
    int runs = 0;
    std::uint64_t seed = 0;
};

// Annual death probabilities q_{x+t} for t = 0..years-1, with the terminal
// year forced to 1 (the last column of the life matrix is all zeros). Years
// the survival curve cannot reach get q = 1; nobody is alive to draw there.
inline std::vector<double> annual_qs(const MortalityBasis& basis, int years) {
    std::vector<double> q(static_cast<std::size_t>(years));
    for (int t = 0; t < years; ++t) {
        const double pt = survival_probability(basis, static_cast<double>(t));
        q[static_cast<std::size_t>(t)] =
            pt == 0.0 ? 1.0 : annual_death_prob(basis, t);
    }
    q.back() = 1.0;
    return q;
}

// Death year of each member in one run: member i is alive in years
// t < death_year[i], dead from death_year[i] on. Member 0 draws first, so
// the annuity product (which only needs member 0) reads the same stream.
inline std::vector<int> simulate_run_death_years(const SimulationConfig& config,
                                                 const std::vector<double>& q,
                                                 std::uint64_t run_index) {
    const int years = config.years();
    std::vector<int> death_year(static_cast<std::size_t>(config.n), years);
    auto gen = rng::run_stream(config.seed, run_index);
    for (int i = 0; i < config.n; ++i) {
        for (int t = 0; t < years; ++t) {
            if (gen.next_unit() < q[static_cast<std::size_t>(t)]) {
                death_year[static_cast<std::size_t>(i)] = t + 1;
                break;
            }
        }
    }
    return death_year;
}

namespace detail {

inline std::vector<int> alive_counts(const std::vector<int>& death_year, int years) {
    std::vector<int> counts(static_cast<std::size_t>(years) + 1, 0);
    counts[0] = static_cast<int>(death_year.size());
    std::vector<int> deaths(static_cast<std::size_t>(years) + 1, 0);
    for (int dy : death_year)
        deaths[static_cast<std::size_t>(dy)] += 1;
    for (int t = 1; t <= years; ++t)
        counts[static_cast<std::size_t>(t)] = counts[static_cast<std::size_t>(t) - 1]
                                            - deaths[static_cast<std::size_t>(t)];
    return counts;
}

// Present value of the representative member's (index 0) cash flows in one run.
inline double run_present_value(const SimulationConfig& config, const std::vector<double>& q,
                                const std::vector<double>& discount, std::uint64_t run_index) {
    const int years = config.years();
    if (config.product == Product::annuity) {
        auto gen = rng::run_stream(config.seed, run_index);
        int death = years;
        for (int t = 0; t < years; ++t) {
            if (gen.next_unit() < q[static_cast<std::size_t>(t)]) {
                death = t + 1;
                break;
            }
        }
        double pv = 0.0;
        for (int t = 1; t < death; ++t)
            pv += config.w * config.annuity_rate * discount[static_cast<std::size_t>(t)];
        return pv;
    }

    const auto death_year = simulate_run_death_years(config, q, run_index);
    const auto counts = alive_counts(death_year, years);
    const int death0 = death_year[0];
    const double pool_value = config.w * static_cast<double>(config.n);
    double pv = 0.0;
    for (int t = 1; t < death0; ++t) {
        int divisor = counts[static_cast<std::size_t>(t)];
        if (config.seven_survivor_cap && divisor < 7)
            divisor = 7;
        pv += pool_value * config.payout_rate(t) / static_cast<double>(divisor)
            * discount[static_cast<std::size_t>(t)];
    }
    return pv;
}

template <class PerRun>
void parallel_runs(int runs, int threads_override, PerRun&& body) {
    unsigned threads = threads_override > 0 ? static_cast<unsigned>(threads_override)
                                            : std::thread::hardware_concurrency();
    if (threads == 0) threads = 1;
    threads = std::min<unsigned>(threads, 16);
    if (runs < 256 || threads == 1) {
        for (int j = 0; j < runs; ++j) body(j);
        return;
    }
    const int chunk = (runs + static_cast<int>(threads) - 1) / static_cast<int>(threads);
    std::vector<std::future<void>> futures;
    for (unsigned w = 0; w < threads; ++w) {
        const int lo = static_cast<int>(w) * chunk;
        const int hi = std::min(runs, lo + chunk);
        if (lo >= hi) break;
        futures.push_back(std::async(std::launch::async, [lo, hi, &body] {
            for (int j = lo; j < hi; ++j) body(j);
        }));
    }
    for (auto& f : futures) f.get();
}

} // namespace detail

// Survivor counts by year for each run; counts[run][0] = n, the terminal
// year is forced to zero.
inline std::vector<std::vector<int>> simulate_pool_lifetimes(const SimulationConfig& config) {
    config.validate();
    const auto q = annual_qs(config.basis, config.years());
    std::vector<std::vector<int>> all(static_cast<std::size_t>(config.runs));
    detail::parallel_runs(config.runs, config.threads, [&](int j) {
        const auto death_year = simulate_run_death_years(config, q, static_cast<std::uint64_t>(j));
        all[static_cast<std::size_t>(j)] = detail::alive_counts(death_year, config.years());
    });
    return all;
}

// Monte Carlo distribution of the representative member's discounted cash
// flows. Runs execute concurrently; statistics are reduced in run order, so
// results are bit-identical for a given seed regardless of thread count.
inline SimulationResult simulate_present_value(const SimulationConfig& config) {
    config.validate();
    const int years = config.years();
    const auto q = annual_qs(config.basis, years);
    std::vector<double> discount(static_cast<std::size_t>(years) + 1, 1.0);
    for (int t = 1; t <= years; ++t)
        discount[static_cast<std::size_t>(t)] = discount[static_cast<std::size_t>(t) - 1]
                                              / (1.0 + config.valuation_rate);

    std::vector<double> pvs(static_cast<std::size_t>(config.runs));
    detail::parallel_runs(config.runs, config.threads, [&](int j) {
        pvs[static_cast<std::size_t>(j)] =
            detail::run_present_value(config, q, discount, static_cast<std::uint64_t>(j));
    });

    MomentAccumulator acc;
    for (double pv : pvs)
        acc.add(pv);

    SimulationResult result;
    result.apv = acc.mean();
    result.sd = acc.stddev();
    result.skewness = acc.skewness();
    result.kurtosis = acc.kurtosis();
    result.runs = config.runs;
    result.seed = config.seed;
    return result;
}

// Binomial band of per-survivor dividends along a payout curve. At time t
// the survivor count is N = 1 + Bin(n-1, tp_x) given the reference member is
// alive; the band is [n d(t)/N_hi, n d(t)/N_lo] at the requested percentiles.
struct EnvelopeBand {
    std::vector<double> times;
    std::vector<double> lo;
    std::vector<double> hi;
};

inline EnvelopeBand payout_envelope(const PoolSpec& pool, const PayoutCurve& curve,
                                    std::pair<double, double> percentiles = {0.1, 0.9}) {
    const auto [plo, phi] = percentiles;
    if (!(plo > 0.0) || !(phi < 1.0) || !(plo < phi))
        throw std::domain_error("payout_envelope: percentiles must satisfy 0 < lo < hi < 1");
    EnvelopeBand band;
    band.times = curve.grid;
    band.lo.reserve(curve.grid.size());
    band.hi.reserve(curve.grid.size());
    const int trials = pool.n - 1;
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        const double p = survival_probability(curve.basis, curve.grid[i]);
        const double d = curve.rates[i];
        const int n_lo = 1 + binomial_quantile(trials, p, plo);
        const int n_hi = 1 + binomial_quantile(trials, p, phi);
        band.lo.push_back(pool.n * d / static_cast<double>(n_hi));
        band.hi.push_back(pool.n * d / static_cast<double>(n_lo));
    }
    return band;
}

} // namespace tontine
