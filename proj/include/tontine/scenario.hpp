#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tontine/mortality.hpp"
#include "tontine/pool_math.hpp"
#include "tontine/quadrature.hpp"

namespace tontine {

using json = nlohmann::json;

// Piecewise-constant annual payout schedule; the last step applies to every
// later year.
struct ScheduleStep {
    int through_year;
    double rate;
};

// Parsed scenario file. Domain objects are validated on construction, so a
// populated Scenario is safe to dispatch on.
struct Scenario {
    std::string id = "scenario";
    std::optional<MortalityBasis> mortality;
    std::optional<PoolSpec> pool;
    std::optional<EconomicBasis> economic;

    double grid_step = 1.0 / 12.0;

    double percentile_lo = 0.1;
    double percentile_hi = 0.9;
    std::string envelope_for = "optimal";

    std::vector<double> gammas;      // compare: defaults to {pool.gamma}
    std::vector<int> pool_sizes;     // compare: defaults to {pool.n}

    std::string product = "tontine";
    double w = 100.0;
    int omega = 105;
    int runs = 10000;
    double annuity_rate = 0.14;
    double valuation_rate = 0.06;
    bool seven_survivor_cap = false;
    // default: the 1693 structure, 10% through year 7 then 7%
    std::vector<ScheduleStep> schedule{{7, 0.10}, {std::numeric_limits<int>::max(), 0.07}};

    std::optional<std::uint64_t> seed;

    double schedule_rate(int year) const {
        for (const auto& step : schedule)
            if (year <= step.through_year) return step.rate;
        return schedule.back().rate;
    }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* ctx) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known)
            throw std::domain_error(std::string("scenario: unknown key \"") + item.key() + "\" in " + ctx);
    }
}

inline double require_number(const json& j, const char* key, const char* ctx) {
    if (!j.contains(key))
        throw std::domain_error(std::string("scenario: missing key \"") + key + "\" in " + ctx);
    if (!j.at(key).is_number())
        throw std::domain_error(std::string("scenario: key \"") + key + "\" in " + ctx + " must be a number");
    return j.at(key).get<double>();
}

inline double number_or(const json& j, const char* key, const char* ctx, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number())
        throw std::domain_error(std::string("scenario: key \"") + key + "\" in " + ctx + " must be a number");
    return j.at(key).get<double>();
}

inline MortalityBasis parse_mortality(const json& j, const char* ctx) {
    if (!j.is_object())
        throw std::domain_error(std::string("scenario: ") + ctx + " must be an object");
    check_keys(j, {"m", "b", "l", "x"}, ctx);
    return MortalityBasis(require_number(j, "m", ctx), require_number(j, "b", ctx),
                          number_or(j, "l", ctx, 0.0), require_number(j, "x", ctx));
}

inline int as_int(double v, const char* what) {
    if (v != std::floor(v) || std::fabs(v) > 2.0e9)
        throw std::domain_error(std::string("scenario: ") + what + " must be an integer");
    return static_cast<int>(v);
}

} // namespace detail

inline Scenario parse_scenario(const json& j) {
    if (!j.is_object())
        throw std::domain_error("scenario: document root must be an object");
    detail::check_keys(j, {"id", "mortality", "pool", "economic",
                           "grid", "payout", "compare", "simulate", "seed"}, "scenario root");
    Scenario sc;

    if (j.contains("id")) {
        if (!j.at("id").is_string())
            throw std::domain_error("scenario: id must be a string");
        sc.id = j.at("id").get<std::string>();
    }
    if (j.contains("mortality"))
        sc.mortality = detail::parse_mortality(j.at("mortality"), "mortality");

    if (j.contains("pool")) {
        const auto& p = j.at("pool");
        detail::check_keys(p, {"n", "gamma"}, "pool");
        sc.pool = PoolSpec(detail::as_int(detail::require_number(p, "n", "pool"), "pool.n"),
                           detail::require_number(p, "gamma", "pool"));
    }
    if (j.contains("economic")) {
        const auto& e = j.at("economic");
        detail::check_keys(e, {"r", "loading"}, "economic");
        sc.economic = EconomicBasis(detail::require_number(e, "r", "economic"),
                                    detail::number_or(e, "loading", "economic", 0.0));
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::check_keys(g, {"step"}, "grid");
        sc.grid_step = detail::require_number(g, "step", "grid");
        if (!(sc.grid_step > 0.0) || !(sc.grid_step <= 5.0))
            throw std::domain_error("scenario: grid.step must lie in (0, 5]");
    }
    if (j.contains("payout")) {
        const auto& p = j.at("payout");
        detail::check_keys(p, {"percentiles", "envelope_for"}, "payout");
        if (p.contains("percentiles")) {
            const auto& pct = p.at("percentiles");
            if (!pct.is_array() || pct.size() != 2 || !pct[0].is_number() || !pct[1].is_number())
                throw std::domain_error("scenario: payout.percentiles must be [lo, hi]");
            sc.percentile_lo = pct[0].get<double>();
            sc.percentile_hi = pct[1].get<double>();
            if (!(sc.percentile_lo > 0.0) || !(sc.percentile_hi < 1.0) || !(sc.percentile_lo < sc.percentile_hi))
                throw std::domain_error("scenario: payout.percentiles must satisfy 0 < lo < hi < 1");
        }
        if (p.contains("envelope_for")) {
            sc.envelope_for = p.at("envelope_for").get<std::string>();
            if (sc.envelope_for != "optimal" && sc.envelope_for != "natural" && sc.envelope_for != "flat")
                throw std::domain_error("scenario: payout.envelope_for must be optimal, natural or flat");
        }
    }
    if (j.contains("compare")) {
        const auto& c = j.at("compare");
        detail::check_keys(c, {"gammas", "pool_sizes"}, "compare");
        if (c.contains("gammas")) {
            for (const auto& g : c.at("gammas")) {
                if (!g.is_number() || !(g.get<double>() > 0.0))
                    throw std::domain_error("scenario: compare.gammas must be positive numbers");
                sc.gammas.push_back(g.get<double>());
            }
        }
        if (c.contains("pool_sizes")) {
            for (const auto& n : c.at("pool_sizes")) {
                if (!n.is_number())
                    throw std::domain_error("scenario: compare.pool_sizes must be integers");
                const int v = detail::as_int(n.get<double>(), "compare.pool_sizes entry");
                if (v < 1)
                    throw std::domain_error("scenario: compare.pool_sizes must be >= 1");
                sc.pool_sizes.push_back(v);
            }
        }
    }
    if (j.contains("simulate")) {
        const auto& s = j.at("simulate");
        detail::check_keys(s, {"product", "w", "omega", "runs", "annuity_rate",
                               "valuation_rate", "schedule", "seven_survivor_cap"}, "simulate");
        if (s.contains("product")) {
            sc.product = s.at("product").get<std::string>();
            if (sc.product != "tontine" && sc.product != "annuity")
                throw std::domain_error("scenario: simulate.product must be tontine or annuity");
        }
        sc.w = detail::number_or(s, "w", "simulate", sc.w);
        if (!(sc.w > 0.0)) throw std::domain_error("scenario: simulate.w must be > 0");
        sc.omega = detail::as_int(detail::number_or(s, "omega", "simulate", sc.omega), "simulate.omega");
        if (sc.omega < 1 || sc.omega > static_cast<int>(kMaxAge))
            throw std::domain_error("scenario: simulate.omega must lie in [1, 130]");
        sc.runs = detail::as_int(detail::number_or(s, "runs", "simulate", sc.runs), "simulate.runs");
        if (sc.runs < 1) throw std::domain_error("scenario: simulate.runs must be >= 1");
        sc.annuity_rate = detail::number_or(s, "annuity_rate", "simulate", sc.annuity_rate);
        if (!(sc.annuity_rate >= 0.0)) throw std::domain_error("scenario: simulate.annuity_rate must be >= 0");
        sc.valuation_rate = detail::number_or(s, "valuation_rate", "simulate", sc.valuation_rate);
        if (!(sc.valuation_rate > -1.0)) throw std::domain_error("scenario: simulate.valuation_rate must exceed -1");
        if (s.contains("seven_survivor_cap")) {
            if (!s.at("seven_survivor_cap").is_boolean())
                throw std::domain_error("scenario: simulate.seven_survivor_cap must be a boolean");
            sc.seven_survivor_cap = s.at("seven_survivor_cap").get<bool>();
        }
        if (s.contains("schedule")) {
            const auto& arr = s.at("schedule");
            if (!arr.is_array() || arr.empty())
                throw std::domain_error("scenario: simulate.schedule must be a non-empty array");
            sc.schedule.clear();
            int prev = 0;
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const auto& step = arr[i];
                detail::check_keys(step, {"through_year", "rate"}, "simulate.schedule step");
                const double rate = detail::require_number(step, "rate", "simulate.schedule step");
                if (!(rate >= 0.0))
                    throw std::domain_error("scenario: schedule rates must be >= 0");
                int through = std::numeric_limits<int>::max();
                if (step.contains("through_year")) {
                    through = detail::as_int(step.at("through_year").get<double>(), "schedule.through_year");
                    if (through <= prev)
                        throw std::domain_error("scenario: schedule through_year values must be ascending");
                    prev = through;
                } else if (i + 1 != arr.size()) {
                    throw std::domain_error("scenario: only the last schedule step may omit through_year");
                }
                sc.schedule.push_back({through, rate});
            }
        }
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer() && !j.at("seed").is_number_unsigned())
            throw std::domain_error("scenario: seed must be an integer");
        sc.seed = j.at("seed").get<std::uint64_t>();
    }
    return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::domain_error(std::string("scenario: invalid JSON: ") + e.what());
    }
    return parse_scenario(j);
}

} // namespace tontine
