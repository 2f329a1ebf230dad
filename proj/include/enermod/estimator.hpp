#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "enermod/benchgen.hpp"
#include "enermod/campaign.hpp"
#include "enermod/modelfit.hpp"
#include "enermod/statetrace.hpp"

namespace enermod {

struct EnergyEstimate {
    double total = 0;
    std::map<std::string, double> breakdown;      // by component class, plus "static"
    std::map<std::string, double> contributions;  // by model-state key
    double coverage = 1.0;                        // share of state counts with a known constant
    std::vector<std::string> missing_keys;
};

inline EnergyEstimate estimate(const StateCountVector& counts, const EnergyModel& model) {
    EnergyEstimate est;
    uint64_t covered = 0, total = 0;
    for (const auto& [key, c] : counts.counts) {
        total += c;
        auto v = model.lookup(key);
        if (!v) {
            est.missing_keys.push_back(key);
            continue;
        }
        covered += c;
        double e = static_cast<double>(c) * *v;
        est.contributions[key] = e;
        est.breakdown[strip_index(key.substr(0, key.find('/')))] += e;
    }
    est.breakdown["static"] += static_cast<double>(counts.duration) * model.static_pj_per_cycle;
    for (const auto& [_, e] : est.breakdown) est.total += e;
    est.coverage = total ? static_cast<double>(covered) / static_cast<double>(total) : 1.0;
    return est;
}

inline EnergyEstimate estimate(const Trace& trace, const EnergyModel& model) {
    return estimate(abstract_trace(trace, model.function), model);
}

inline json to_json(const EnergyEstimate& e) {
    json breakdown = json::object();
    for (const auto& [k, v] : e.breakdown) breakdown[k] = v;
    json contributions = json::object();
    for (const auto& [k, v] : e.contributions) contributions[k] = v;
    return json{{"total_pj", e.total},
                {"coverage", e.coverage},
                {"breakdown", breakdown},
                {"contributions", contributions},
                {"missing_keys", e.missing_keys}};
}

// ---------------------------------------------------------------------------
// Validation against the reference simulator

struct ValidationRow {
    std::string name;
    double truth = 0;
    double estimate = 0;
    double rel_error = 0;
    double coverage = 1.0;
};

struct ErrorReport {
    std::vector<ValidationRow> rows;
    std::vector<std::string> excluded;  // truth below the floor
    double mean_rel_error = 0;
    double max_rel_error = 0;
    double oracle_seconds = 0;
    double estimate_seconds = 0;
    double speedup() const { return estimate_seconds > 0 ? oracle_seconds / estimate_seconds : 0.0; }
};

inline constexpr double kTruthFloorPj = 1.0;

inline ErrorReport validate(const EnergyModel& model, const std::vector<Microbenchmark>& apps, const SystemConfig& config,
                            const OracleParams& params) {
    using clock = std::chrono::steady_clock;
    ErrorReport rep;
    double sum = 0;
    for (const auto& app : apps) {
        auto t0 = clock::now();
        SimResult sim = run_program(config, params, app.program);
        auto t1 = clock::now();
        EnergyEstimate est = estimate(sim.trace, model);
        auto t2 = clock::now();
        rep.oracle_seconds += std::chrono::duration<double>(t1 - t0).count();
        rep.estimate_seconds += std::chrono::duration<double>(t2 - t1).count();
        double truth = sim.ledger.total;
        if (truth < kTruthFloorPj) {
            rep.excluded.push_back(app.name);
            continue;
        }
        ValidationRow row{app.name, truth, est.total, std::abs(est.total - truth) / truth, est.coverage};
        sum += row.rel_error;
        rep.max_rel_error = std::max(rep.max_rel_error, row.rel_error);
        rep.rows.push_back(row);
    }
    rep.mean_rel_error = rep.rows.empty() ? 0.0 : sum / static_cast<double>(rep.rows.size());
    return rep;
}

inline std::string validation_csv(const ErrorReport& rep) {
    std::string out = "benchmark,truth_pj,estimate_pj,rel_error,coverage\n";
    for (const auto& r : rep.rows)
        out += r.name + "," + format_double(r.truth) + "," + format_double(r.estimate) + "," + format_double(r.rel_error) +
               "," + format_double(r.coverage) + "\n";
    return out;
}

inline json validation_summary(const ErrorReport& rep) {
    return json{{"benchmarks", rep.rows.size()},
                {"excluded", rep.excluded},
                {"mean_rel_error", rep.mean_rel_error},
                {"max_rel_error", rep.max_rel_error}};
}

} // namespace enermod
