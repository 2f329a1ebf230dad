#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "enermod/benchgen.hpp"
#include "enermod/refsim.hpp"
#include "enermod/statetrace.hpp"

namespace enermod {

// Runs every benchmark through the reference simulator. Results are stored
// by index, so the output does not depend on the worker count.
inline std::vector<SimResult> run_campaign(const std::vector<Microbenchmark>& benchmarks, const SystemConfig& config,
                                           const OracleParams& params, unsigned workers = 1) {
    std::vector<SimResult> results(benchmarks.size());
    std::vector<std::exception_ptr> errors(benchmarks.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i = next++; i < benchmarks.size(); i = next++) {
            try {
                results[i] = run_program(config, params, benchmarks[i].program);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<size_t>(1, benchmarks.size()))));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

struct Observation {
    std::string name;
    std::map<std::string, double> counts;
    double duration = 0;
    double measured = 0;
};

struct ObservationOptions {
    bool subtract_prologue = true;  // ignored for saturating functions
    bool include_prologues = true;
};

// Turns simulated benchmarks into regression rows. For linear functions the
// setup-only run is subtracted and the remainder divided by the repetition
// count, which leaves the per-repetition counts and energy. Saturating
// functions are not additive, so their rows use the whole run.
inline std::vector<Observation> build_observations(const std::vector<Microbenchmark>& benchmarks,
                                                   const std::vector<SimResult>& results, const ModelFunction& f,
                                                   const ObservationOptions& opt = {}) {
    if (benchmarks.size() != results.size()) throw InvariantError("benchmark/result count mismatch");
    std::unordered_map<std::string, size_t> by_name;
    for (size_t i = 0; i < benchmarks.size(); ++i) by_name.emplace(benchmarks[i].name, i);

    std::vector<StateCountVector> counts(benchmarks.size());
    for (size_t i = 0; i < benchmarks.size(); ++i) counts[i] = abstract_trace(results[i].trace, f);

    const bool subtract = opt.subtract_prologue && f.linear();
    std::vector<Observation> out;
    for (size_t i = 0; i < benchmarks.size(); ++i) {
        const auto& b = benchmarks[i];
        Observation o;
        o.name = b.name;
        if (!subtract) {
            for (const auto& [k, c] : counts[i].counts) o.counts[k] = static_cast<double>(c);
            o.duration = static_cast<double>(counts[i].duration);
            o.measured = results[i].ledger.total;
            out.push_back(std::move(o));
            continue;
        }
        if (b.kind == "prologue") {
            if (!opt.include_prologues) continue;
            for (const auto& [k, c] : counts[i].counts) o.counts[k] = static_cast<double>(c);
            o.duration = static_cast<double>(counts[i].duration);
            o.measured = results[i].ledger.total;
            out.push_back(std::move(o));
            continue;
        }
        double reps = static_cast<double>(b.reps);
        std::map<std::string, double> c;
        for (const auto& [k, v] : counts[i].counts) c[k] = static_cast<double>(v);
        double duration = static_cast<double>(counts[i].duration);
        double energy = results[i].ledger.total;
        if (!b.prologue.empty()) {
            auto it = by_name.find(b.prologue);
            if (it == by_name.end()) throw InvariantError("benchmark '" + b.name + "' needs setup run '" + b.prologue + "'");
            for (const auto& [k, v] : counts[it->second].counts) c[k] -= static_cast<double>(v);
            duration -= static_cast<double>(counts[it->second].duration);
            energy -= results[it->second].ledger.total;
        }
        for (const auto& [k, v] : c)
            if (v != 0) o.counts[k] = v / reps;
        o.duration = duration / reps;
        o.measured = energy / reps;
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace enermod
