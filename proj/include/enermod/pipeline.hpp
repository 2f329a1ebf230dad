#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "enermod/benchgen.hpp"
#include "enermod/campaign.hpp"
#include "enermod/modelfit.hpp"

namespace enermod {

struct TrainingOptions {
    BenchOptions bench;
    size_t window = 16;  // packet sizes per hop class
    unsigned workers = 1;
};

// Setup runs, every instruction group under every pattern, idle, barrier,
// and a packet-size window for each hop distance reachable from cluster
// (0,0), including the cluster-local crossbar.
inline std::vector<Microbenchmark> training_benchmarks(const ApiDescription& api, std::shared_ptr<const Isa> isa,
                                                       const SystemConfig& config, const TrainingOptions& opt = {}) {
    std::vector<Microbenchmark> out;
    for (DataPattern p : all_patterns()) out.push_back(gen_prologue_benchmark(isa, config, p, opt.bench.cpu));
    auto instr = gen_instruction_benchmarks(isa, config, all_patterns(), opt.bench);
    out.insert(out.end(), instr.begin(), instr.end());
    out.push_back(gen_idle_benchmark(isa, opt.bench));
    out.push_back(gen_sync_benchmark(isa, config, opt.bench));

    CommOptions comm;
    comm.reps = opt.bench.reps;
    comm.center_window_only = true;
    comm.window = opt.window;
    ClusterCoord origin{0, 0};
    if (config.cpus_per_cluster >= 2) {
        auto local = gen_local_comm_benchmarks(api, isa, config, origin, comm);
        out.insert(out.end(), local.begin(), local.end());
    }
    std::map<uint32_t, ClusterCoord> by_hops;
    for (uint32_t c = 0; c < config.n_clusters(); ++c) {
        ClusterCoord cc = config.cluster_coord(c);
        uint32_t h = manhattan_dist(origin, cc);
        if (h > 0) by_hops.emplace(h, cc);
    }
    for (const auto& [h, dst] : by_hops) {
        auto sweep = gen_comm_benchmarks(api, isa, config, origin, dst, comm);
        out.insert(out.end(), sweep.begin(), sweep.end());
    }
    return out;
}

struct TrainedModel {
    EnergyModel model;
    FitReport report;
    std::map<std::string, LineFit> noc_fits;
};

struct TrainOptions {
    bool noc_reducers = true;
    ReducerOptions reducer;
};

// Fits a model of function `f` on a simulated training campaign. Packet
// families are then folded into staircase reducers when requested.
inline TrainedModel train_model(const std::vector<Microbenchmark>& benchmarks, const std::vector<SimResult>& results,
                                const ModelFunction& f, const SystemConfig& config, const TrainOptions& opt = {}) {
    ObservationOptions oo;
    oo.subtract_prologue = true;
    oo.include_prologues = false;
    auto obs = build_observations(benchmarks, results, f, oo);
    FitOptions fo;
    fo.clock_hz = config.clock_hz;
    FitResult fit = fit_constants(obs, f, fo);
    TrainedModel tm;
    tm.model = std::move(fit.model);
    tm.report = std::move(fit.report);
    bool has_packets = false;
    for (const auto& [k, _] : tm.model.constants)
        if (k.rfind("noc/packet/", 0) == 0) has_packets = true;
    if (opt.noc_reducers && has_packets) {
        ReducerOptions ro = opt.reducer;
        ro.flit_bytes = config.flit_payload_bytes;
        auto red = fit_noc_reducers(tm.model, ro);
        tm.model = std::move(red.model);
        tm.noc_fits = std::move(red.fits);
    }
    return tm;
}

inline TrainedModel train_default_model(const SystemConfig& config, const OracleParams& params, unsigned workers = 1,
                                        const ModelFunction& f = fine_grained_function()) {
    auto isa = std::make_shared<const Isa>(default_isa());
    auto benches = training_benchmarks(default_api(), isa, config);
    auto results = run_campaign(benches, config, params, workers);
    return train_model(benches, results, f, config);
}

} // namespace enermod
