#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "enermod/benchgen.hpp"
#include "enermod/campaign.hpp"

namespace enermod {

struct NocSweepPoint {
    uint32_t size = 0;
    uint32_t flits = 0;
    double energy_pj = 0;  // dynamic energy of one packet
};

// One packet per size from CPU 0 of `src` to CPU 0 of `dst`; static
// energy is removed so each point is the packet's own cost.
inline std::vector<NocSweepPoint> sweep_noc(const SystemConfig& config, const OracleParams& params,
                                            std::shared_ptr<const Isa> isa, ClusterCoord src, ClusterCoord dst,
                                            const SizeRange& sizes, unsigned workers = 1) {
    if (!config.on_mesh(src) || !config.on_mesh(dst)) throw InvariantError("coordinate off-mesh");
    if (sizes.step == 0 || sizes.max < sizes.min || sizes.min == 0) throw InvariantError("bad size range");
    uint32_t s = config.cpu_id(src, 0);
    uint32_t d = config.cpu_id(dst, 0);
    if (s == d) d = config.cpu_id(dst, 1);
    std::vector<Microbenchmark> benches;
    for (uint32_t size : sizes.values()) {
        Microbenchmark b;
        b.name = "noc_s" + std::to_string(size);
        b.program.isa = isa;
        b.program.on(s).steps.push_back({SendOp{d, size}, 1});
        b.program.on(d).steps.push_back({RecvOp{s, size}, 1});
        benches.push_back(std::move(b));
    }
    auto results = run_campaign(benches, config, params, workers);
    std::vector<NocSweepPoint> out;
    for (size_t i = 0; i < benches.size(); ++i) {
        uint32_t size = sizes.min + static_cast<uint32_t>(i) * sizes.step;
        const auto& l = results[i].ledger;
        out.push_back({size, flit_count(size, config.flit_payload_bytes), l.total - l.of(EnergyCategory::static_)});
    }
    return out;
}

inline std::string noc_sweep_csv(const std::vector<NocSweepPoint>& pts) {
    std::string out = "size_bytes,flits,energy_pj\n";
    for (const auto& p : pts)
        out += std::to_string(p.size) + "," + std::to_string(p.flits) + "," + format_double(p.energy_pj) + "\n";
    return out;
}

struct ImemSweepPoint {
    uint32_t position = 0;
    uint32_t word_address = 0;
    double energy_pj = 0;  // per repetition of the measured bundle
};

// Position sweep of one group; the setup run is subtracted and the result
// divided by the repetition count.
inline std::vector<ImemSweepPoint> sweep_imem(const SystemConfig& config, const OracleParams& params,
                                              std::shared_ptr<const Isa> isa, const InstructionGroup& group, uint32_t lo,
                                              uint32_t hi, DataPattern pattern = DataPattern::zeros,
                                              const BenchOptions& opt = {}, unsigned workers = 1) {
    auto benches = gen_position_benchmarks(isa, config, group, lo, hi, pattern, opt);
    benches.push_back(gen_prologue_benchmark(isa, config, pattern, opt.cpu));
    auto results = run_campaign(benches, config, params, workers);
    const double setup = results.back().ledger.total;
    std::vector<ImemSweepPoint> out;
    for (uint32_t k = lo; k <= hi; ++k) {
        size_t i = k - lo;
        out.push_back({k, k * group.words(), (results[i].ledger.total - setup) / opt.reps});
    }
    return out;
}

inline std::string imem_sweep_csv(const std::vector<ImemSweepPoint>& pts) {
    std::string out = "position,word_address,energy_pj\n";
    for (const auto& p : pts)
        out += std::to_string(p.position) + "," + std::to_string(p.word_address) + "," + format_double(p.energy_pj) + "\n";
    return out;
}

} // namespace enermod
