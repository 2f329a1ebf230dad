#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "enermod/refsim.hpp"
#include "enermod/statetrace.hpp"
#include "enermod/sysconfig.hpp"

namespace enermod {

struct Microbenchmark {
    std::string name;
    std::string kind;       // instr, position, comm, prologue, idle, application
    std::string dimension;  // swept state dimension
    std::string value;      // swept value
    uint32_t reps = 1;
    std::string prologue;   // name of the matching setup-only benchmark, if any
    Program program;
};

struct BenchOptions {
    uint32_t reps = 64;
    uint32_t body_address = 120;  // word address of the measured bundle
    uint32_t cpu = 0;             // CPU running instruction benchmarks
};

// Setup code: load registers with the data pattern, then fill a few memory
// words with it, so every measurement starts from the same state.
inline std::vector<ProgramStep> setup_code(const Isa& isa, const SystemConfig& config, DataPattern pattern) {
    auto pick = [&](IClass cls) -> InstructionGroup {
        InstructionGroup g;
        g.slots.assign(config.vliw_slots, InstructionGroup::kEmptySlot);
        for (size_t i = 0; i < isa.size(); ++i) {
            if (isa[i].iclass != cls) continue;
            g.slots[isa[i].allowed_slots.front()] = static_cast<int>(i);
            return g;
        }
        for (size_t i = 0; i < isa.size(); ++i)
            if (isa[i].iclass == IClass::NOP) {
                g.slots[0] = static_cast<int>(i);
                return g;
            }
        throw InvariantError("setup code needs an ALU, STORE or NOP instruction");
    };
    InstructionGroup reg = pick(IClass::ALU);
    InstructionGroup mem = pick(IClass::STORE);
    std::vector<ProgramStep> steps;
    uint32_t addr = 0;
    for (int i = 0; i < 4; ++i) {
        steps.push_back({BundleOp{reg, addr, pattern}, 1});
        addr += reg.words();
    }
    for (int i = 0; i < 4; ++i) {
        steps.push_back({BundleOp{mem, addr, pattern}, 1});
        addr += mem.words();
    }
    return steps;
}

inline uint32_t setup_code_words(const Isa& isa, const SystemConfig& config) {
    uint32_t words = 0;
    for (const auto& s : setup_code(isa, config, DataPattern::zeros)) words += std::get<BundleOp>(s.op).group.words();
    return words;
}

inline std::string prologue_name(DataPattern p, uint32_t cpu) {
    return std::string("prologue_") + pattern_name(p) + "_cpu" + std::to_string(cpu);
}

inline Microbenchmark gen_prologue_benchmark(std::shared_ptr<const Isa> isa, const SystemConfig& config, DataPattern pattern,
                                             uint32_t cpu) {
    Microbenchmark b;
    b.name = prologue_name(pattern, cpu);
    b.kind = "prologue";
    b.dimension = "pattern";
    b.value = pattern_name(pattern);
    b.reps = 1;
    b.program.isa = isa;
    b.program.on(cpu).steps = setup_code(*isa, config, pattern);
    return b;
}

// Static-only measurement: one CPU idles for `reps` cycles.
inline Microbenchmark gen_idle_benchmark(std::shared_ptr<const Isa> isa, const BenchOptions& opt = {}) {
    Microbenchmark b;
    b.name = "idle";
    b.kind = "idle";
    b.dimension = "none";
    b.value = "0";
    b.reps = opt.reps;
    b.program.isa = std::move(isa);
    b.program.on(opt.cpu).steps.push_back({IdleOp{opt.reps}, 1});
    return b;
}

// Barrier cost: setup code followed by `reps` barriers.
inline Microbenchmark gen_sync_benchmark(std::shared_ptr<const Isa> isa, const SystemConfig& config,
                                         const BenchOptions& opt = {}) {
    Microbenchmark b;
    b.name = "sync";
    b.kind = "sync";
    b.dimension = "none";
    b.value = "0";
    b.reps = opt.reps;
    b.prologue = prologue_name(DataPattern::zeros, opt.cpu);
    b.program.isa = isa;
    auto& steps = b.program.on(opt.cpu).steps;
    steps = setup_code(*isa, config, DataPattern::zeros);
    steps.push_back({SyncOp{}, opt.reps});
    return b;
}

namespace detail {

inline void check_body_address(const SystemConfig& config, const Isa& isa, uint32_t addr, const InstructionGroup& g) {
    if (addr < setup_code_words(isa, config)) throw InvariantError("body address overlaps setup code");
    if (static_cast<uint64_t>(addr) + g.words() > config.imem_words()) throw InvariantError("body address out of range");
}

} // namespace detail

// One benchmark per (instruction group, pattern); groups in enumeration
// order, patterns inner.
inline std::vector<Microbenchmark> gen_instruction_benchmarks(std::shared_ptr<const Isa> isa, const SystemConfig& config,
                                                              const std::vector<DataPattern>& patterns,
                                                              const BenchOptions& opt = {}) {
    std::vector<Microbenchmark> out;
    auto groups = enumerate_instruction_groups(*isa, config.vliw_slots);
    out.reserve(groups.size() * patterns.size());
    for (const auto& g : groups) {
        detail::check_body_address(config, *isa, opt.body_address, g);
        uint64_t id = group_id(g, *isa);
        for (DataPattern p : patterns) {
            Microbenchmark b;
            b.name = "instr_g" + std::to_string(id) + "_" + pattern_name(p);
            b.kind = "instr";
            b.dimension = "group";
            b.value = std::to_string(id) + ":" + pattern_name(p);
            b.reps = opt.reps;
            b.prologue = prologue_name(p, opt.cpu);
            b.program.isa = isa;
            auto& steps = b.program.on(opt.cpu).steps;
            steps = setup_code(*isa, config, p);
            steps.push_back({BundleOp{g, opt.body_address, p}, opt.reps});
            out.push_back(std::move(b));
        }
    }
    return out;
}

// Same group at positions addr_lo..addr_hi; position k sits at word
// k * words(group).
inline std::vector<Microbenchmark> gen_position_benchmarks(std::shared_ptr<const Isa> isa, const SystemConfig& config,
                                                           const InstructionGroup& group, uint32_t addr_lo, uint32_t addr_hi,
                                                           DataPattern pattern = DataPattern::zeros,
                                                           const BenchOptions& opt = {}) {
    validate_group(group, *isa, config.vliw_slots);
    if (group.idle()) throw InvariantError("position sweep needs a non-empty group");
    if (addr_lo > addr_hi) throw InvariantError("addr_lo > addr_hi");
    if (static_cast<uint64_t>(addr_hi) * group.words() + group.words() > config.imem_words())
        throw InvariantError("position range exceeds instruction memory");
    std::vector<Microbenchmark> out;
    uint64_t id = group_id(group, *isa);
    for (uint32_t k = addr_lo; k <= addr_hi; ++k) {
        Microbenchmark b;
        b.name = "pos_g" + std::to_string(id) + "_a" + std::to_string(k);
        b.kind = "position";
        b.dimension = "position";
        b.value = std::to_string(k);
        b.reps = opt.reps;
        b.prologue = prologue_name(pattern, opt.cpu);
        b.program.isa = isa;
        auto& steps = b.program.on(opt.cpu).steps;
        steps = setup_code(*isa, config, pattern);
        steps.push_back({BundleOp{group, k * group.words(), pattern}, opt.reps});
        out.push_back(std::move(b));
    }
    return out;
}

// Characterizes the setup code itself: each setup group at each setup
// address under each pattern. With these, a position-keyed fit also
// identifies the setup bundles.
inline std::vector<Microbenchmark> gen_setup_benchmarks(std::shared_ptr<const Isa> isa, const SystemConfig& config,
                                                        const std::vector<DataPattern>& patterns,
                                                        const BenchOptions& opt = {}) {
    std::vector<Microbenchmark> out;
    std::vector<InstructionGroup> groups;
    for (const auto& s : setup_code(*isa, config, DataPattern::zeros)) {
        const auto& g = std::get<BundleOp>(s.op).group;
        if (std::find_if(groups.begin(), groups.end(), [&](const InstructionGroup& h) { return h.slots == g.slots; }) ==
            groups.end())
            groups.push_back(g);
    }
    const uint32_t words = setup_code_words(*isa, config);
    for (const auto& g : groups)
        for (DataPattern p : patterns) {
            auto sweep = gen_position_benchmarks(isa, config, g, 0, words / g.words() - 1, p, opt);
            for (auto& b : sweep) {
                b.name += std::string("_") + pattern_name(p);
                b.kind = "setup";
                out.push_back(std::move(b));
            }
        }
    return out;
}

struct CommOptions {
    uint32_t reps = 64;
    std::optional<SizeRange> sizes;  // overrides the API's send range
    bool center_window_only = false;
    size_t window = 16;
};

// Indices of the `n` points around the middle of a sweep of `len` points.
inline std::pair<size_t, size_t> center_window(size_t len, size_t n) {
    if (n >= len) return {0, len};
    size_t lo = len / 2 - n / 2;
    return {lo, lo + n};
}

namespace detail {

inline std::vector<uint32_t> comm_sizes(const ApiDescription& api, const CommOptions& opt) {
    SizeRange range;
    if (opt.sizes) {
        range = *opt.sizes;
    } else {
        const ApiOperation* send = api.find("send");
        if (!send || !send->size) throw InvariantError("api has no send size range");
        range = *send->size;
    }
    if (range.step == 0 || range.max < range.min) throw InvariantError("bad size range");
    auto sizes = range.values();
    if (opt.center_window_only) {
        auto [lo, hi] = center_window(sizes.size(), opt.window);
        sizes = std::vector<uint32_t>(sizes.begin() + static_cast<std::ptrdiff_t>(lo), sizes.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    return sizes;
}

inline std::vector<Microbenchmark> comm_sweep(std::shared_ptr<const Isa> isa, const SystemConfig& config,
                                              const std::vector<uint32_t>& sizes, uint32_t src_cpu, uint32_t dst_cpu,
                                              const std::string& tag, const CommOptions& opt) {
    std::vector<Microbenchmark> out;
    for (uint32_t size : sizes) {
        Microbenchmark b;
        b.name = "comm_" + tag + "_s" + std::to_string(size);
        b.kind = "comm";
        b.dimension = "size";
        b.value = std::to_string(size);
        b.reps = opt.reps;
        b.prologue = prologue_name(DataPattern::zeros, src_cpu);
        b.program.isa = isa;
        auto& src = b.program.on(src_cpu).steps;
        src = setup_code(*isa, config, DataPattern::zeros);
        src.push_back({SendOp{dst_cpu, size}, opt.reps});
        b.program.on(dst_cpu).steps.push_back({RecvOp{src_cpu, size}, opt.reps});
        out.push_back(std::move(b));
    }
    return out;
}

inline std::string coord_tag(ClusterCoord c) { return std::to_string(c.x) + std::to_string(c.y); }

} // namespace detail

// Packet-size sweep between CPU 0 of two different clusters.
inline std::vector<Microbenchmark> gen_comm_benchmarks(const ApiDescription& api, std::shared_ptr<const Isa> isa,
                                                       const SystemConfig& config, ClusterCoord src, ClusterCoord dst,
                                                       const CommOptions& opt = {}) {
    if (!config.on_mesh(src) || !config.on_mesh(dst)) throw InvariantError("coordinate off-mesh");
    if (src == dst) throw InvariantError("comm sweep needs different source and destination clusters");
    if (const ApiOperation* send = api.find("send")) {
        auto in = [](const std::vector<ClusterCoord>& dom, ClusterCoord c) {
            return dom.empty() || std::find(dom.begin(), dom.end(), c) != dom.end();
        };
        if (!in(send->sources, src) || !in(send->destinations, dst)) throw InvariantError("coordinates outside API domain");
    }
    auto sizes = detail::comm_sizes(api, opt);
    return detail::comm_sweep(std::move(isa), config, sizes, config.cpu_id(src, 0), config.cpu_id(dst, 0),
                              detail::coord_tag(src) + "_" + detail::coord_tag(dst), opt);
}

// Cluster-local sweep: CPU 0 to CPU 1 of one cluster over the crossbar.
inline std::vector<Microbenchmark> gen_local_comm_benchmarks(const ApiDescription& api, std::shared_ptr<const Isa> isa,
                                                             const SystemConfig& config, ClusterCoord cluster,
                                                             const CommOptions& opt = {}) {
    if (!config.on_mesh(cluster)) throw InvariantError("coordinate off-mesh");
    if (config.cpus_per_cluster < 2) throw InvariantError("local sweep needs two CPUs per cluster");
    auto sizes = detail::comm_sizes(api, opt);
    return detail::comm_sweep(std::move(isa), config, sizes, config.cpu_id(cluster, 0), config.cpu_id(cluster, 1),
                              detail::coord_tag(cluster) + "_local", opt);
}

// ---------------------------------------------------------------------------
// Comprehensive transition model for an n-state component. Each benchmark
// starts in the reference state (setup), then visits `from` and `to`.

struct TransitionBenchmark {
    std::string name;
    std::vector<uint32_t> states;
};

inline std::vector<TransitionBenchmark> gen_transition_benchmarks(uint32_t n_states, uint32_t reference = 0) {
    if (reference >= n_states) throw InvariantError("reference state out of range");
    std::vector<TransitionBenchmark> out;
    for (uint32_t a = 0; a < n_states; ++a)
        for (uint32_t b = 0; b < n_states; ++b)
            out.push_back({"trans_" + std::to_string(a) + "_" + std::to_string(b), {reference, a, b}});
    return out;
}

inline std::string transition_key(const std::string& component, uint32_t from, uint32_t to) {
    return component + "/trans/from:" + std::to_string(from) + "/to:" + std::to_string(to);
}

inline StateCountVector transition_counts(const std::string& component, const std::vector<uint32_t>& states) {
    StateCountVector v;
    v.duration = states.size();
    for (size_t i = 1; i < states.size(); ++i) ++v.counts[transition_key(component, states[i - 1], states[i])];
    return v;
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const Microbenchmark& b) {
    return json{{"name", b.name},   {"kind", b.kind},         {"swept", {{"dimension", b.dimension}, {"value", b.value}}},
                {"reps", b.reps},   {"prologue", b.prologue}, {"program", to_json(b.program)}};
}

inline Microbenchmark benchmark_from_json(const json& doc, std::shared_ptr<const Isa> isa, const SystemConfig& config) {
    Microbenchmark b;
    try {
        b.name = doc.at("name").get<std::string>();
        b.kind = doc.value("kind", std::string());
        if (doc.contains("swept")) {
            b.dimension = doc["swept"].value("dimension", std::string());
            b.value = doc["swept"].value("value", std::string());
        }
        b.reps = doc.value("reps", 1u);
        b.prologue = doc.value("prologue", std::string());
    } catch (const json::exception& e) {
        throw ParseError(std::string("benchmark: ") + e.what());
    }
    if (b.reps < 1) throw InvariantError("benchmark reps must be >= 1");
    b.program = program_from_json(doc.at("program"), std::move(isa), config);
    return b;
}

} // namespace enermod
