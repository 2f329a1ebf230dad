#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "enermod/benchgen.hpp"

namespace enermod {

namespace detail {

// Portable draws: the standard distributions differ across libraries.
inline uint64_t draw_below(std::mt19937_64& rng, uint64_t n) { return rng() % n; }
inline double draw_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace detail

// Assembles synthetic multi-core programs from random code blocks and
// message exchanges.
class AppBuilder {
public:
    using Mix = std::vector<std::pair<IClass, double>>;

    AppBuilder(std::string name, const SystemConfig& config, std::shared_ptr<const Isa> isa, uint64_t seed)
        : config_(config), isa_(std::move(isa)), rng_(seed) {
        bench_.name = std::move(name);
        bench_.kind = "application";
        bench_.dimension = "none";
        bench_.value = "0";
        bench_.program.isa = isa_;
        auto groups = enumerate_instruction_groups(*isa_, config_.vliw_slots);
        for (const auto& g : groups)
            for (int s : g.slots)
                if (s != InstructionGroup::kEmptySlot) {
                    auto& list = by_class_[(*isa_)[static_cast<size_t>(s)].iclass];
                    if (list.empty() || !(list.back().slots == g.slots)) list.push_back(g);
                }
    }

    using Block = std::vector<BundleOp>;

    // A straight-line block of `n` bundles at fresh addresses on `cpu`.
    Block code(uint32_t cpu, size_t n, const Mix& mix) {
        double total = 0;
        for (const auto& [_, w] : mix) total += w;
        Block block;
        uint32_t& addr = next_addr_[cpu];
        for (size_t i = 0; i < n; ++i) {
            double u = detail::draw_unit(rng_) * total;
            IClass cls = mix.back().first;
            for (const auto& [c, w] : mix) {
                if (u < w) {
                    cls = c;
                    break;
                }
                u -= w;
            }
            const auto& list = by_class_.at(cls);
            const InstructionGroup& g = list[detail::draw_below(rng_, list.size())];
            auto pat = static_cast<DataPattern>(detail::draw_below(rng_, kNumPatterns));
            if (static_cast<uint64_t>(addr) + g.words() > config_.imem_words()) addr = 0;
            block.push_back(BundleOp{g, addr, pat});
            addr += g.words();
        }
        return block;
    }

    void run(uint32_t cpu, const Block& block, uint32_t times = 1) {
        auto& steps = bench_.program.on(cpu).steps;
        for (uint32_t t = 0; t < times; ++t)
            for (const auto& b : block) steps.push_back({b, 1});
    }

    void send(uint32_t from, uint32_t to, uint32_t size) {
        bench_.program.on(from).steps.push_back({SendOp{to, size}, 1});
        bench_.program.on(to).steps.push_back({RecvOp{from, size}, 1});
    }

    void barrier(uint32_t cpu) { bench_.program.on(cpu).steps.push_back({SyncOp{}, 1}); }

    Microbenchmark build() {
        std::sort(bench_.program.cpus.begin(), bench_.program.cpus.end(),
                  [](const CpuProgram& a, const CpuProgram& b) { return a.cpu < b.cpu; });
        return bench_;
    }

private:
    SystemConfig config_;
    std::shared_ptr<const Isa> isa_;
    std::mt19937_64 rng_;
    Microbenchmark bench_;
    std::map<IClass, std::vector<InstructionGroup>> by_class_;
    std::map<uint32_t, uint32_t> next_addr_;
};

namespace detail {

inline uint32_t app_cpu(const SystemConfig& c, uint32_t cluster, uint32_t local) {
    return (cluster % c.n_clusters()) * c.cpus_per_cluster + local % c.cpus_per_cluster;
}

} // namespace detail

// Five reference workloads. They need at least two CPUs per cluster.
inline std::vector<Microbenchmark> reference_applications(const SystemConfig& config, std::shared_ptr<const Isa> isa,
                                                          uint64_t seed = 0) {
    if (config.cpus_per_cluster < 2) throw InvariantError("applications need two CPUs per cluster");
    using C = IClass;
    const uint32_t nc = config.n_clusters();
    auto cpu = [&](uint32_t cluster, uint32_t local) { return detail::app_cpu(config, cluster, local); };
    std::vector<Microbenchmark> apps;

    {   // pipeline of filters, alternating local and mesh hand-offs
        AppBuilder a("filter_chain", config, isa, seed * 11 + 1);
        std::vector<uint32_t> stages;
        for (uint32_t c = 0; c < nc; ++c) {
            stages.push_back(cpu(c, 0));
            stages.push_back(cpu(c, 1));
        }
        AppBuilder::Mix mix{{C::ALU, 0.4}, {C::MULDIV, 0.25}, {C::LOAD, 0.2}, {C::STORE, 0.15}};
        std::vector<AppBuilder::Block> blocks;
        for (uint32_t s : stages) blocks.push_back(a.code(s, 24, mix));
        for (int it = 0; it < 12; ++it)
            for (size_t i = 0; i < stages.size(); ++i) {
                a.run(stages[i], blocks[i]);
                if (i + 1 < stages.size()) a.send(stages[i], stages[i + 1], 64);
            }
        apps.push_back(a.build());
    }
    {   // tiled matrix multiply, partial tiles gathered on one CPU
        AppBuilder a("matmul_tiles", config, isa, seed * 11 + 2);
        AppBuilder::Mix mix{{C::SIMD, 0.5}, {C::MULDIV, 0.2}, {C::LOAD, 0.2}, {C::STORE, 0.1}};
        std::vector<uint32_t> workers;
        for (uint32_t c = 0; c < std::min(2u, nc); ++c)
            for (uint32_t l = 0; l < config.cpus_per_cluster; ++l) workers.push_back(cpu(c, l));
        std::vector<AppBuilder::Block> blocks;
        for (uint32_t w : workers) blocks.push_back(a.code(w, 32, mix));
        for (int it = 0; it < 10; ++it)
            for (size_t i = 0; i < workers.size(); ++i) {
                a.run(workers[i], blocks[i]);
                if (workers[i] != workers[0]) a.send(workers[i], workers[0], 128);
            }
        apps.push_back(a.build());
    }
    {   // bitonic-style compare-exchange network
        AppBuilder a("sorting_network", config, isa, seed * 11 + 3);
        AppBuilder::Mix mix{{C::ALU, 0.5}, {C::BRANCH, 0.3}, {C::LOAD, 0.1}, {C::STORE, 0.1}};
        std::vector<uint32_t> nodes;
        for (uint32_t c = 0; c < nc; ++c) {
            nodes.push_back(cpu(c, 0));
            nodes.push_back(cpu(c, 1));
        }
        std::vector<AppBuilder::Block> blocks;
        for (uint32_t n : nodes) blocks.push_back(a.code(n, 16, mix));
        for (int round = 0; round < 6; ++round)
            for (size_t stride = 1; stride < nodes.size(); stride <<= 1)
                for (size_t i = 0; i < nodes.size(); ++i) {
                    a.run(nodes[i], blocks[i]);
                    size_t j = i ^ stride;
                    if (j < nodes.size()) a.send(nodes[i], nodes[j], 32);
                }
        apps.push_back(a.build());
    }
    {   // radix-2 butterflies with wide exchanges
        AppBuilder a("fft_butterfly", config, isa, seed * 11 + 4);
        AppBuilder::Mix mix{{C::SIMD, 0.4}, {C::MULDIV, 0.3}, {C::ALU, 0.2}, {C::LOAD, 0.1}};
        std::vector<uint32_t> nodes;
        for (uint32_t c = 0; c < nc; ++c) {
            nodes.push_back(cpu(c, 0));
            nodes.push_back(cpu(c, config.cpus_per_cluster / 2));
        }
        std::vector<AppBuilder::Block> blocks;
        for (uint32_t n : nodes) blocks.push_back(a.code(n, 20, mix));
        for (int frame = 0; frame < 4; ++frame)
            for (size_t stride = 1; stride < nodes.size(); stride <<= 1)
                for (size_t i = 0; i < nodes.size(); ++i) {
                    a.run(nodes[i], blocks[i], 2);
                    size_t j = i ^ stride;
                    if (j < nodes.size()) a.send(nodes[i], nodes[j], 256);
                }
        apps.push_back(a.build());
    }
    {   // tree reduction over every CPU
        AppBuilder a("reduction_tree", config, isa, seed * 11 + 5);
        AppBuilder::Mix leaf{{C::ALU, 0.5}, {C::LOAD, 0.3}, {C::SIMD, 0.2}};
        AppBuilder::Mix combine{{C::ALU, 0.7}, {C::LOAD, 0.3}};
        const uint32_t n = config.n_cpus();
        for (uint32_t c = 0; c < n; ++c) a.run(c, a.code(c, 40, leaf), 3);
        for (uint32_t step = 1; step < n; step <<= 1)
            for (uint32_t c = 0; c + step < n; c += 2 * step) {
                a.send(c + step, c, 16);
                a.run(c, a.code(c, 8, combine));
            }
        for (uint32_t c = 0; c < n; ++c) a.barrier(c);
        apps.push_back(a.build());
    }
    return apps;
}

} // namespace enermod
