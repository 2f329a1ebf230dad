#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "enermod/sysconfig.hpp"
#include "enermod/trace.hpp"

namespace enermod {

enum class DataPattern : uint8_t { zeros, ones, alternating };
inline constexpr int kNumPatterns = 3;

inline const char* pattern_name(DataPattern p) {
    static const char* names[] = {"zeros", "ones", "alternating"};
    return names[static_cast<int>(p)];
}

inline DataPattern parse_pattern(const std::string& s) {
    for (int p = 0; p < kNumPatterns; ++p)
        if (s == pattern_name(static_cast<DataPattern>(p))) return static_cast<DataPattern>(p);
    throw ParseError("unknown data pattern '" + s + "'");
}

inline std::vector<DataPattern> all_patterns() {
    return {DataPattern::zeros, DataPattern::ones, DataPattern::alternating};
}

// Detailed synthetic energy parameters of the reference oracle. Energies in
// pJ per event, static power in pW per component instance.
struct OracleParams {
    std::array<std::array<double, kNumPatterns>, kNumIClasses> core_energy{};
    double empty_slot_energy = 0;
    double imem_base_uncompressed = 0;
    double imem_base_compressed = 0;
    double imem_spatial_coeff = 0;
    std::array<double, kNumPatterns> dmem_access_energy{};
    double router_flit_energy = 0;
    double link_flit_energy = 0;
    double ni_in_flit_energy = 0;
    double ni_out_flit_energy = 0;
    double bus_flit_energy = 0;
    double packet_header_energy = 0;
    double sync_energy = 0;
    double static_power_cpu = 0;
    double static_power_router = 0;
    double static_power_ni = 0;

    friend bool operator==(const OracleParams&, const OracleParams&) = default;

    double core(IClass c, DataPattern p) const {
        return core_energy[static_cast<size_t>(c)][static_cast<size_t>(p)];
    }
    double imem_base(bool compressed) const { return compressed ? imem_base_compressed : imem_base_uncompressed; }
    double dmem(DataPattern p) const { return dmem_access_energy[static_cast<size_t>(p)]; }

    template <class F>
    void for_each_scalar(F&& f) {
        for (int c = 0; c < kNumIClasses; ++c)
            for (int p = 0; p < kNumPatterns; ++p)
                f(std::string("core_") + iclass_name(static_cast<IClass>(c)) + "_" + pattern_name(static_cast<DataPattern>(p)),
                  core_energy[static_cast<size_t>(c)][static_cast<size_t>(p)]);
        f("empty_slot_energy", empty_slot_energy);
        f("imem_base_uncompressed", imem_base_uncompressed);
        f("imem_base_compressed", imem_base_compressed);
        f("imem_spatial_coeff", imem_spatial_coeff);
        for (int p = 0; p < kNumPatterns; ++p)
            f(std::string("dmem_") + pattern_name(static_cast<DataPattern>(p)), dmem_access_energy[static_cast<size_t>(p)]);
        f("router_flit_energy", router_flit_energy);
        f("link_flit_energy", link_flit_energy);
        f("ni_in_flit_energy", ni_in_flit_energy);
        f("ni_out_flit_energy", ni_out_flit_energy);
        f("bus_flit_energy", bus_flit_energy);
        f("packet_header_energy", packet_header_energy);
        f("sync_energy", sync_energy);
        f("static_power_cpu", static_power_cpu);
        f("static_power_router", static_power_router);
        f("static_power_ni", static_power_ni);
    }

    void validate() const {
        auto copy = *this;
        copy.for_each_scalar([](const std::string& name, double& v) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw InvariantError("oracle param " + name + " must be >= 0");
        });
        for (int p = 0; p < kNumPatterns; ++p) {
            auto pat = static_cast<DataPattern>(p);
            if (!(core(IClass::NOP, pat) < core(IClass::SIMD, pat)))
                throw InvariantError("oracle params: NOP core energy must be below SIMD for every pattern");
        }
    }
};

// Shipped calibration. CPU bundle energies land between roughly 22 and
// 54 pJ per cycle at 700 MHz, NOP lowest and SIMD highest; the spatial
// coefficient spreads a 2-slot NOP over ~1.7 pJ across the first 800
// positions.
inline OracleParams default_oracle_params() {
    OracleParams p;
    p.core_energy = {{
        {3.0, 3.2, 3.4},     // NOP
        {6.0, 6.8, 7.6},     // ALU
        {11.0, 12.5, 14.0},  // SIMD
        {9.0, 10.2, 11.4},   // MULDIV
        {5.0, 5.5, 6.0},     // LOAD
        {5.5, 6.0, 6.5},     // STORE
        {4.5, 4.8, 5.1},     // BRANCH
    }};
    p.empty_slot_energy = 1.5;
    p.imem_base_uncompressed = 8.0;
    p.imem_base_compressed = 5.0;
    p.imem_spatial_coeff = 0.19;
    p.dmem_access_energy = {4.0, 4.8, 5.6};
    p.router_flit_energy = 1.6;
    p.link_flit_energy = 0.9;
    p.ni_in_flit_energy = 1.1;
    p.ni_out_flit_energy = 1.2;
    p.bus_flit_energy = 1.4;
    p.packet_header_energy = 6.0;
    p.sync_energy = 45.0;
    p.static_power_cpu = 1.2e9;
    p.static_power_router = 6.0e8;
    p.static_power_ni = 4.0e8;
    return p;
}

inline json to_json(const OracleParams& params) {
    json o = json::object();
    auto copy = params;
    copy.for_each_scalar([&](const std::string& name, double& v) { o[name] = v; });
    return o;
}

// Keys absent from the document keep their default value.
inline OracleParams parse_oracle_params(const std::string& text) {
    json doc = detail::parse_json_text(text, "oracle params");
    if (!doc.is_object()) throw ParseError("oracle params: top level must be an object");
    OracleParams p = default_oracle_params();
    size_t seen = 0;
    p.for_each_scalar([&](const std::string& name, double& v) {
        if (!doc.contains(name)) return;
        if (!doc[name].is_number()) throw ParseError("oracle params: " + name + " must be a number");
        v = doc[name].get<double>();
        ++seen;
    });
    if (seen != doc.size()) {
        for (const auto& [key, _] : doc.items()) {
            bool known = false;
            p.for_each_scalar([&](const std::string& name, double&) { known = known || name == key; });
            if (!known) throw ParseError("oracle params: unknown key '" + key + "'");
        }
    }
    p.validate();
    return p;
}

inline OracleParams load_oracle_params(const std::string& path) {
    return parse_oracle_params(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Programs

struct BundleOp {
    InstructionGroup group;
    uint32_t addr = 0;  // imem word address
    DataPattern pattern = DataPattern::zeros;
    friend bool operator==(const BundleOp&, const BundleOp&) = default;
};
struct SendOp {
    uint32_t dst = 0;
    uint32_t size = 0;
    friend bool operator==(const SendOp&, const SendOp&) = default;
};
struct RecvOp {
    uint32_t src = 0;
    uint32_t size = 0;
    friend bool operator==(const RecvOp&, const RecvOp&) = default;
};
struct SyncOp {
    friend bool operator==(const SyncOp&, const SyncOp&) = default;
};
struct IdleOp {
    uint32_t cycles = 1;
    friend bool operator==(const IdleOp&, const IdleOp&) = default;
};

using Op = std::variant<BundleOp, SendOp, RecvOp, SyncOp, IdleOp>;

struct ProgramStep {
    Op op;
    uint32_t repeat = 1;
    friend bool operator==(const ProgramStep&, const ProgramStep&) = default;
};

struct CpuProgram {
    uint32_t cpu = 0;
    std::vector<ProgramStep> steps;
    friend bool operator==(const CpuProgram&, const CpuProgram&) = default;
};

struct Program {
    std::shared_ptr<const Isa> isa;
    std::vector<CpuProgram> cpus;

    friend bool operator==(const Program& l, const Program& r) { return l.cpus == r.cpus; }

    CpuProgram& on(uint32_t cpu) {
        for (auto& c : cpus)
            if (c.cpu == cpu) return c;
        cpus.push_back(CpuProgram{cpu, {}});
        return cpus.back();
    }
};

inline uint32_t manhattan_dist(ClusterCoord a, ClusterCoord b) {
    auto d = [](uint32_t u, uint32_t v) { return u > v ? u - v : v - u; };
    return d(a.x, b.x) + d(a.y, b.y);
}

// Routers visited by dimension-ordered (X then Y) routing, source and
// destination included.
inline std::vector<ClusterCoord> xy_route(ClusterCoord src, ClusterCoord dst) {
    std::vector<ClusterCoord> path{src};
    ClusterCoord cur = src;
    while (cur.x != dst.x) {
        cur.x = cur.x < dst.x ? cur.x + 1 : cur.x - 1;
        path.push_back(cur);
    }
    while (cur.y != dst.y) {
        cur.y = cur.y < dst.y ? cur.y + 1 : cur.y - 1;
        path.push_back(cur);
    }
    return path;
}

inline uint32_t flit_count(uint32_t size_bytes, uint32_t flit_payload_bytes) {
    return (size_bytes + flit_payload_bytes - 1) / flit_payload_bytes;
}

// Decoder-depth proxy: set bits of the bank-local word index.
inline double imem_spatial(const OracleParams& params, const SystemConfig& config, uint32_t word_address) {
    if (word_address >= config.imem_words()) throw InvariantError("imem address out of range");
    return params.imem_spatial_coeff * std::popcount(word_address % config.bank_words);
}

inline void validate_program(const SystemConfig& config, const Program& program) {
    if (!program.isa) throw InvariantError("program has no ISA");
    std::map<std::tuple<uint32_t, uint32_t, uint32_t>, int64_t> channel_balance;
    std::vector<bool> seen(config.n_cpus(), false);
    for (const auto& cp : program.cpus) {
        if (cp.cpu >= config.n_cpus()) throw InvariantError("program cpu " + std::to_string(cp.cpu) + " off platform");
        if (seen[cp.cpu]) throw InvariantError("program lists cpu " + std::to_string(cp.cpu) + " twice");
        seen[cp.cpu] = true;
        for (const auto& step : cp.steps) {
            if (step.repeat < 1) throw InvariantError("repeat must be >= 1");
            std::visit(
                [&](const auto& op) {
                    using T = std::decay_t<decltype(op)>;
                    if constexpr (std::is_same_v<T, BundleOp>) {
                        validate_group(op.group, *program.isa, config.vliw_slots);
                        if (op.group.idle()) throw InvariantError("bundle must occupy at least one slot");
                        if (static_cast<uint64_t>(op.addr) + op.group.words() > config.imem_words())
                            throw InvariantError("imem address " + std::to_string(op.addr) + " out of range");
                    } else if constexpr (std::is_same_v<T, SendOp>) {
                        if (op.dst >= config.n_cpus()) throw InvariantError("send destination off platform");
                        if (op.dst == cp.cpu) throw InvariantError("send to self");
                        if (op.size < 1) throw InvariantError("send size must be >= 1");
                        channel_balance[{cp.cpu, op.dst, op.size}] += step.repeat;
                    } else if constexpr (std::is_same_v<T, RecvOp>) {
                        if (op.src >= config.n_cpus()) throw InvariantError("recv source off platform");
                        if (op.src == cp.cpu) throw InvariantError("recv from self");
                        channel_balance[{op.src, cp.cpu, op.size}] -= step.repeat;
                    } else if constexpr (std::is_same_v<T, IdleOp>) {
                        if (op.cycles < 1) throw InvariantError("idle cycles must be >= 1");
                    }
                },
                step.op);
        }
    }
    for (const auto& [ch, bal] : channel_balance)
        if (bal != 0) throw InvariantError("unmatched send/recv on channel " + std::to_string(std::get<0>(ch)) + "->" +
                                           std::to_string(std::get<1>(ch)));
}

// ---------------------------------------------------------------------------
// Energy ledger

enum class EnergyCategory : uint8_t { core, imem, dmem, bus, router, ni, sync, static_, unclassified };
inline constexpr int kNumCategories = 9;

inline const char* category_name(EnergyCategory c) {
    static const char* names[] = {"core", "imem", "dmem", "bus", "router", "ni", "sync", "static", "unclassified"};
    return names[static_cast<int>(c)];
}

struct LedgerEntry {
    uint64_t cycle = 0;
    ComponentId component;
    EnergyCategory category = EnergyCategory::unclassified;
    double pj = 0;
    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

struct EnergyLedger {
    double total = 0;
    std::array<double, kNumCategories> breakdown{};
    std::vector<LedgerEntry> entries;

    friend bool operator==(const EnergyLedger&, const EnergyLedger&) = default;

    double of(EnergyCategory c) const { return breakdown[static_cast<size_t>(c)]; }
};

// CSV: component,energy_pj with one row per category and a final total row.
inline std::string ledger_to_csv(const EnergyLedger& l) {
    std::string out = "component,energy_pj\n";
    for (int c = 0; c < kNumCategories; ++c)
        out += std::string(category_name(static_cast<EnergyCategory>(c))) + "," + format_double(l.breakdown[static_cast<size_t>(c)]) + "\n";
    out += "total," + format_double(l.total) + "\n";
    return out;
}

inline EnergyLedger ledger_from_csv(const std::string& text) {
    EnergyLedger l;
    std::istringstream in(text);
    std::string line;
    bool header = true, have_total = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line != "component,energy_pj") throw ParseError("ledger: bad header");
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError("ledger: bad row '" + line + "'");
        std::string name = line.substr(0, comma);
        double v = std::stod(line.substr(comma + 1));
        if (name == "total") {
            l.total = v;
            have_total = true;
            continue;
        }
        bool found = false;
        for (int c = 0; c < kNumCategories; ++c)
            if (name == category_name(static_cast<EnergyCategory>(c))) {
                l.breakdown[static_cast<size_t>(c)] = v;
                found = true;
            }
        if (!found) throw ParseError("ledger: unknown component '" + name + "'");
    }
    if (!have_total) throw ParseError("ledger: missing total row");
    return l;
}

struct SimResult {
    Trace trace;
    EnergyLedger ledger;
};

namespace detail {

struct ComponentIndexer {
    uint32_t n_cpus;
    uint32_t n_clusters;

    size_t count() const { return 2u * n_cpus + 3u * n_clusters; }
    size_t rank(ComponentId c) const {
        switch (c.cls) {
        case ComponentClass::cpu: return c.index;
        case ComponentClass::dmem: return n_cpus + c.index;
        case ComponentClass::router: return 2u * n_cpus + c.index;
        case ComponentClass::ni: return 2u * n_cpus + n_clusters + c.index;
        case ComponentClass::bus: return 2u * n_cpus + 2u * n_clusters + c.index;
        }
        return 0;
    }
    ComponentId at(size_t r) const {
        if (r < n_cpus) return {ComponentClass::cpu, static_cast<uint32_t>(r)};
        r -= n_cpus;
        if (r < n_cpus) return {ComponentClass::dmem, static_cast<uint32_t>(r)};
        r -= n_cpus;
        if (r < n_clusters) return {ComponentClass::router, static_cast<uint32_t>(r)};
        r -= n_clusters;
        if (r < n_clusters) return {ComponentClass::ni, static_cast<uint32_t>(r)};
        r -= n_clusters;
        return {ComponentClass::bus, static_cast<uint32_t>(r)};
    }
};

} // namespace detail

// Executes the program one op per cycle per CPU. Sends launch a packet whose
// flits occupy consecutive cycles (no contention). Idle cycles are emitted
// explicitly for every component instance, and the ledger carries one entry
// per energy contribution.
inline SimResult run_program(const SystemConfig& config, const OracleParams& params, const Program& program) {
    validate_program(config, program);
    const Isa& isa = *program.isa;
    detail::ComponentIndexer indexer{config.n_cpus(), config.n_clusters()};

    SimResult res;
    auto& events = res.trace.events;
    auto& entries = res.ledger.entries;
    auto charge = [&](uint64_t cycle, ComponentId comp, EnergyCategory cat, double pj) {
        entries.push_back(LedgerEntry{cycle, comp, cat, pj});
    };
    auto emit = [&](uint64_t cycle, ComponentId comp, EventKind kind, const Attrs& attrs) {
        events.push_back(StateEvent{cycle, comp, kind, attrs});
    };

    auto packet = [&](uint64_t t, uint32_t src_cpu, uint32_t dst_cpu, uint32_t size) {
        ClusterCoord sc = config.coord_of_cpu(src_cpu);
        ClusterCoord dc = config.coord_of_cpu(dst_cpu);
        uint32_t hops = manhattan_dist(sc, dc);
        uint32_t flits = flit_count(size, config.flit_payload_bytes);
        Attrs base;
        base.set(Attr::sx, sc.x).set(Attr::sy, sc.y).set(Attr::dx, dc.x).set(Attr::dy, dc.y);
        base.set(Attr::size, size).set(Attr::hops, hops);

        ComponentId cpu{ComponentClass::cpu, src_cpu};
        Attrs sync = base;
        sync.set(Attr::role, kRoleSend);
        emit(t, cpu, EventKind::sync, sync);
        charge(t, cpu, EnergyCategory::sync, params.sync_energy);

        uint32_t src_cluster = config.cluster_id(sc);
        if (hops == 0) {
            ComponentId bus{ComponentClass::bus, src_cluster};
            for (uint32_t f = 0; f < flits; ++f) {
                Attrs a = base;
                a.set(Attr::flit, f).set(Attr::hop, 0);
                emit(t + 1 + f, bus, EventKind::flit_hop, a);
                charge(t + 1 + f, bus, EnergyCategory::bus, params.bus_flit_energy);
            }
            return;
        }

        auto path = xy_route(sc, dc);
        ComponentId ni_src{ComponentClass::ni, src_cluster};
        ComponentId ni_dst{ComponentClass::ni, config.cluster_id(dc)};
        charge(t + 1, ni_src, EnergyCategory::ni, params.packet_header_energy);
        const auto routers = static_cast<uint32_t>(path.size());
        for (uint32_t f = 0; f < flits; ++f) {
            Attrs out = base;
            out.set(Attr::flit, f).set(Attr::dir, kDirOut);
            emit(t + 1 + f, ni_src, EventKind::ni_transfer, out);
            charge(t + 1 + f, ni_src, EnergyCategory::ni, params.ni_out_flit_energy);
            for (uint32_t j = 0; j < routers; ++j) {
                uint64_t c = t + 2 + f + j;
                ComponentId router{ComponentClass::router, config.cluster_id(path[j])};
                Attrs h = base;
                h.set(Attr::flit, f).set(Attr::hop, j);
                emit(c, router, EventKind::flit_hop, h);
                charge(c, router, EnergyCategory::router, params.router_flit_energy + params.link_flit_energy);
            }
            Attrs in = base;
            in.set(Attr::flit, f).set(Attr::dir, kDirIn);
            uint64_t c = t + 2 + f + routers;
            emit(c, ni_dst, EventKind::ni_transfer, in);
            charge(c, ni_dst, EnergyCategory::ni, params.ni_in_flit_energy);
        }
    };

    for (const auto& cp : program.cpus) {
        uint64_t t = 0;
        ComponentId cpu{ComponentClass::cpu, cp.cpu};
        ComponentId dmem{ComponentClass::dmem, cp.cpu};
        for (const auto& step : cp.steps) {
            for (uint32_t r = 0; r < step.repeat; ++r) {
                std::visit(
                    [&](const auto& op) {
                        using T = std::decay_t<decltype(op)>;
                        if constexpr (std::is_same_v<T, BundleOp>) {
                            Attrs a;
                            a.set(Attr::group, static_cast<int64_t>(group_id(op.group, isa)))
                                .set(Attr::pat, static_cast<int64_t>(op.pattern))
                                .set(Attr::addr, op.addr)
                                .set(Attr::cmp, op.group.compressed() ? 1 : 0);
                            emit(t, cpu, EventKind::bundle_issue, a);
                            double core = 0;
                            uint32_t accesses = 0;
                            for (int s : op.group.slots) {
                                if (s == InstructionGroup::kEmptySlot) {
                                    core += params.empty_slot_energy;
                                } else {
                                    const auto& d = isa[static_cast<size_t>(s)];
                                    core += params.core(d.iclass, op.pattern);
                                    if (d.accesses_dmem()) ++accesses;
                                }
                            }
                            charge(t, cpu, EnergyCategory::core, core);
                            charge(t, cpu, EnergyCategory::imem,
                                   params.imem_base(op.group.compressed()) + imem_spatial(params, config, op.addr));
                            for (uint32_t k = 0; k < accesses; ++k) {
                                Attrs m;
                                m.set(Attr::pat, static_cast<int64_t>(op.pattern));
                                emit(t, dmem, EventKind::dmem_access, m);
                                charge(t, dmem, EnergyCategory::dmem, params.dmem(op.pattern));
                            }
                            t += 1;
                        } else if constexpr (std::is_same_v<T, SendOp>) {
                            packet(t, cp.cpu, op.dst, op.size);
                            t += 1;
                        } else if constexpr (std::is_same_v<T, RecvOp>) {
                            ClusterCoord sc = config.coord_of_cpu(op.src);
                            ClusterCoord dc = config.coord_of_cpu(cp.cpu);
                            Attrs a;
                            a.set(Attr::sx, sc.x).set(Attr::sy, sc.y).set(Attr::dx, dc.x).set(Attr::dy, dc.y);
                            a.set(Attr::size, op.size).set(Attr::hops, manhattan_dist(sc, dc)).set(Attr::role, kRoleRecv);
                            emit(t, cpu, EventKind::sync, a);
                            t += 1;
                        } else if constexpr (std::is_same_v<T, SyncOp>) {
                            Attrs a;
                            a.set(Attr::role, kRoleBarrier);
                            emit(t, cpu, EventKind::sync, a);
                            charge(t, cpu, EnergyCategory::sync, params.sync_energy);
                            t += 1;
                        } else {
                            t += op.cycles;
                        }
                    },
                    step.op);
            }
        }
        res.trace.cycles = std::max(res.trace.cycles, t);
    }

    uint64_t duration = res.trace.cycles;
    for (const auto& e : events) duration = std::max(duration, e.cycle + 1);
    res.trace.cycles = duration;

    // Materialize idle cycles.
    std::vector<std::vector<bool>> busy(indexer.count(), std::vector<bool>(duration, false));
    for (const auto& e : events) busy[indexer.rank(e.component)][e.cycle] = true;
    for (size_t r = 0; r < indexer.count(); ++r) {
        ComponentId comp = indexer.at(r);
        for (uint64_t c = 0; c < duration; ++c)
            if (!busy[r][c]) emit(c, comp, EventKind::idle, Attrs{});
    }
    std::stable_sort(events.begin(), events.end(), [&](const StateEvent& a, const StateEvent& b) {
        if (a.cycle != b.cycle) return a.cycle < b.cycle;
        return indexer.rank(a.component) < indexer.rank(b.component);
    });

    if (duration > 0) {
        double seconds = static_cast<double>(duration) / config.clock_hz;
        for (uint32_t c = 0; c < config.n_cpus(); ++c)
            charge(duration - 1, {ComponentClass::cpu, c}, EnergyCategory::static_, params.static_power_cpu * seconds);
        for (uint32_t k = 0; k < config.n_clusters(); ++k) {
            charge(duration - 1, {ComponentClass::router, k}, EnergyCategory::static_, params.static_power_router * seconds);
            charge(duration - 1, {ComponentClass::ni, k}, EnergyCategory::static_, params.static_power_ni * seconds);
        }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const LedgerEntry& a, const LedgerEntry& b) { return a.cycle < b.cycle; });

    for (const auto& e : entries) res.ledger.breakdown[static_cast<size_t>(e.category)] += e.pj;
    res.ledger.total = 0;
    for (double v : res.ledger.breakdown) res.ledger.total += v;
    return res;
}

// Static energy of the whole platform per cycle, in pJ.
inline double static_pj_per_cycle(const SystemConfig& config, const OracleParams& params) {
    double pw = config.n_cpus() * params.static_power_cpu +
                config.n_clusters() * (params.static_power_router + params.static_power_ni);
    return pw / config.clock_hz;
}

// ---------------------------------------------------------------------------
// Program JSON

inline json to_json(const Program& p) {
    json cpus = json::array();
    for (const auto& cp : p.cpus) {
        json ops = json::array();
        for (const auto& step : cp.steps) {
            json o = std::visit(
                [&](const auto& op) -> json {
                    using T = std::decay_t<decltype(op)>;
                    if constexpr (std::is_same_v<T, BundleOp>) {
                        json slots = json::array();
                        for (int s : op.group.slots)
                            slots.push_back(s == InstructionGroup::kEmptySlot ? std::string("EMPTY") : (*p.isa)[static_cast<size_t>(s)].mnemonic);
                        return json{{"op", "bundle"}, {"group", slots}, {"addr", op.addr}, {"pattern", pattern_name(op.pattern)}};
                    } else if constexpr (std::is_same_v<T, SendOp>) {
                        return json{{"op", "send"}, {"dst", op.dst}, {"size", op.size}};
                    } else if constexpr (std::is_same_v<T, RecvOp>) {
                        return json{{"op", "recv"}, {"src", op.src}, {"size", op.size}};
                    } else if constexpr (std::is_same_v<T, SyncOp>) {
                        return json{{"op", "sync"}};
                    } else {
                        return json{{"op", "idle"}, {"cycles", op.cycles}};
                    }
                },
                step.op);
            if (step.repeat != 1) o["repeat"] = step.repeat;
            ops.push_back(std::move(o));
        }
        cpus.push_back(json{{"cpu", cp.cpu}, {"ops", ops}});
    }
    return json{{"cpus", cpus}};
}

inline Program program_from_json(const json& doc, std::shared_ptr<const Isa> isa, const SystemConfig& config) {
    Program p;
    p.isa = std::move(isa);
    try {
        for (const auto& c : doc.at("cpus")) {
            CpuProgram cp;
            cp.cpu = c.at("cpu").get<uint32_t>();
            for (const auto& o : c.at("ops")) {
                ProgramStep step;
                step.repeat = o.value("repeat", 1u);
                std::string kind = o.at("op").get<std::string>();
                if (kind == "bundle") {
                    BundleOp b;
                    b.group = parse_group(o.at("group").get<std::vector<std::string>>(), *p.isa, config.vliw_slots);
                    b.addr = o.at("addr").get<uint32_t>();
                    b.pattern = parse_pattern(o.value("pattern", std::string("zeros")));
                    step.op = b;
                } else if (kind == "send") {
                    step.op = SendOp{o.at("dst").get<uint32_t>(), o.at("size").get<uint32_t>()};
                } else if (kind == "recv") {
                    step.op = RecvOp{o.at("src").get<uint32_t>(), o.at("size").get<uint32_t>()};
                } else if (kind == "sync") {
                    step.op = SyncOp{};
                } else if (kind == "idle") {
                    step.op = IdleOp{o.at("cycles").get<uint32_t>()};
                } else {
                    throw ParseError("program: unknown op '" + kind + "'");
                }
                cp.steps.push_back(std::move(step));
            }
            p.cpus.push_back(std::move(cp));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("program: ") + e.what());
    }
    validate_program(config, p);
    return p;
}

} // namespace enermod
