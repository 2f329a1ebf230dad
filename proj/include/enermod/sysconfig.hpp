#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "enermod/error.hpp"

namespace enermod {

using json = nlohmann::ordered_json;

struct ClusterCoord {
    uint32_t x = 0;
    uint32_t y = 0;
    friend bool operator==(const ClusterCoord&, const ClusterCoord&) = default;
};

// Full parameterization of the simulated many-core platform. Every field has
// a default so an empty config document describes the reference platform
// (2x2 mesh of four-CPU clusters, two VLIW slots, 16 kB memories).
struct SystemConfig {
    uint32_t mesh_cols = 2;
    uint32_t mesh_rows = 2;
    uint32_t cpus_per_cluster = 4;
    uint32_t vliw_slots = 2;
    uint32_t imem_bytes = 16384;
    uint32_t dmem_bytes = 16384;
    uint32_t shared_mem_bytes = 65536;
    uint32_t bank_words = 2048;
    uint32_t word_bytes = 4;
    uint32_t flit_payload_bytes = 8;
    uint32_t ni_channels = 128;
    double clock_hz = 7.0e8;

    friend bool operator==(const SystemConfig&, const SystemConfig&) = default;

    uint32_t n_clusters() const { return mesh_cols * mesh_rows; }
    uint32_t n_cpus() const { return n_clusters() * cpus_per_cluster; }
    uint32_t bank_bytes() const { return bank_words * word_bytes; }
    uint32_t imem_words() const { return imem_bytes / word_bytes; }

    uint32_t cluster_id(ClusterCoord c) const { return c.y * mesh_cols + c.x; }
    ClusterCoord cluster_coord(uint32_t cluster) const {
        return {cluster % mesh_cols, cluster / mesh_cols};
    }
    bool on_mesh(ClusterCoord c) const { return c.x < mesh_cols && c.y < mesh_rows; }

    // Linear CPU id = ((y * mesh_cols) + x) * cpus_per_cluster + cpu.
    uint32_t cpu_id(ClusterCoord c, uint32_t cpu) const {
        return cluster_id(c) * cpus_per_cluster + cpu;
    }
    uint32_t cluster_of_cpu(uint32_t cpu) const { return cpu / cpus_per_cluster; }
    ClusterCoord coord_of_cpu(uint32_t cpu) const { return cluster_coord(cluster_of_cpu(cpu)); }

    void validate() const {
        auto positive = [](uint32_t v, const char* name) {
            if (v < 1) throw InvariantError(std::string(name) + " must be >= 1");
        };
        positive(mesh_cols, "mesh_cols");
        positive(mesh_rows, "mesh_rows");
        positive(cpus_per_cluster, "cpus_per_cluster");
        positive(vliw_slots, "vliw_slots");
        positive(bank_words, "bank_words");
        positive(word_bytes, "word_bytes");
        positive(flit_payload_bytes, "flit_payload_bytes");
        positive(ni_channels, "ni_channels");
        positive(imem_bytes, "imem_bytes");
        positive(dmem_bytes, "dmem_bytes");
        positive(shared_mem_bytes, "shared_mem_bytes");
        if (cpus_per_cluster > 32) throw InvariantError("cpus_per_cluster must be <= 32");
        if (imem_bytes % bank_bytes() != 0) throw InvariantError("imem_bytes not bank multiple");
        if (dmem_bytes % bank_bytes() != 0) throw InvariantError("dmem_bytes not bank multiple");
        if ((flit_payload_bytes & (flit_payload_bytes - 1)) != 0)
            throw InvariantError("flit_payload_bytes not a power of two");
        if (!(clock_hz > 0.0)) throw InvariantError("clock_hz must be > 0");
    }
};

inline json to_json(const SystemConfig& c) {
    return json{{"mesh_cols", c.mesh_cols},
                {"mesh_rows", c.mesh_rows},
                {"cpus_per_cluster", c.cpus_per_cluster},
                {"vliw_slots", c.vliw_slots},
                {"imem_bytes", c.imem_bytes},
                {"dmem_bytes", c.dmem_bytes},
                {"shared_mem_bytes", c.shared_mem_bytes},
                {"bank_words", c.bank_words},
                {"word_bytes", c.word_bytes},
                {"flit_payload_bytes", c.flit_payload_bytes},
                {"ni_channels", c.ni_channels},
                {"clock_hz", c.clock_hz}};
}

namespace detail {

inline json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(what + ": syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

inline uint32_t get_count(const json& v, const std::string& field) {
    if (!v.is_number_integer() || v.get<int64_t>() < 0 || v.get<int64_t>() > UINT32_MAX)
        throw InvariantError(field + " must be a non-negative integer");
    return v.get<uint32_t>();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

inline SystemConfig parse_config(const std::string& text) {
    SystemConfig c;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return c;
    json doc = detail::parse_json_text(text, "config");
    if (!doc.is_object()) throw ParseError("config: top level must be an object");
    for (const auto& [key, v] : doc.items()) {
        if (key == "mesh_cols") c.mesh_cols = detail::get_count(v, key);
        else if (key == "mesh_rows") c.mesh_rows = detail::get_count(v, key);
        else if (key == "cpus_per_cluster") c.cpus_per_cluster = detail::get_count(v, key);
        else if (key == "vliw_slots") c.vliw_slots = detail::get_count(v, key);
        else if (key == "imem_bytes") c.imem_bytes = detail::get_count(v, key);
        else if (key == "dmem_bytes") c.dmem_bytes = detail::get_count(v, key);
        else if (key == "shared_mem_bytes") c.shared_mem_bytes = detail::get_count(v, key);
        else if (key == "bank_words") c.bank_words = detail::get_count(v, key);
        else if (key == "word_bytes") c.word_bytes = detail::get_count(v, key);
        else if (key == "flit_payload_bytes") c.flit_payload_bytes = detail::get_count(v, key);
        else if (key == "ni_channels") c.ni_channels = detail::get_count(v, key);
        else if (key == "clock_hz") {
            if (!v.is_number()) throw InvariantError("clock_hz must be a number");
            c.clock_hz = v.get<double>();
        } else {
            throw ParseError("config: unknown key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

inline std::string serialize_config(const SystemConfig& c) { return to_json(c).dump(2) + "\n"; }

inline SystemConfig load_config(const std::string& path) { return parse_config(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Instruction-set description

enum class IClass { NOP, ALU, SIMD, MULDIV, LOAD, STORE, BRANCH };
inline constexpr int kNumIClasses = 7;

inline const char* iclass_name(IClass c) {
    static const char* names[] = {"NOP", "ALU", "SIMD", "MULDIV", "LOAD", "STORE", "BRANCH"};
    return names[static_cast<int>(c)];
}

inline IClass parse_iclass(const std::string& s) {
    for (int i = 0; i < kNumIClasses; ++i)
        if (s == iclass_name(static_cast<IClass>(i))) return static_cast<IClass>(i);
    throw ParseError("unknown iclass '" + s + "'");
}

struct InstructionDef {
    std::string mnemonic;
    IClass iclass = IClass::NOP;
    std::vector<uint32_t> allowed_slots;
    bool reads_dmem = false;
    bool writes_dmem = false;

    bool allows(uint32_t slot) const {
        return std::find(allowed_slots.begin(), allowed_slots.end(), slot) != allowed_slots.end();
    }
    bool accesses_dmem() const { return reads_dmem || writes_dmem; }
};

// Ordered list of instruction definitions. Index order is significant: it
// defines group ids and the enumeration order.
struct Isa {
    std::vector<InstructionDef> instructions;

    size_t size() const { return instructions.size(); }
    const InstructionDef& operator[](size_t i) const { return instructions[i]; }

    std::optional<size_t> find(const std::string& mnemonic) const {
        for (size_t i = 0; i < instructions.size(); ++i)
            if (instructions[i].mnemonic == mnemonic) return i;
        return std::nullopt;
    }
    size_t index_of(const std::string& mnemonic) const {
        auto i = find(mnemonic);
        if (!i) throw InvariantError("unknown mnemonic '" + mnemonic + "'");
        return *i;
    }

    void validate(uint32_t vliw_slots) const {
        for (size_t i = 0; i < instructions.size(); ++i) {
            const auto& d = instructions[i];
            if (d.mnemonic.empty() || d.mnemonic == "EMPTY")
                throw InvariantError("invalid mnemonic '" + d.mnemonic + "'");
            for (size_t j = 0; j < i; ++j)
                if (instructions[j].mnemonic == d.mnemonic)
                    throw InvariantError("duplicate mnemonic '" + d.mnemonic + "'");
            if (d.allowed_slots.empty())
                throw InvariantError(d.mnemonic + ": allowed_slots empty");
            for (uint32_t s : d.allowed_slots)
                if (s >= vliw_slots) throw InvariantError(d.mnemonic + ": slot out of range");
            if (d.iclass == IClass::NOP) {
                for (uint32_t s = 0; s < vliw_slots; ++s)
                    if (!d.allows(s)) throw InvariantError(d.mnemonic + ": NOP must allow every slot");
            }
            bool memory_class = d.iclass == IClass::LOAD || d.iclass == IClass::STORE;
            if (d.accesses_dmem() && !memory_class)
                throw InvariantError(d.mnemonic + ": only LOAD/STORE may access dmem");
        }
    }
};

inline json to_json(const Isa& isa) {
    json arr = json::array();
    for (const auto& d : isa.instructions) {
        arr.push_back(json{{"mnemonic", d.mnemonic},
                           {"iclass", iclass_name(d.iclass)},
                           {"allowed_slots", d.allowed_slots},
                           {"reads_dmem", d.reads_dmem},
                           {"writes_dmem", d.writes_dmem}});
    }
    return arr;
}

inline Isa parse_isa(const std::string& text, uint32_t vliw_slots) {
    json doc = detail::parse_json_text(text, "isa");
    if (!doc.is_array()) throw ParseError("isa: top level must be a list");
    Isa isa;
    for (const auto& o : doc) {
        InstructionDef d;
        try {
            d.mnemonic = o.at("mnemonic").get<std::string>();
            d.iclass = parse_iclass(o.at("iclass").get<std::string>());
            d.allowed_slots = o.at("allowed_slots").get<std::vector<uint32_t>>();
            d.reads_dmem = o.value("reads_dmem", false);
            d.writes_dmem = o.value("writes_dmem", false);
        } catch (const json::exception& e) {
            throw ParseError(std::string("isa: ") + e.what());
        }
        isa.instructions.push_back(std::move(d));
    }
    isa.validate(vliw_slots);
    return isa;
}

inline Isa load_isa(const std::string& path, uint32_t vliw_slots) {
    return parse_isa(detail::read_file(path), vliw_slots);
}

// Synthetic 20-instruction, two-slot ISA shipped with the toolkit. Slot 0
// hosts branches and the wide SIMD ops; slot 1 hosts the load/store and
// multiply/divide unit.
inline Isa default_isa() {
    auto def = [](const char* m, IClass c, std::vector<uint32_t> slots, bool rd = false, bool wr = false) {
        return InstructionDef{m, c, std::move(slots), rd, wr};
    };
    Isa isa;
    isa.instructions = {
        def("NOP", IClass::NOP, {0, 1}),
        def("ADD", IClass::ALU, {0, 1}),
        def("SUB", IClass::ALU, {0, 1}),
        def("AND", IClass::ALU, {0, 1}),
        def("OR", IClass::ALU, {0, 1}),
        def("XOR", IClass::ALU, {0, 1}),
        def("SHL", IClass::ALU, {0, 1}),
        def("CMP", IClass::ALU, {0, 1}),
        def("MOV", IClass::ALU, {0, 1}),
        def("VADD", IClass::SIMD, {0, 1}),
        def("VMUL", IClass::SIMD, {0}),
        def("VSHUF", IClass::SIMD, {0}),
        def("MUL", IClass::MULDIV, {1}),
        def("DIV", IClass::MULDIV, {1}),
        def("LDW", IClass::LOAD, {1}, true, false),
        def("LDB", IClass::LOAD, {1}, true, false),
        def("STW", IClass::STORE, {1}, false, true),
        def("STB", IClass::STORE, {1}, false, true),
        def("BR", IClass::BRANCH, {0}),
        def("JMP", IClass::BRANCH, {0}),
    };
    return isa;
}

// One VLIW bundle: per slot an ISA index or kEmptySlot.
struct InstructionGroup {
    static constexpr int kEmptySlot = -1;
    std::vector<int> slots;

    friend bool operator==(const InstructionGroup&, const InstructionGroup&) = default;
    friend auto operator<=>(const InstructionGroup&, const InstructionGroup&) = default;

    size_t occupied() const {
        return static_cast<size_t>(std::count_if(slots.begin(), slots.end(), [](int s) { return s != kEmptySlot; }));
    }
    bool compressed() const { return occupied() == 1; }
    bool idle() const { return occupied() == 0; }
    // Instruction words fetched for this bundle: compressed bundles use one.
    uint32_t words() const { return compressed() ? 1u : static_cast<uint32_t>(slots.size()); }
};

inline void validate_group(const InstructionGroup& g, const Isa& isa, uint32_t vliw_slots) {
    if (g.slots.size() != vliw_slots) throw InvariantError("group slot count does not match vliw_slots");
    for (uint32_t s = 0; s < g.slots.size(); ++s) {
        int e = g.slots[s];
        if (e == InstructionGroup::kEmptySlot) continue;
        if (e < 0 || static_cast<size_t>(e) >= isa.size()) throw InvariantError("group references unknown instruction");
        if (!isa[static_cast<size_t>(e)].allows(s))
            throw InvariantError(isa[static_cast<size_t>(e)].mnemonic + " not allowed on slot " + std::to_string(s));
    }
}

// Stable id: mixed radix over slots, digit 0 = EMPTY, digit i+1 = isa[i].
inline uint64_t group_id(const InstructionGroup& g, const Isa& isa) {
    uint64_t id = 0;
    uint64_t radix = isa.size() + 1;
    for (size_t s = g.slots.size(); s-- > 0;) id = id * radix + static_cast<uint64_t>(g.slots[s] + 1);
    return id;
}

inline InstructionGroup group_from_id(uint64_t id, const Isa& isa, uint32_t vliw_slots) {
    InstructionGroup g;
    uint64_t radix = isa.size() + 1;
    for (uint32_t s = 0; s < vliw_slots; ++s) {
        g.slots.push_back(static_cast<int>(id % radix) - 1);
        id /= radix;
    }
    if (id != 0) throw InvariantError("group id out of range");
    validate_group(g, isa, vliw_slots);
    return g;
}

inline std::string group_name(const InstructionGroup& g, const Isa& isa) {
    std::string out;
    for (size_t s = 0; s < g.slots.size(); ++s) {
        if (s) out += '|';
        out += g.slots[s] == InstructionGroup::kEmptySlot ? std::string("EMPTY") : isa[static_cast<size_t>(g.slots[s])].mnemonic;
    }
    return out;
}

inline InstructionGroup parse_group(const std::vector<std::string>& mnemonics, const Isa& isa, uint32_t vliw_slots) {
    InstructionGroup g;
    for (const auto& m : mnemonics)
        g.slots.push_back(m == "EMPTY" ? InstructionGroup::kEmptySlot : static_cast<int>(isa.index_of(m)));
    validate_group(g, isa, vliw_slots);
    return g;
}

// Every distinct slot assignment respecting allowed_slots, except the
// all-EMPTY bundle. Slot 0 is the most significant position; within a slot
// instructions come in ISA order and EMPTY comes last.
inline std::vector<InstructionGroup> enumerate_instruction_groups(const Isa& isa, uint32_t vliw_slots) {
    std::vector<std::vector<int>> choices(vliw_slots);
    for (uint32_t s = 0; s < vliw_slots; ++s) {
        for (size_t i = 0; i < isa.size(); ++i)
            if (isa[i].allows(s)) choices[s].push_back(static_cast<int>(i));
        choices[s].push_back(InstructionGroup::kEmptySlot);
    }
    std::vector<InstructionGroup> out;
    if (isa.size() == 0 || vliw_slots == 0) return out;
    std::vector<size_t> pos(vliw_slots, 0);
    while (true) {
        InstructionGroup g;
        g.slots.resize(vliw_slots);
        for (uint32_t s = 0; s < vliw_slots; ++s) g.slots[s] = choices[s][pos[s]];
        if (!g.idle()) out.push_back(std::move(g));
        size_t s = vliw_slots;
        while (s > 0) {
            --s;
            if (++pos[s] < choices[s].size()) break;
            pos[s] = 0;
            if (s == 0) return out;
        }
    }
}

// ---------------------------------------------------------------------------
// Communication-API description

struct SizeRange {
    uint32_t min = 4;
    uint32_t max = 1024;
    uint32_t step = 4;

    std::vector<uint32_t> values() const {
        std::vector<uint32_t> out;
        for (uint64_t s = min; s <= max; s += step) out.push_back(static_cast<uint32_t>(s));
        return out;
    }
};

struct ApiOperation {
    std::string name;
    std::optional<SizeRange> size;
    std::vector<ClusterCoord> sources;       // empty: whole mesh
    std::vector<ClusterCoord> destinations;  // empty: whole mesh
};

struct ApiDescription {
    std::vector<ApiOperation> operations;

    const ApiOperation* find(const std::string& name) const {
        for (const auto& op : operations)
            if (op.name == name) return &op;
        return nullptr;
    }

    void validate(const SystemConfig& config) const {
        for (const auto& op : operations) {
            if (op.name != "channel_open" && op.name != "send" && op.name != "recv" && op.name != "sync")
                throw InvariantError("api: unknown operation '" + op.name + "'");
            if (op.size) {
                const auto& r = *op.size;
                if (r.min < config.word_bytes) throw InvariantError("api: " + op.name + " size min < word_bytes");
                if (r.step == 0) throw InvariantError("api: " + op.name + " step must be > 0");
                if (r.max < r.min) throw InvariantError("api: " + op.name + " max < min");
                if ((r.max - r.min) % r.step != 0) throw InvariantError("api: " + op.name + " step does not divide max - min");
            }
            for (const auto& c : op.sources)
                if (!config.on_mesh(c)) throw InvariantError("api: source coordinate off mesh");
            for (const auto& c : op.destinations)
                if (!config.on_mesh(c)) throw InvariantError("api: destination coordinate off mesh");
        }
    }
};

inline json to_json(const ApiDescription& api) {
    json arr = json::array();
    for (const auto& op : api.operations) {
        json o{{"name", op.name}};
        json params = json::object();
        if (op.size) {
            params["min"] = op.size->min;
            params["max"] = op.size->max;
            params["step"] = op.size->step;
        }
        auto coords = [](const std::vector<ClusterCoord>& cs) {
            json a = json::array();
            for (auto c : cs) a.push_back(json::array({c.x, c.y}));
            return a;
        };
        if (!op.sources.empty()) params["src"] = coords(op.sources);
        if (!op.destinations.empty()) params["dst"] = coords(op.destinations);
        o["params"] = params;
        arr.push_back(o);
    }
    return arr;
}

inline ApiDescription parse_api(const std::string& text, const SystemConfig& config) {
    json doc = detail::parse_json_text(text, "api");
    if (!doc.is_array()) throw ParseError("api: top level must be a list");
    ApiDescription api;
    try {
        for (const auto& o : doc) {
            ApiOperation op;
            op.name = o.at("name").get<std::string>();
            if (o.contains("params")) {
                const auto& p = o["params"];
                if (p.contains("min") || p.contains("max") || p.contains("step"))
                    op.size = SizeRange{p.at("min").get<uint32_t>(), p.at("max").get<uint32_t>(), p.at("step").get<uint32_t>()};
                auto coords = [](const json& a) {
                    std::vector<ClusterCoord> out;
                    for (const auto& c : a) out.push_back({c.at(0).get<uint32_t>(), c.at(1).get<uint32_t>()});
                    return out;
                };
                if (p.contains("src")) op.sources = coords(p["src"]);
                if (p.contains("dst")) op.destinations = coords(p["dst"]);
            }
            api.operations.push_back(std::move(op));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("api: ") + e.what());
    }
    api.validate(config);
    return api;
}

inline ApiDescription load_api(const std::string& path, const SystemConfig& config) {
    return parse_api(detail::read_file(path), config);
}

inline ApiDescription default_api() {
    ApiDescription api;
    api.operations = {
        {"channel_open", std::nullopt, {}, {}},
        {"send", SizeRange{4, 1024, 4}, {}, {}},
        {"recv", SizeRange{4, 1024, 4}, {}, {}},
        {"sync", std::nullopt, {}, {}},
    };
    return api;
}

} // namespace enermod
