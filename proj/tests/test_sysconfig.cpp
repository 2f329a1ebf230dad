#include <gtest/gtest.h>

#include <random>
#include <set>

#include "enermod/enermod.hpp"

using namespace enermod;

namespace {

// Independent count: walk the full cartesian product of (EMPTY + every
// instruction) per slot and keep assignments that every slot permits.
size_t brute_force_group_count(const Isa& isa, uint32_t slots) {
    const size_t radix = isa.size() + 1;
    size_t total = 1;
    for (uint32_t s = 0; s < slots; ++s) total *= radix;
    size_t count = 0;
    for (size_t code = 0; code < total; ++code) {
        size_t c = code;
        bool ok = true, any = false;
        for (uint32_t s = 0; s < slots; ++s) {
            size_t digit = c % radix;
            c /= radix;
            if (digit == 0) continue;
            any = true;
            if (!isa[digit - 1].allows(s)) ok = false;
        }
        if (ok && any) ++count;
    }
    return count;
}

Isa toy_isa(std::vector<std::pair<std::string, std::vector<uint32_t>>> defs) {
    Isa isa;
    for (auto& [m, slots] : defs) isa.instructions.push_back({m, IClass::ALU, slots, false, false});
    return isa;
}

std::string data_path(const std::string& name) { return std::string(ENERMOD_DATA_DIR) + "/" + name; }

} // namespace

TEST(Config, ReferencePlatformDocument) {
    auto c = parse_config(R"({"mesh_cols":2,"mesh_rows":2,"cpus_per_cluster":4,"vliw_slots":2,
                              "imem_bytes":16384,"dmem_bytes":16384})");
    EXPECT_EQ(c.n_clusters(), 4u);
    EXPECT_EQ(c.n_cpus(), 16u);
    EXPECT_EQ(c.vliw_slots, 2u);
    EXPECT_EQ(c.imem_bytes, 16384u);
    EXPECT_EQ(c.flit_payload_bytes, 8u);
}

TEST(Config, EmptyDocumentGivesDefaults) {
    EXPECT_EQ(parse_config(""), SystemConfig{});
    EXPECT_EQ(parse_config("{}"), SystemConfig{});
    SystemConfig d;
    EXPECT_EQ(d.dmem_bytes, 16384u);
    EXPECT_EQ(d.shared_mem_bytes, 65536u);
    EXPECT_EQ(d.bank_words, 2048u);
    EXPECT_EQ(d.word_bytes, 4u);
    EXPECT_EQ(d.ni_channels, 128u);
    EXPECT_DOUBLE_EQ(d.clock_hz, 7.0e8);
}

TEST(Config, ImemNotBankMultiple) {
    try {
        parse_config(R"({"imem_bytes":1000})");
        FAIL();
    } catch (const InvariantError& e) {
        EXPECT_NE(std::string(e.what()).find("imem_bytes not bank multiple"), std::string::npos);
    }
}

TEST(Config, RejectsBadDocuments) {
    EXPECT_THROW(parse_config(R"({"mesh_cols":0})"), InvariantError);
    EXPECT_THROW(parse_config(R"({"flit_payload_bytes":6})"), InvariantError);
    EXPECT_THROW(parse_config(R"({"cpus_per_cluster":33})"), InvariantError);
    EXPECT_THROW(parse_config(R"({"colour":1})"), ParseError);
    try {
        parse_config("{\"mesh_cols\": 2,, }");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
        EXPECT_EQ(e.code(), ErrorCode::parse);
    }
}

TEST(Config, RoundTrip) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        SystemConfig c;
        c.mesh_cols = 1 + rng() % 5;
        c.mesh_rows = 1 + rng() % 5;
        c.cpus_per_cluster = 1 + rng() % 32;
        c.vliw_slots = 1 + rng() % 4;
        c.imem_bytes = c.bank_bytes() * (1 + rng() % 4);
        c.dmem_bytes = c.bank_bytes() * (1 + rng() % 4);
        c.flit_payload_bytes = 1u << (rng() % 6);
        c.clock_hz = 1e8 + static_cast<double>(rng() % 1000) * 1e6;
        EXPECT_EQ(parse_config(serialize_config(c)), c);
    }
}

TEST(Config, CpuIdScheme) {
    SystemConfig c;
    c.mesh_cols = 3;
    c.mesh_rows = 2;
    EXPECT_EQ(c.cpu_id({2, 1}, 3), ((1 * 3) + 2) * 4 + 3);
    for (uint32_t id = 0; id < c.n_cpus(); ++id) EXPECT_EQ(c.cpu_id(c.coord_of_cpu(id), id % 4), id);
}

TEST(Enumerate, SingleNopTwoSlots) {
    Isa isa;
    isa.instructions.push_back({"NOP", IClass::NOP, {0, 1}, false, false});
    auto groups = enumerate_instruction_groups(isa, 2);
    ASSERT_EQ(groups.size(), 3u);
    EXPECT_EQ(group_name(groups[0], isa), "NOP|NOP");
    EXPECT_EQ(group_name(groups[1], isa), "NOP|EMPTY");
    EXPECT_EQ(group_name(groups[2], isa), "EMPTY|NOP");
    EXPECT_FALSE(groups[0].compressed());
    EXPECT_TRUE(groups[1].compressed());
}

TEST(Enumerate, MixedSlotConstraintToy) {
    auto isa = toy_isa({{"A", {0}}, {"B", {0, 1}}});
    auto groups = enumerate_instruction_groups(isa, 2);
    EXPECT_EQ(groups.size(), brute_force_group_count(isa, 2));
    EXPECT_EQ(groups.size(), 5u);
}

TEST(Enumerate, EmptyIsa) { EXPECT_TRUE(enumerate_instruction_groups(Isa{}, 2).empty()); }

TEST(Enumerate, RandomIsasMatchBruteForceAndProductFormula) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        uint32_t slots = 1 + rng() % 3;
        Isa isa;
        size_t n = 1 + rng() % 20;
        for (size_t i = 0; i < n; ++i) {
            std::vector<uint32_t> allowed;
            for (uint32_t s = 0; s < slots; ++s)
                if (rng() % 2) allowed.push_back(s);
            if (allowed.empty()) allowed.push_back(static_cast<uint32_t>(rng() % slots));
            isa.instructions.push_back({"I" + std::to_string(i), IClass::ALU, allowed, false, false});
        }
        auto groups = enumerate_instruction_groups(isa, slots);
        EXPECT_EQ(groups.size(), brute_force_group_count(isa, slots));
        size_t product = 1;
        for (uint32_t s = 0; s < slots; ++s) {
            size_t ns = 0;
            for (const auto& d : isa.instructions) ns += d.allows(s);
            product *= ns + 1;
        }
        EXPECT_EQ(groups.size(), product - 1);
        std::set<InstructionGroup> uniq(groups.begin(), groups.end());
        EXPECT_EQ(uniq.size(), groups.size());
        for (const auto& g : groups) EXPECT_NO_THROW(validate_group(g, isa, slots));
    }
}

TEST(Enumerate, ShippedIsa) {
    auto isa = default_isa();
    EXPECT_EQ(isa.size(), 20u);
    auto groups = enumerate_instruction_groups(isa, 2);
    EXPECT_EQ(groups.size(), brute_force_group_count(isa, 2));
    for (const auto& g : groups) EXPECT_EQ(group_from_id(group_id(g, isa), isa, 2), g);
}

TEST(Isa, Invariants) {
    auto bad_nop = toy_isa({});
    bad_nop.instructions.push_back({"NOP", IClass::NOP, {0}, false, false});
    EXPECT_THROW(bad_nop.validate(2), InvariantError);
    auto empty_slots = toy_isa({{"A", {}}});
    EXPECT_THROW(empty_slots.validate(2), InvariantError);
    auto dup = toy_isa({{"A", {0}}, {"A", {1}}});
    EXPECT_THROW(dup.validate(2), InvariantError);
    Isa alu_mem;
    alu_mem.instructions.push_back({"X", IClass::ALU, {0}, true, false});
    EXPECT_THROW(alu_mem.validate(2), InvariantError);
}

TEST(Api, Invariants) {
    SystemConfig c;
    EXPECT_NO_THROW(default_api().validate(c));
    EXPECT_THROW(parse_api(R"([{"name":"send","params":{"min":2,"max":10,"step":2}}])", c), InvariantError);
    EXPECT_THROW(parse_api(R"([{"name":"send","params":{"min":4,"max":10,"step":4}}])", c), InvariantError);
    EXPECT_THROW(parse_api(R"([{"name":"teleport"}])", c), InvariantError);
    auto api = parse_api(R"([{"name":"send","params":{"min":8,"max":8,"step":4}}])", c);
    EXPECT_EQ(api.find("send")->size->values().size(), 1u);
}

TEST(ShippedData, MatchesBuiltInDefaults) {
    auto c = load_config(data_path("config.json"));
    EXPECT_EQ(c, SystemConfig{});
    EXPECT_EQ(to_json(load_isa(data_path("isa.json"), c.vliw_slots)), to_json(default_isa()));
    EXPECT_EQ(to_json(load_api(data_path("api.json"), c)), to_json(default_api()));
    EXPECT_EQ(to_json(load_oracle_params(data_path("oracle_params.json"))), to_json(default_oracle_params()));
}

TEST(ShippedData, MissingFile) {
    try {
        load_config(data_path("no_such_config.json"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::missing_file);
    }
}
