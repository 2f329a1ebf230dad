#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "enermod/enermod.hpp"

using namespace enermod;

namespace {

struct Env {
    SystemConfig config;
    OracleParams params = default_oracle_params();
    std::shared_ptr<const Isa> isa = std::make_shared<const Isa>(default_isa());
    ApiDescription api = default_api();
};

Observation obs(std::string name, std::map<std::string, double> counts, double measured, double duration = 0) {
    return Observation{std::move(name), std::move(counts), duration, measured};
}

// Per-bundle energy straight from the oracle parameters.
double bundle_pj(const Env& e, const InstructionGroup& g, DataPattern p, uint32_t addr) {
    double v = e.params.imem_base(g.compressed()) + e.params.imem_spatial_coeff * std::popcount(addr % e.config.bank_words);
    for (int s : g.slots) {
        if (s < 0) {
            v += e.params.empty_slot_energy;
            continue;
        }
        const auto& d = (*e.isa)[static_cast<size_t>(s)];
        v += e.params.core(d.iclass, p) + (d.accesses_dmem() ? e.params.dmem(p) : 0.0);
    }
    return v;
}

double packet_overhead(const Env& e) { return e.params.sync_energy + e.params.packet_header_energy; }
double per_flit(const Env& e, uint32_t hops) {
    return e.params.ni_in_flit_energy + e.params.ni_out_flit_energy + (hops + 1) * (e.params.router_flit_energy + e.params.link_flit_energy);
}

std::vector<SizePoint> oracle_sweep(const Env& e, ClusterCoord s, ClusterCoord d) {
    std::vector<SizePoint> out;
    for (const auto& p : sweep_noc(e.config, e.params, e.isa, s, d, SizeRange{4, 1024, 4}))
        out.push_back({static_cast<double>(p.size), p.energy_pj});
    return out;
}

std::vector<SizePoint> window(const std::vector<SizePoint>& all, size_t n) {
    auto [lo, hi] = center_window(all.size(), n);
    return {all.begin() + static_cast<std::ptrdiff_t>(lo), all.begin() + static_cast<std::ptrdiff_t>(hi)};
}

// Toy comprehensive model: a 4-state component whose transition energy
// depends on the pair of states in a way no per-state model captures.
double toy_transition_pj(uint32_t a, uint32_t b) { return 2.0 + 1.5 * std::popcount(a ^ b) + 0.25 * a + 0.125 * b * b; }

} // namespace

TEST(FitConstants, SingleObservationExact) {
    FitOptions opt;
    auto r = fit_constants({obs("one", {{"cpu/x", 1}}, 42.5)}, identity_function(), opt);
    EXPECT_DOUBLE_EQ(r.model.constants.at("cpu/x"), 42.5);
    EXPECT_NEAR(r.report.max_abs_error, 0.0, 1e-12);
    EXPECT_FALSE(r.report.rank_deficient);
}

TEST(FitConstants, RankDeficientMinimumNorm) {
    auto r = fit_constants({obs("ab", {{"cpu/a", 1}, {"cpu/b", 1}}, 10)}, identity_function());
    EXPECT_TRUE(r.report.rank_deficient);
    EXPECT_EQ(r.report.rank, 1u);
    EXPECT_NEAR(r.model.constants.at("cpu/a"), 5.0, 1e-9);
    EXPECT_NEAR(r.model.constants.at("cpu/b"), 5.0, 1e-9);
    EXPECT_FALSE(r.model.provenance["warnings"].empty());
}

TEST(FitConstants, NegativeAndAbsentKeysFlagged) {
    auto r = fit_constants({obs("p", {{"cpu/a", 1}, {"cpu/z", 0}}, 4), obs("q", {{"cpu/a", 1}, {"cpu/b", 1}}, 1)},
                           identity_function());
    EXPECT_NEAR(r.model.constants.at("cpu/b"), -3.0, 1e-9);
    ASSERT_EQ(r.report.negative_keys.size(), 1u);
    EXPECT_EQ(r.report.negative_keys[0], "cpu/b");
    ASSERT_EQ(r.report.absent_keys.size(), 1u);
    EXPECT_EQ(r.report.absent_keys[0], "cpu/z");
    EXPECT_EQ(r.model.constants.count("cpu/z"), 0u);
    EXPECT_THROW(fit_constants({}, identity_function()), InvariantError);
}

TEST(FitConstants, MaxErrorBoundsEveryResidual) {
    auto r = fit_constants({obs("a", {{"cpu/a", 1}}, 1), obs("b", {{"cpu/a", 2}}, 5), obs("c", {{"cpu/a", 3}}, 4)},
                           identity_function());
    for (double v : r.report.residuals) EXPECT_GE(r.report.max_abs_error, std::abs(v));
    EXPECT_GT(r.report.max_abs_error, 0.0);
}

TEST(FitConstants, RecoversOracleBundleEnergies) {
    Env e;
    BenchOptions bo;
    auto benches = gen_instruction_benchmarks(e.isa, e.config, all_patterns(), bo);
    for (DataPattern p : all_patterns()) benches.push_back(gen_prologue_benchmark(e.isa, e.config, p, 0));
    benches.push_back(gen_idle_benchmark(e.isa, bo));
    benches.push_back(gen_sync_benchmark(e.isa, e.config, bo));
    auto results = run_campaign(benches, e.config, e.params);
    ObservationOptions oo;
    oo.include_prologues = false;
    auto f = fine_grained_function();
    auto fit = fit_constants(build_observations(benches, results, f, oo), f);
    EXPECT_FALSE(fit.report.rank_deficient);
    EXPECT_TRUE(fit.report.negative_keys.empty());
    for (const auto& g : enumerate_instruction_groups(*e.isa, 2))
        for (DataPattern p : all_patterns()) {
            std::string key = "cpu/bundle-issue/group:" + std::to_string(group_id(g, *e.isa)) + "/pat:" +
                              std::to_string(static_cast<int>(p));
            double truth = bundle_pj(e, g, p, bo.body_address);
            ASSERT_TRUE(fit.model.constants.count(key)) << key;
            EXPECT_NEAR(fit.model.constants.at(key), truth, 1e-6 * truth) << key;
        }
    EXPECT_NEAR(fit.model.constants.at("cpu/sync"), e.params.sync_energy, 1e-6 * e.params.sync_energy);
    double st = static_pj_per_cycle(e.config, e.params);
    EXPECT_NEAR(fit.model.static_pj_per_cycle, st, 1e-6 * st);
    // per-group means over the three patterns
    auto nop = parse_group({"NOP", "NOP"}, *e.isa, 2);
    double mean = 0;
    for (DataPattern p : all_patterns()) mean += bundle_pj(e, nop, p, bo.body_address) / 3;
    EXPECT_NEAR(fit.model.group_means.at("group:" + std::to_string(group_id(nop, *e.isa))), mean, 1e-6 * mean);
}

TEST(FitConstants, ComprehensiveTransitionModelIsSolvable) {
    const uint32_t n = 4;
    auto benches = gen_transition_benchmarks(n);
    ASSERT_EQ(benches.size(), n * n);
    std::vector<Observation> rows;
    for (const auto& b : benches) {
        auto v = transition_counts("toy", b.states);
        Observation o;
        o.name = b.name;
        for (const auto& [k, c] : v.counts) o.counts[k] = static_cast<double>(c);
        for (size_t i = 1; i < b.states.size(); ++i) o.measured += toy_transition_pj(b.states[i - 1], b.states[i]);
        rows.push_back(o);
    }
    FitOptions fo;
    fo.fit_static = false;
    auto fit = fit_constants(rows, identity_function(), fo);
    EXPECT_EQ(fit.report.unknowns, n * n);
    EXPECT_EQ(fit.report.rank, n * n);
    EXPECT_FALSE(fit.report.rank_deficient);
    EXPECT_LT(fit.report.max_abs_error, 1e-9);
    for (uint32_t a = 0; a < n; ++a)
        for (uint32_t b = 0; b < n; ++b)
            EXPECT_NEAR(fit.model.constants.at(transition_key("toy", a, b)), toy_transition_pj(a, b), 1e-9);
    // without the 0->1 measurement the 16 constants are underdetermined
    rows.erase(rows.begin() + 1);
    auto partial = fit_constants(rows, identity_function(), fo);
    EXPECT_EQ(partial.report.unknowns, n * n);
    EXPECT_TRUE(partial.report.rank_deficient);
}

TEST(SizeFits, ExactLine) {
    std::vector<SizePoint> pts{{0, 1}, {8, 3}, {16, 5}};
    auto lf = fit_linear(pts, pts);
    EXPECT_NEAR(lf.reducer.a, 1.0, 1e-12);
    EXPECT_NEAR(lf.reducer.b, 0.25, 1e-12);
    EXPECT_NEAR(lf.report.max_abs_error, 0.0, 1e-12);
}

TEST(SizeFits, TwoStepStaircase) {
    std::vector<SizePoint> pts{{4, 10}, {8, 10}, {12, 14}};
    auto sf = fit_staircase(pts, 8, pts);
    EXPECT_NEAR(sf.reducer.a, 6.0, 1e-12);
    EXPECT_NEAR(sf.reducer.b, 4.0, 1e-12);
    EXPECT_NEAR(sf.report.max_abs_error, 0.0, 1e-12);
}

TEST(SizeFits, Underdetermined) {
    std::vector<SizePoint> same{{8, 1}, {8, 2}};
    EXPECT_THROW(fit_linear(same, same), InvariantError);
    std::vector<SizePoint> one_flit{{1, 1}, {4, 2}, {8, 3}};
    EXPECT_THROW(fit_staircase(one_flit, 8, one_flit), InvariantError);
}

TEST(SizeFits, OracleSweepStaircaseExactLinearBounded) {
    Env e;
    for (auto [s, d] : {std::pair<ClusterCoord, ClusterCoord>{{0, 0}, {1, 1}}, {{0, 0}, {1, 0}}, {{1, 1}, {0, 1}}}) {
        auto all = oracle_sweep(e, s, d);
        ASSERT_EQ(all.size(), 256u);
        auto fit = window(all, 16);
        auto st = fit_staircase(fit, 8, all);
        auto lin = fit_linear(fit, all);
        uint32_t hops = manhattan_dist(s, d);
        EXPECT_LT(st.report.max_abs_error, 1e-9);
        EXPECT_NEAR(st.reducer.a, packet_overhead(e), 1e-9);
        EXPECT_NEAR(st.reducer.b, per_flit(e, hops), 1e-9);
        EXPECT_LE(st.report.max_abs_error, lin.report.max_abs_error);
        EXPECT_GT(lin.report.max_abs_error, 0.0);
        // a line fitted inside the sweep stays within one staircase step
        EXPECT_LE(lin.report.max_abs_error, st.reducer.b);
    }
}

TEST(Reduce, TwoByTwoPairsCollapseToHopKeys) {
    Env e;
    std::vector<Microbenchmark> benches;
    CommOptions co;
    co.reps = 4;
    co.sizes = SizeRange{8, 8, 4};
    for (uint32_t s = 0; s < 4; ++s) {
        benches.push_back(gen_prologue_benchmark(e.isa, e.config, DataPattern::zeros, e.config.cpu_id(e.config.cluster_coord(s), 0)));
        for (uint32_t d = 0; d < 4; ++d)
            if (s != d) {
                auto v = gen_comm_benchmarks(e.api, e.isa, e.config, e.config.cluster_coord(s), e.config.cluster_coord(d), co);
                benches.insert(benches.end(), v.begin(), v.end());
            }
    }
    benches.push_back(gen_idle_benchmark(e.isa));
    auto results = run_campaign(benches, e.config, e.params);
    ObservationOptions oo;
    oo.include_prologues = false;
    auto f = standard_function("fine_pairs");
    auto rows = build_observations(benches, results, f, oo);
    auto full = fit_constants(rows, f).model;
    size_t pair_keys = 0;
    for (const auto& [k, _] : full.constants) pair_keys += k.rfind("noc/packet/sx:", 0) == 0;
    EXPECT_EQ(pair_keys, 12u);

    auto red = reduce_noc_model(full);
    EXPECT_TRUE(red.warnings.empty());
    std::vector<std::string> noc;
    for (const auto& [k, _] : red.model.constants)
        if (k.rfind("noc/", 0) == 0) noc.push_back(k);
    EXPECT_EQ(noc, (std::vector<std::string>{"noc/packet/hops:1/size:8", "noc/packet/hops:2/size:8"}));
    EXPECT_EQ(red.model.function.name, "fine");
    for (uint32_t h : {1u, 2u}) EXPECT_NEAR(*red.model.packet_energy(h, 8), packet_overhead(e) + per_flit(e, h), 1e-9);

    // every training observation is reproduced by the reduced model
    auto reduced_rows = build_observations(benches, results, red.model.function, oo);
    ASSERT_EQ(reduced_rows.size(), rows.size());
    for (const auto& o : reduced_rows) {
        double est = red.model.static_pj_per_cycle * o.duration;
        for (const auto& [k, c] : o.counts) est += c * red.model.lookup(k).value();
        EXPECT_NEAR(est, o.measured, 1e-9) << o.name;
    }
}

TEST(Reduce, SingleClusterHasNoNocKeys) {
    Env e;
    e.config.mesh_cols = e.config.mesh_rows = 1;
    std::vector<Microbenchmark> benches = gen_instruction_benchmarks(e.isa, e.config, {DataPattern::zeros});
    benches.push_back(gen_prologue_benchmark(e.isa, e.config, DataPattern::zeros, 0));
    auto results = run_campaign(benches, e.config, e.params);
    auto f = standard_function("fine_pairs");
    auto red = reduce_noc_model(fit_constants(build_observations(benches, results, f), f).model);
    for (const auto& [k, _] : red.model.constants) EXPECT_NE(k.rfind("noc/", 0), 0u) << k;
}

TEST(Reduce, DisagreeingPairsAveragedWithWarning) {
    EnergyModel m;
    m.function = standard_function("fine_pairs");
    m.constants["noc/packet/sx:0/sy:0/dx:1/dy:0/size:8"] = 10;
    m.constants["noc/packet/sx:1/sy:0/dx:0/dy:0/size:8"] = 12;
    auto red = reduce_noc_model(m);
    EXPECT_EQ(red.warnings.size(), 1u);
    EXPECT_DOUBLE_EQ(red.model.constants.at("noc/packet/hops:1/size:8"), 11.0);
}

TEST(Reducers, ReplaceFamiliesAndEstimateClosedForm) {
    Env e;
    EnergyModel m;
    m.function = fine_grained_function();
    for (uint32_t s = 4; s <= 1024; s += 4)
        m.constants["noc/packet/hops:2/size:" + std::to_string(s)] =
            packet_overhead(e) + per_flit(e, 2) * flit_count(s, 8);
    m.constants["cpu/sync"] = 45;
    auto rf = fit_noc_reducers(m);
    EXPECT_EQ(rf.model.constants.size(), 1u);
    ASSERT_EQ(rf.model.reducers.size(), 1u);
    EXPECT_EQ(rf.model.reducers[0].family, "noc/packet/hops:2");
    for (uint32_t s = 1; s <= 2000; s += 7)
        EXPECT_NEAR(*rf.model.packet_energy(2, s), packet_overhead(e) + per_flit(e, 2) * flit_count(s, 8), 1e-9);
    EXPECT_FALSE(rf.model.packet_energy(3, 8).has_value());
}

TEST(ModelFile, RoundTrip) {
    EnergyModel m;
    m.function = fine_grained_function();
    m.level = m.function.level();
    m.constants = {{"cpu/bundle-issue/group:22/pat:0", 17.25}, {"cpu/sync", 45}};
    m.group_means = group_means(m.constants);
    m.reducers.push_back(Reducer{"noc/packet/hops:1", "size", ReducerKind::staircase, 51, 7.3, 8});
    m.static_pj_per_cycle = 35.5;
    m.provenance = json{{"observations", 3}};
    auto back = parse_model(serialize_model(m));
    EXPECT_EQ(serialize_model(back), serialize_model(m));
    EXPECT_NEAR(back.static_power_pw(), 35.5 * 7e8, 1e-3);
    EXPECT_THROW(parse_model("{\"level\": \"FINE_GRAINED\"}"), ParseError);
    EXPECT_THROW(parse_model("{oops"), ParseError);
}
