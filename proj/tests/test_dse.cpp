#include <gtest/gtest.h>

#include <cmath>

#include "enermod/enermod.hpp"

using namespace enermod;

namespace {

const std::string kWork = "cpu/bundle-issue/group:1/pat:0";
const std::string kHeavy = "cpu/bundle-issue/group:2/pat:1";

// Model written from the oracle's closed forms: staircase packet costs per
// hop class (class 0 is the cluster crossbar) and fixed bundle constants.
EnergyModel closed_form_model(const SystemConfig& config, const OracleParams& p) {
    EnergyModel m;
    m.function = fine_grained_function();
    m.constants[kWork] = 20.0;
    m.constants[kHeavy] = 55.0;
    m.static_pj_per_cycle = static_pj_per_cycle(config, p);
    m.reducers.push_back(Reducer{"noc/packet/hops:0", "size", ReducerKind::staircase, p.sync_energy, p.bus_flit_energy, 8});
    for (uint32_t h = 1; h <= config.mesh_cols + config.mesh_rows - 2; ++h) {
        double b = p.ni_in_flit_energy + p.ni_out_flit_energy + (h + 1) * (p.router_flit_energy + p.link_flit_energy);
        m.reducers.push_back(
            Reducer{"noc/packet/hops:" + std::to_string(h), "size", ReducerKind::staircase, p.sync_energy + p.packet_header_energy, b, 8});
    }
    return m;
}

double staircase(const EnergyModel& m, uint32_t hops, uint32_t size) { return *m.packet_energy(hops, size); }

Actor actor(std::string id, double count, uint32_t state = 0, bool stateless = false, const std::string& key = kWork) {
    Actor a;
    a.id = std::move(id);
    a.work[key] = count;
    a.state_bytes = state;
    a.stateless = stateless;
    return a;
}

Partition partition(std::vector<uint32_t> cpu, uint32_t g = 1) {
    Partition p;
    p.clones.assign(cpu.size(), 1);
    p.cpu = std::move(cpu);
    p.granularity = g;
    return p;
}

DataflowGraph pipeline4(const SystemConfig& config) {
    auto isa = default_isa();
    std::string path = std::string(ENERMOD_DATA_DIR) + "/graphs/pipeline4.json";
    return load_graph(path, isa, config);
}

// Adds the oracle's per-bundle energy for every work key of `g`.
EnergyModel with_work_keys(EnergyModel m, const DataflowGraph& g, const SystemConfig& config, const OracleParams& p) {
    auto isa = default_isa();
    for (const auto& a : g.actors)
        for (const auto& [k, _] : a.work) {
            auto r = parse_key(k);
            auto group = group_from_id(static_cast<uint32_t>(r.attrs.get(Attr::group)), isa, config.vliw_slots);
            auto pat = static_cast<DataPattern>(r.attrs.get(Attr::pat));
            double e = p.imem_base(group.compressed()) + imem_spatial(p, config, 120);
            for (int s : group.slots) {
                if (s < 0) {
                    e += p.empty_slot_energy;
                    continue;
                }
                const auto& d = isa[static_cast<size_t>(s)];
                e += p.core(d.iclass, pat) + (d.accesses_dmem() ? p.dmem(pat) : 0.0);
            }
            m.constants[k] = e;
        }
    return m;
}

PartitionEvaluator pipeline_evaluator(const SystemConfig& c) {
    auto p = default_oracle_params();
    auto g = pipeline4(c);
    return PartitionEvaluator(g, with_work_keys(closed_form_model(c, p), g, c, p), c);
}

// Exhaustive search over placements and granularities with one clone each.
double brute_force_best(const PartitionEvaluator& eval, size_t actors, uint32_t n_cpus, std::vector<uint32_t> grans) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<uint32_t> cpu(actors, 0);
    while (true) {
        for (uint32_t g : grans) {
            auto ev = eval(partition(cpu, g));
            if (ev.feasible) best = std::min(best, ev.cost);
        }
        size_t i = 0;
        while (i < actors && ++cpu[i] == n_cpus) cpu[i++] = 0;
        if (i == actors) break;
    }
    return best;
}

} // namespace

TEST(Evaluate, SingleActorIsWorkPlusStatic) {
    SystemConfig c;
    auto p = default_oracle_params();
    auto m = closed_form_model(c, p);
    DataflowGraph g;
    g.actors.push_back(actor("only", 10));
    PartitionEvaluator eval(g, m, c);
    auto ev = eval(partition({5}));
    EXPECT_DOUBLE_EQ(ev.work_pj, 200.0);
    EXPECT_DOUBLE_EQ(ev.comm_pj, 0.0);
    EXPECT_DOUBLE_EQ(ev.period, 10.0);
    EXPECT_NEAR(ev.energy_pj, 200.0 + 10 * m.static_pj_per_cycle, 1e-9);
    EXPECT_TRUE(ev.feasible);
    EXPECT_DOUBLE_EQ(ev.cost, ev.energy_pj);
}

TEST(Evaluate, CommunicationCostByPlacement) {
    SystemConfig c;
    auto p = default_oracle_params();
    auto m = closed_form_model(c, p);
    DataflowGraph g;
    g.actors = {actor("src", 10), actor("dst", 10)};
    g.channels.push_back({0, 1, 100});
    PartitionEvaluator eval(g, m, c);
    const uint32_t far = c.cpu_id({1, 1}, 0), near = c.cpu_id({0, 0}, 2);
    EXPECT_DOUBLE_EQ(eval(partition({0, 0})).comm_pj, 0.0);
    for (uint32_t gran : {1u, 2u, 4u}) {
        auto cross = eval(partition({0, far}, gran));
        double expect = (p.sync_energy + p.packet_header_energy +
                         std::ceil(100.0 * gran / 8) * (p.ni_in_flit_energy + p.ni_out_flit_energy +
                                                        3 * (p.router_flit_energy + p.link_flit_energy))) /
                        gran;
        EXPECT_NEAR(cross.comm_pj, expect, 1e-9) << gran;
        auto local = eval(partition({0, near}, gran));
        EXPECT_NEAR(local.comm_pj, staircase(m, 0, 100 * gran) / gran, 1e-9);
        EXPECT_NEAR(local.comm_pj, (p.sync_energy + std::ceil(100.0 * gran / 8) * p.bus_flit_energy) / gran, 1e-9);
    }
    // work is placement independent
    EXPECT_DOUBLE_EQ(eval(partition({0, 0})).work_pj, eval(partition({0, far})).work_pj);
}

TEST(Evaluate, MemoryLimit) {
    SystemConfig c;
    auto m = closed_form_model(c, default_oracle_params());
    DataflowGraph g;
    g.actors = {actor("big", 1, c.dmem_bytes + 1)};
    EXPECT_FALSE(PartitionEvaluator(g, m, c)(partition({0})).feasible);
    DataflowGraph h;
    h.actors = {actor("a", 1), actor("b", 1)};
    h.channels.push_back({0, 1, 3000});
    PartitionEvaluator eval(h, m, c);
    // 2 * bytes * g per endpoint
    auto same = eval(partition({0, 0}, 1));
    EXPECT_DOUBLE_EQ(same.memory[0], 4 * 3000.0);
    EXPECT_TRUE(same.feasible);
    EXPECT_FALSE(eval(partition({0, 0}, 2)).feasible);
    EXPECT_TRUE(eval(partition({0, 1}, 2)).feasible);
}

TEST(Evaluate, Errors) {
    SystemConfig c;
    auto m = closed_form_model(c, default_oracle_params());
    DataflowGraph g;
    g.actors = {actor("a", 1), actor("b", 1)};
    PartitionEvaluator eval(g, m, c);
    EXPECT_THROW(eval(partition({0})), InvariantError);
    EXPECT_THROW(eval(partition({0, c.n_cpus()})), InvariantError);
    Partition bad = partition({0, 1});
    bad.clones[0] = 2;  // stateful actor
    EXPECT_THROW(eval(bad), InvariantError);
    DataflowGraph unknown;
    unknown.actors = {actor("x", 1, 0, false, "cpu/warp")};
    EXPECT_THROW(PartitionEvaluator(unknown, m, c), InvariantError);
    EXPECT_THROW(PartitionEvaluator(DataflowGraph{}, m, c), InvariantError);
}

TEST(GraphFile, ParsesShippedPipelineAndRejectsBadGraphs) {
    SystemConfig c;
    auto g = pipeline4(c);
    ASSERT_EQ(g.actors.size(), 4u);
    EXPECT_EQ(g.channels.size(), 3u);
    EXPECT_DOUBLE_EQ(g.actors[1].cycles(), 500.0);
    auto isa = default_isa();
    using J = nlohmann::ordered_json;
    EXPECT_THROW(graph_from_json(J::parse(R"({"actors": [], "channels": []})"), isa, c), InvariantError);
    EXPECT_THROW(graph_from_json(J::parse(R"({"actors": [{"id": "a", "work": {}}, {"id": "a", "work": {}}], "channels": []})"),
                                 isa, c),
                 InvariantError);
    EXPECT_THROW(graph_from_json(J::parse(R"({"actors": [{"id": "a", "work": {}}],
                                              "channels": [{"src": "a", "dst": "z", "bytes": 4}]})"),
                                 isa, c),
                 InvariantError);
    EXPECT_THROW(graph_from_json(J::parse(R"({"actors": [{"id": "a", "work": {}}],
                                              "channels": [{"src": "a", "dst": "a", "bytes": 4}]})"),
                                 isa, c),
                 InvariantError);
    EXPECT_THROW(graph_from_json(J::parse(R"({"actors": [{"work": {}}], "channels": []})"), isa, c), ParseError);
}

TEST(Mutate, MoveSingleActorTwoCpus) {
    SystemConfig c;
    c.mesh_cols = c.mesh_rows = 1;
    c.cpus_per_cluster = 2;
    DataflowGraph g;
    g.actors = {actor("only", 1)};
    AnnealOptions opt;
    opt.max_granularity = 1;
    std::mt19937_64 rng(0);
    for (uint32_t from : {0u, 1u}) {
        auto [q, m] = mutate(partition({from}), g, c, opt, rng);
        EXPECT_EQ(m, Mutation::move_actor);
        EXPECT_EQ(q.cpu[0], 1 - from);
    }
}

TEST(Mutate, StatefulActorsNeverCloned) {
    SystemConfig c;
    DataflowGraph g = pipeline4(c);
    AnnealOptions opt;
    opt.max_granularity = 1;
    std::mt19937_64 rng(1);
    Partition p = partition({0, 0, 0, 0});
    for (int i = 0; i < 1000; ++i) {
        auto [q, m] = mutate(p, g, c, opt, rng);
        EXPECT_EQ(m, Mutation::move_actor);
        EXPECT_EQ(q.clones, p.clones);
        p = q;
    }
}

TEST(Mutate, UniformOverApplicableKinds) {
    SystemConfig c;
    DataflowGraph g;
    g.actors = {actor("a", 1), actor("b", 1, 0, true)};
    g.channels.push_back({0, 1, 8});
    AnnealOptions opt;
    std::mt19937_64 rng(7);
    std::map<Mutation, int> seen;
    Partition p = partition({0, 0});
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto [q, m] = mutate(p, g, c, opt, rng);
        ++seen[m];
        // exactly one field group changes and the result stays valid
        int changed = (q.cpu != p.cpu) + (q.clones != p.clones) + (q.granularity != p.granularity);
        EXPECT_EQ(changed, 1);
        EXPECT_GE(q.granularity, 1u);
        EXPECT_LE(q.granularity, opt.max_granularity);
        EXPECT_EQ(q.clones[0], 1u);
        EXPECT_LE(q.clones[1], opt.max_clones);
        p = q;
    }
    for (auto m : {Mutation::move_actor, Mutation::change_clones, Mutation::change_granularity})
        EXPECT_NEAR(seen[m] / static_cast<double>(draws), 1.0 / 3, 0.02) << mutation_name(m);
}

TEST(Anneal, GreedyDescentNeverClimbs) {
    SystemConfig c;
    auto eval = pipeline_evaluator(c);
    AnnealOptions opt;
    opt.initial_temp = 0.0;
    opt.steps = 2000;
    auto res = anneal(eval, opt);
    ASSERT_EQ(res.history.size(), 2000u);
    for (size_t i = 1; i < res.history.size(); ++i) {
        EXPECT_LE(res.history[i].current, res.history[i - 1].current);
        EXPECT_EQ(res.history[i].temperature, 0.0);
    }
}

TEST(Anneal, BestIsMonotoneFeasibleAndDeterministic) {
    SystemConfig c;
    auto eval = pipeline_evaluator(c);
    AnnealOptions opt;
    opt.steps = 3000;
    opt.seed = 42;
    auto a = anneal(eval, opt), b = anneal(eval, opt);
    for (size_t i = 1; i < a.history.size(); ++i) EXPECT_LE(a.history[i].best, a.history[i - 1].best);
    EXPECT_TRUE(a.best_eval.feasible);
    EXPECT_TRUE(eval(a.best).feasible);
    EXPECT_DOUBLE_EQ(eval(a.best).cost, a.best_eval.cost);
    EXPECT_TRUE(a.best == b.best);
    EXPECT_EQ(history_csv(a.history), history_csv(b.history));
    EXPECT_LE(a.best_eval.cost, eval(initial_partition(eval.graph())).cost);
}

TEST(Anneal, SingleActorSeedInvariant) {
    SystemConfig c;
    DataflowGraph g;
    g.actors = {actor("only", 30)};
    PartitionEvaluator eval(g, closed_form_model(c, default_oracle_params()), c);
    AnnealOptions opt;
    opt.steps = 500;
    double cost = anneal(eval, opt).best_eval.cost;
    for (uint64_t s = 1; s < 6; ++s) {
        opt.seed = s;
        EXPECT_DOUBLE_EQ(anneal(eval, opt).best_eval.cost, cost);
    }
    EXPECT_DOUBLE_EQ(cost, eval(partition({0})).cost);
}

TEST(Anneal, InfeasibleStartIsAnError) {
    SystemConfig c;
    DataflowGraph g;
    g.actors = {actor("a", 1, c.dmem_bytes / 2 + 1), actor("b", 1, c.dmem_bytes / 2 + 1)};
    PartitionEvaluator eval(g, closed_form_model(c, default_oracle_params()), c);
    EXPECT_THROW(anneal(eval), InvariantError);
}

TEST(Anneal, HeavyChannelAvoidsFarthestClusters) {
    SystemConfig c;
    c.mesh_cols = c.mesh_rows = 3;
    c.cpus_per_cluster = 1;
    auto m = closed_form_model(c, default_oracle_params());
    DataflowGraph g;
    g.actors = {actor("p", 50), actor("q", 50)};
    g.channels.push_back({0, 1, 2048});
    PartitionEvaluator eval(g, m, c);
    const uint32_t n = c.n_cpus(), far = c.mesh_cols + c.mesh_rows - 2;
    double best = std::numeric_limits<double>::infinity();
    uint32_t best_hops = far;
    for (uint32_t a = 0; a < n; ++a)
        for (uint32_t b = 0; b < n; ++b)
            for (uint32_t gran : {1u, 2u, 4u}) {
                auto ev = eval(partition({a, b}, gran));
                if (ev.feasible && ev.cost < best) {
                    best = ev.cost;
                    best_hops = manhattan_dist(c.coord_of_cpu(a), c.coord_of_cpu(b));
                }
            }
    EXPECT_LT(best_hops, far);
    AnnealOptions opt;
    opt.steps = 5000;
    auto res = anneal_multi(eval, opt, 4);
    EXPECT_LT(manhattan_dist(c.coord_of_cpu(res.best.cpu[0]), c.coord_of_cpu(res.best.cpu[1])), far);
    EXPECT_NEAR(res.best_eval.cost, best, 1e-9 * best);
}

TEST(Anneal, MatchesExhaustiveSearchOnPipeline) {
    SystemConfig c;
    auto eval = pipeline_evaluator(c);
    double truth = brute_force_best(eval, 4, c.n_cpus(), granularity_choices(4));
    AnnealOptions opt;
    auto res = anneal_multi(eval, opt, 8);
    EXPECT_NEAR(res.best_eval.cost, truth, 1e-9 * truth);
    EXPECT_TRUE(res.best_eval.feasible);
}
