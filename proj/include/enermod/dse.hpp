#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "enermod/apps.hpp"
#include "enermod/modelfit.hpp"

namespace enermod {

struct Actor {
    std::string id;
    std::map<std::string, double> work;  // model-state key -> count per firing
    uint32_t state_bytes = 0;
    bool stateless = false;

    double cycles() const {
        double c = 0;
        for (const auto& [_, n] : work) c += n;
        return c;
    }
};

struct Channel {
    uint32_t src = 0;  // actor index
    uint32_t dst = 0;
    uint32_t bytes = 0;  // per iteration
};

struct DataflowGraph {
    std::vector<Actor> actors;
    std::vector<Channel> channels;

    void validate() const {
        if (actors.empty()) throw InvariantError("graph has no actors");
        for (const auto& c : channels) {
            if (c.src >= actors.size() || c.dst >= actors.size()) throw InvariantError("channel endpoint out of range");
            if (c.src == c.dst) throw InvariantError("channel loops on one actor");
        }
    }
};

// Work is a {key: count} object, or a list of {"key": k, "count": n} and
// {"group": [...], "pattern": p, "count": n} entries.
inline DataflowGraph graph_from_json(const json& doc, const Isa& isa, const SystemConfig& config) {
    DataflowGraph g;
    std::map<std::string, uint32_t> index;
    try {
        for (const auto& a : doc.at("actors")) {
            Actor actor;
            actor.id = a.at("id").get<std::string>();
            actor.state_bytes = a.value("state_bytes", 0u);
            actor.stateless = a.value("stateless", false);
            const auto& work = a.at("work");
            if (work.is_object()) {
                for (const auto& [k, v] : work.items()) actor.work[k] += v.get<double>();
            } else {
                for (const auto& w : work) {
                    std::string key;
                    if (w.contains("key")) {
                        key = w["key"].get<std::string>();
                    } else {
                        auto group = parse_group(w.at("group").get<std::vector<std::string>>(), isa, config.vliw_slots);
                        auto pat = parse_pattern(w.value("pattern", std::string("zeros")));
                        key = "cpu/bundle-issue/group:" + std::to_string(group_id(group, isa)) +
                              "/pat:" + std::to_string(static_cast<int>(pat));
                    }
                    actor.work[key] += w.at("count").get<double>();
                }
            }
            if (!index.emplace(actor.id, static_cast<uint32_t>(g.actors.size())).second)
                throw InvariantError("duplicate actor '" + actor.id + "'");
            g.actors.push_back(std::move(actor));
        }
        for (const auto& c : doc.at("channels")) {
            auto endpoint = [&](const char* f) {
                auto it = index.find(c.at(f).get<std::string>());
                if (it == index.end()) throw InvariantError(std::string("channel ") + f + " names unknown actor");
                return it->second;
            };
            g.channels.push_back({endpoint("src"), endpoint("dst"), c.at("bytes").get<uint32_t>()});
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("graph: ") + e.what());
    }
    g.validate();
    return g;
}

inline DataflowGraph load_graph(const std::string& path, const Isa& isa, const SystemConfig& config) {
    return graph_from_json(detail::parse_json_text(detail::read_file(path), path), isa, config);
}

struct Partition {
    std::vector<uint32_t> cpu;     // base CPU per actor
    std::vector<uint32_t> clones;  // clone c of actor a runs on (cpu[a] + c) % n_cpus
    uint32_t granularity = 1;      // iterations batched per message

    friend bool operator==(const Partition&, const Partition&) = default;
};

struct CostWeights {
    double energy = 1.0;  // per pJ
    double period = 0.0;  // per cycle of the slowest CPU
};

struct Evaluation {
    double work_pj = 0;
    double comm_pj = 0;
    double static_pj = 0;
    double energy_pj = 0;  // per iteration
    double period = 0;     // cycles per iteration on the busiest CPU
    double cost = 0;
    bool feasible = true;
    std::vector<double> memory;  // bytes per CPU
};

class PartitionEvaluator {
public:
    PartitionEvaluator(const DataflowGraph& graph, const EnergyModel& model, const SystemConfig& config, CostWeights w = {})
        : graph_(graph), model_(model), config_(config), w_(w) {
        graph_.validate();
        for (const auto& a : graph_.actors) {
            double e = 0;
            for (const auto& [k, n] : a.work) {
                auto c = model_.lookup(k);
                if (!c) throw InvariantError("model has no constant for work key '" + k + "'");
                e += n * *c;
            }
            actor_pj_.push_back(e);
            actor_cycles_.push_back(a.cycles());
        }
    }

    const DataflowGraph& graph() const { return graph_; }
    const SystemConfig& config() const { return config_; }

    Evaluation operator()(const Partition& p) const {
        const uint32_t n = config_.n_cpus();
        if (p.cpu.size() != graph_.actors.size() || p.clones.size() != graph_.actors.size())
            throw InvariantError("partition size does not match graph");
        if (p.granularity == 0) throw InvariantError("granularity must be positive");
        Evaluation ev;
        std::vector<double> cycles(n, 0.0);
        ev.memory.assign(n, 0.0);
        auto where = [&](size_t a, uint32_t c) { return (p.cpu[a] + c) % n; };
        const double g = p.granularity;

        for (size_t a = 0; a < graph_.actors.size(); ++a) {
            if (p.cpu[a] >= n) throw InvariantError("partition maps actor to missing CPU");
            const uint32_t k = p.clones[a];
            if (k == 0 || (k > 1 && !graph_.actors[a].stateless)) throw InvariantError("invalid clone count");
            ev.work_pj += actor_pj_[a];
            for (uint32_t c = 0; c < k; ++c) {
                cycles[where(a, c)] += actor_cycles_[a] / k;
                ev.memory[where(a, c)] += graph_.actors[a].state_bytes;
            }
        }
        for (const auto& ch : graph_.channels) {
            const uint32_t ks = p.clones[ch.src], kd = p.clones[ch.dst];
            const double flow = static_cast<double>(ch.bytes) / (ks * kd);
            const auto msg = static_cast<uint32_t>(std::ceil(flow * g));
            for (uint32_t i = 0; i < ks; ++i)
                for (uint32_t j = 0; j < kd; ++j) {
                    uint32_t s = where(ch.src, i), d = where(ch.dst, j);
                    ev.memory[s] += 2.0 * flow * g;
                    ev.memory[d] += 2.0 * flow * g;
                    if (s == d) continue;
                    uint32_t hops = manhattan_dist(config_.coord_of_cpu(s), config_.coord_of_cpu(d));
                    auto e = model_.packet_energy(hops, msg);
                    if (!e) throw InvariantError("model has no packet energy for " + std::to_string(hops) + " hops, " +
                                                 std::to_string(msg) + " bytes");
                    ev.comm_pj += *e / g;
                    cycles[s] += 1.0 / g;
                    cycles[d] += 1.0 / g;
                }
        }
        ev.period = *std::max_element(cycles.begin(), cycles.end());
        ev.static_pj = model_.static_pj_per_cycle * ev.period;
        ev.energy_pj = ev.work_pj + ev.comm_pj + ev.static_pj;
        ev.cost = w_.energy * ev.energy_pj + w_.period * ev.period;
        for (double m : ev.memory)
            if (m > config_.dmem_bytes) ev.feasible = false;
        return ev;
    }

private:
    DataflowGraph graph_;
    EnergyModel model_;
    SystemConfig config_;
    CostWeights w_;
    std::vector<double> actor_pj_;
    std::vector<double> actor_cycles_;
};

enum class Mutation { move_actor, change_clones, change_granularity };

inline const char* mutation_name(Mutation m) {
    static const char* names[] = {"move_actor", "change_clones", "change_granularity"};
    return names[static_cast<int>(m)];
}

struct AnnealOptions {
    std::optional<double> initial_temp;  // unset: a tenth of the initial cost; 0: greedy descent
    double cooling = 0;                  // <= 0: reach 1e-4 of the initial temperature at the last step
    uint32_t steps = 10000;
    uint64_t seed = 0;
    uint32_t max_granularity = 4;  // granularities are powers of two up to this
    uint32_t max_clones = 4;
};

inline std::vector<uint32_t> granularity_choices(uint32_t max_granularity) {
    std::vector<uint32_t> out;
    for (uint32_t g = 1; g <= std::max(1u, max_granularity); g <<= 1) out.push_back(g);
    return out;
}

// Uniform choice among MOVE, CLONE (+-1 on a stateless actor) and
// GRANULARITY (*2 or /2); kinds that cannot apply are redrawn.
inline std::pair<Partition, Mutation> mutate(const Partition& p, const DataflowGraph& graph, const SystemConfig& config,
                                             const AnnealOptions& opt, std::mt19937_64& rng) {
    const uint32_t n = config.n_cpus();
    bool can_move = n > 1;
    bool can_clone = false;
    for (const auto& a : graph.actors) can_clone = can_clone || (a.stateless && opt.max_clones > 1);
    bool can_gran = opt.max_granularity >= 2;
    if (!can_move && !can_clone && !can_gran) throw InvariantError("partition has no neighbours");
    while (true) {
        auto m = static_cast<Mutation>(detail::draw_below(rng, 3));
        Partition q = p;
        switch (m) {
        case Mutation::move_actor: {
            if (!can_move) continue;
            size_t a = detail::draw_below(rng, graph.actors.size());
            uint32_t to = static_cast<uint32_t>(detail::draw_below(rng, n - 1));
            if (to >= p.cpu[a]) ++to;
            q.cpu[a] = to;
            return {q, m};
        }
        case Mutation::change_clones: {
            if (!can_clone) continue;
            std::vector<size_t> stateless;
            for (size_t a = 0; a < graph.actors.size(); ++a)
                if (graph.actors[a].stateless) stateless.push_back(a);
            size_t a = stateless[detail::draw_below(rng, stateless.size())];
            bool up = detail::draw_below(rng, 2) == 0;
            if (p.clones[a] <= 1) up = true;
            if (p.clones[a] >= opt.max_clones) up = false;
            q.clones[a] = up ? p.clones[a] + 1 : p.clones[a] - 1;
            return {q, m};
        }
        case Mutation::change_granularity: {
            if (!can_gran) continue;
            bool up = detail::draw_below(rng, 2) == 0;
            if (p.granularity <= 1) up = true;
            if (p.granularity * 2 > opt.max_granularity) up = false;
            q.granularity = up ? p.granularity * 2 : p.granularity / 2;
            return {q, m};
        }
        }
    }
}

struct AnnealStep {
    uint32_t step = 0;
    double temperature = 0;
    double current = 0;
    double best = 0;
    bool accepted = false;
    Mutation mutation = Mutation::move_actor;
};

struct AnnealResult {
    Partition best;
    Evaluation best_eval;
    uint64_t seed = 0;
    std::vector<AnnealStep> history;
};

inline Partition initial_partition(const DataflowGraph& g) {
    Partition p;
    p.cpu.assign(g.actors.size(), 0);
    p.clones.assign(g.actors.size(), 1);
    p.granularity = 1;
    return p;
}

// Simulated annealing with Metropolis acceptance and geometric cooling,
// starting from every actor on CPU 0. Infeasible neighbours are rejected.
inline AnnealResult anneal(const PartitionEvaluator& eval, const AnnealOptions& opt = {}) {
    const auto& graph = eval.graph();
    std::mt19937_64 rng(opt.seed);
    Partition cur = initial_partition(graph);
    Evaluation cur_ev = eval(cur);
    if (!cur_ev.feasible) throw InvariantError("initial partition exceeds data memory");
    AnnealResult res;
    res.seed = opt.seed;
    res.best = cur;
    res.best_eval = cur_ev;
    double T = opt.initial_temp ? std::max(0.0, *opt.initial_temp) : 0.1 * std::abs(cur_ev.cost);
    double cooling = opt.cooling > 0 ? opt.cooling : std::pow(1e-4, 1.0 / std::max(1u, opt.steps));
    res.history.reserve(opt.steps);
    for (uint32_t s = 0; s < opt.steps; ++s) {
        auto [cand, m] = mutate(cur, graph, eval.config(), opt, rng);
        Evaluation ev = eval(cand);
        double u = detail::draw_unit(rng);
        bool accept = false;
        if (ev.feasible) {
            double delta = ev.cost - cur_ev.cost;
            accept = delta <= 0 || (T > 0 && u < std::exp(-delta / T));
        }
        if (accept) {
            cur = cand;
            cur_ev = ev;
            if (cur_ev.cost < res.best_eval.cost) {
                res.best = cur;
                res.best_eval = cur_ev;
            }
        }
        res.history.push_back({s, T, cur_ev.cost, res.best_eval.cost, accept, m});
        T *= cooling;
    }
    return res;
}

// Independent runs with seeds seed, seed+1, ...; lowest cost wins, ties go
// to the lower seed.
inline AnnealResult anneal_multi(const PartitionEvaluator& eval, AnnealOptions opt, uint32_t runs) {
    if (runs == 0) throw InvariantError("need at least one annealing run");
    AnnealResult best;
    uint64_t base = opt.seed;
    for (uint32_t r = 0; r < runs; ++r) {
        opt.seed = base + r;
        AnnealResult res = anneal(eval, opt);
        if (r == 0 || res.best_eval.cost < best.best_eval.cost) best = std::move(res);
    }
    return best;
}

inline json to_json(const Partition& p, const DataflowGraph& g) {
    json actors = json::array();
    for (size_t a = 0; a < g.actors.size(); ++a)
        actors.push_back({{"id", g.actors[a].id}, {"cpu", p.cpu[a]}, {"clones", p.clones[a]}});
    return json{{"actors", actors}, {"granularity", p.granularity}};
}

inline json to_json(const Evaluation& e) {
    return json{{"energy_pj", e.energy_pj}, {"work_pj", e.work_pj}, {"comm_pj", e.comm_pj}, {"static_pj", e.static_pj},
                {"period_cycles", e.period}, {"cost", e.cost},   {"feasible", e.feasible}};
}

inline std::string history_csv(const std::vector<AnnealStep>& h) {
    std::string out = "step,temperature,current_cost,best_cost,accepted,mutation\n";
    for (const auto& s : h)
        out += std::to_string(s.step) + "," + format_double(s.temperature) + "," + format_double(s.current) + "," +
               format_double(s.best) + "," + (s.accepted ? "1" : "0") + "," + mutation_name(s.mutation) + "\n";
    return out;
}

} // namespace enermod
