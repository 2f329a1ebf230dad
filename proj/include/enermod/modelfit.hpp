#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "enermod/campaign.hpp"
#include "enermod/refsim.hpp"
#include "enermod/statetrace.hpp"

namespace enermod {

inline const std::string kStaticKey = "static";

struct FitReport {
    std::vector<std::string> names;  // one per evaluated observation
    std::vector<double> residuals;   // estimate - measured
    double max_abs_error = 0;
    double mean_rel_error = 0;
    size_t unknowns = 0;
    size_t rank = 0;
    bool rank_deficient = false;
    std::vector<std::string> negative_keys;
    std::vector<std::string> absent_keys;
};

enum class ReducerKind { linear, staircase };

inline const char* reducer_kind_name(ReducerKind k) { return k == ReducerKind::linear ? "linear" : "staircase"; }

inline ReducerKind parse_reducer_kind(const std::string& s) {
    if (s == "linear") return ReducerKind::linear;
    if (s == "staircase") return ReducerKind::staircase;
    throw ParseError("unknown reducer kind '" + s + "'");
}

// Replaces a family of per-size constants (keys "<family>/size:N") with
// a + b*size or a + b*ceil(size/flit).
struct Reducer {
    std::string family;
    std::string variable = "size";
    ReducerKind kind = ReducerKind::staircase;
    double a = 0;
    double b = 0;
    uint32_t flit_bytes = 8;

    double regressor(double size) const {
        if (kind == ReducerKind::linear) return size;
        return std::ceil(size / static_cast<double>(flit_bytes));
    }
    double operator()(double size) const { return a + b * regressor(size); }
};

struct EnergyModel {
    AbstractionLevel level = AbstractionLevel::FINE_GRAINED;
    ModelFunction function;
    std::map<std::string, double> constants;
    std::vector<Reducer> reducers;
    double static_pj_per_cycle = 0;
    double clock_hz = 7e8;
    json provenance = json::object();

    std::map<std::string, double> group_means;  // per instruction group, averaged over patterns
    double static_power_pw() const { return static_pj_per_cycle * clock_hz; }

    // Matches "<family>/<variable>:N" keys against the reducers.
    std::optional<double> reduced(const std::string& key) const {
        for (const auto& r : reducers) {
            std::string prefix = r.family + "/" + r.variable + ":";
            if (key.size() <= prefix.size() || key.compare(0, prefix.size(), prefix) != 0) continue;
            const char* s = key.c_str() + prefix.size();
            char* end = nullptr;
            double v = std::strtod(s, &end);
            if (end && *end == '\0') return r(v);
        }
        return std::nullopt;
    }

    std::optional<double> lookup(const std::string& key) const {
        auto it = constants.find(key);
        if (it != constants.end()) return it->second;
        return reduced(key);
    }

    // Energy of one packet of `size` bytes over `hops` mesh hops.
    std::optional<double> packet_energy(uint32_t hops, uint32_t size) const {
        return lookup("noc/packet/hops:" + std::to_string(hops) + "/size:" + std::to_string(size));
    }
};

// Mean constant per instruction group over its data patterns, for
// bundle keys without a position component.
inline std::map<std::string, double> group_means(const std::map<std::string, double>& constants) {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& [k, v] : constants) {
        if (k.rfind("cpu/bundle-issue/", 0) != 0) continue;
        Record r = parse_key(k);
        if (!r.attrs.has(Attr::group) || r.attrs.has(Attr::addr)) continue;
        auto& a = acc["group:" + std::to_string(r.attrs.get(Attr::group))];
        a.first += v;
        a.second += 1;
    }
    std::map<std::string, double> out;
    for (const auto& [g, a] : acc) out[g] = a.first / a.second;
    return out;
}

namespace detail {

inline FitReport evaluate_rows(const std::vector<std::string>& names, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                               const Eigen::VectorXd& x) {
    FitReport rep;
    rep.names = names;
    Eigen::VectorXd r = A * x - b;
    rep.residuals.assign(r.data(), r.data() + r.size());
    double sum_rel = 0;
    size_t n_rel = 0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        rep.max_abs_error = std::max(rep.max_abs_error, std::abs(r[i]));
        if (b[i] != 0) {
            sum_rel += std::abs(r[i] / b[i]);
            ++n_rel;
        }
    }
    rep.mean_rel_error = n_rel ? sum_rel / static_cast<double>(n_rel) : 0.0;
    return rep;
}

// Least squares with a rank-revealing factorization of the design matrix;
// underdetermined directions get the minimum-norm solution.
inline Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, size_t& rank) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    cod.setThreshold(1e-10);
    Eigen::VectorXd x = cod.solve(b);
    // one refinement step against the residual
    x += cod.solve(b - A * x);
    rank = static_cast<size_t>(cod.rank());
    return x;
}

} // namespace detail

struct FitResult {
    EnergyModel model;
    FitReport report;
};

struct FitOptions {
    bool fit_static = true;  // add a per-cycle static column
    double clock_hz = 7e8;
};

// One constant per model-state key plus the static power, fitted to the
// observations by least squares.
inline FitResult fit_constants(const std::vector<Observation>& obs, const ModelFunction& f, const FitOptions& opt = {}) {
    if (obs.empty()) throw InvariantError("fit: no observations");
    std::set<std::string> keyset;
    for (const auto& o : obs)
        for (const auto& [k, v] : o.counts) keyset.insert(k);
    std::vector<std::string> keys;
    std::vector<std::string> absent;
    for (const auto& k : keyset) {
        bool any = false;
        for (const auto& o : obs) {
            auto it = o.counts.find(k);
            if (it != o.counts.end() && it->second != 0) any = true;
        }
        (any ? keys : absent).push_back(k);
    }
    bool use_static = false;
    if (opt.fit_static)
        for (const auto& o : obs)
            if (o.duration != 0) use_static = true;

    const auto m = static_cast<Eigen::Index>(obs.size());
    const auto n = static_cast<Eigen::Index>(keys.size() + (use_static ? 1 : 0));
    if (n == 0) throw InvariantError("fit: no unknowns");
    std::map<std::string, Eigen::Index> col;
    for (size_t j = 0; j < keys.size(); ++j) col[keys[j]] = static_cast<Eigen::Index>(j);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
    Eigen::VectorXd b(m);
    std::vector<std::string> names;
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& o = obs[static_cast<size_t>(i)];
        for (const auto& [k, v] : o.counts) {
            auto it = col.find(k);
            if (it != col.end()) A(i, it->second) = v;
        }
        if (use_static) A(i, n - 1) = o.duration;
        b[i] = o.measured;
        names.push_back(o.name);
    }

    size_t rank = 0;
    Eigen::VectorXd x = detail::solve_least_squares(A, b, rank);

    FitResult res;
    res.report = detail::evaluate_rows(names, A, b, x);
    res.report.unknowns = static_cast<size_t>(n);
    res.report.rank = rank;
    res.report.rank_deficient = rank < static_cast<size_t>(n);
    res.report.absent_keys = absent;

    auto& model = res.model;
    model.level = f.level();
    model.function = f;
    model.clock_hz = opt.clock_hz;
    for (size_t j = 0; j < keys.size(); ++j) {
        double c = x[static_cast<Eigen::Index>(j)];
        model.constants[keys[j]] = c;
        if (c < -1e-9) res.report.negative_keys.push_back(keys[j]);
    }
    if (use_static) model.static_pj_per_cycle = x[n - 1];
    model.group_means = group_means(model.constants);

    json warnings = json::array();
    if (res.report.rank_deficient)
        warnings.push_back("rank deficient: rank " + std::to_string(rank) + " of " + std::to_string(n) +
                           " unknowns, minimum-norm constants reported");
    for (const auto& k : res.report.negative_keys) warnings.push_back("negative constant: " + k);
    for (const auto& k : absent) warnings.push_back("key never observed: " + k);
    model.provenance = json{{"observations", obs.size()}, {"unknowns", n}, {"rank", rank}, {"warnings", warnings}};
    return res;
}

// ---------------------------------------------------------------------------
// Size reducers

struct SizePoint {
    double size = 0;
    double energy = 0;
};

struct LineFit {
    Reducer reducer;
    FitReport report;  // over the evaluation points
};

namespace detail {

inline LineFit fit_line(const std::vector<SizePoint>& fit, const std::vector<SizePoint>& eval, Reducer r) {
    std::set<double> distinct;
    for (const auto& p : fit) distinct.insert(r.regressor(p.size));
    if (distinct.size() < 2) throw InvariantError("size fit: need at least two distinct regressor values");
    const auto m = static_cast<Eigen::Index>(fit.size());
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = r.regressor(fit[static_cast<size_t>(i)].size);
        b[i] = fit[static_cast<size_t>(i)].energy;
    }
    size_t rank = 0;
    Eigen::VectorXd x = solve_least_squares(A, b, rank);
    r.a = x[0];
    r.b = x[1];

    const auto k = static_cast<Eigen::Index>(eval.size());
    Eigen::MatrixXd E(k, 2);
    Eigen::VectorXd y(k);
    std::vector<std::string> names;
    for (Eigen::Index i = 0; i < k; ++i) {
        E(i, 0) = 1.0;
        E(i, 1) = r.regressor(eval[static_cast<size_t>(i)].size);
        y[i] = eval[static_cast<size_t>(i)].energy;
        names.push_back(format_double(eval[static_cast<size_t>(i)].size));
    }
    LineFit out;
    out.report = evaluate_rows(names, E, y, x);
    out.report.unknowns = 2;
    out.report.rank = rank;
    out.reducer = r;
    return out;
}

} // namespace detail

inline LineFit fit_linear(const std::vector<SizePoint>& fit, const std::vector<SizePoint>& eval) {
    Reducer r;
    r.kind = ReducerKind::linear;
    return detail::fit_line(fit, eval, r);
}

inline LineFit fit_staircase(const std::vector<SizePoint>& fit, uint32_t flit_bytes, const std::vector<SizePoint>& eval) {
    if (flit_bytes == 0) throw InvariantError("flit size must be positive");
    Reducer r;
    r.kind = ReducerKind::staircase;
    r.flit_bytes = flit_bytes;
    return detail::fit_line(fit, eval, r);
}

namespace detail {

inline const std::string kPairKeyPrefix = "noc/packet/sx:";

struct PacketKey {
    std::string family;  // noc/packet/hops:H
    uint32_t size = 0;
};

inline std::optional<PacketKey> packet_key(const std::string& key) {
    if (key.rfind("noc/packet/", 0) != 0) return std::nullopt;
    Record r = parse_key(key);
    if (!r.attrs.has(Attr::size)) return std::nullopt;
    PacketKey pk;
    pk.size = static_cast<uint32_t>(r.attrs.get(Attr::size));
    if (r.attrs.has(Attr::hops)) {
        pk.family = "noc/packet/hops:" + std::to_string(r.attrs.get(Attr::hops));
    } else if (r.attrs.has(Attr::sx) && r.attrs.has(Attr::sy) && r.attrs.has(Attr::dx) && r.attrs.has(Attr::dy)) {
        auto hops = manhattan_dist({static_cast<uint32_t>(r.attrs.get(Attr::sx)), static_cast<uint32_t>(r.attrs.get(Attr::sy))},
                                   {static_cast<uint32_t>(r.attrs.get(Attr::dx)), static_cast<uint32_t>(r.attrs.get(Attr::dy))});
        pk.family = "noc/packet/hops:" + std::to_string(hops);
    } else {
        return std::nullopt;
    }
    return pk;
}

} // namespace detail

struct ReduceResult {
    EnergyModel model;
    std::vector<std::string> warnings;
};

// Collapses per-(source, destination) packet constants into per-hop-count
// constants. Pairs at the same distance must agree; otherwise they are
// averaged and a warning is recorded.
inline ReduceResult reduce_noc_model(const EnergyModel& full, double tolerance = 1e-9) {
    ReduceResult res;
    res.model = full;
    auto& m = res.model;
    std::map<std::string, std::vector<std::pair<std::string, double>>> groups;
    std::map<std::string, double> kept;
    for (const auto& [k, v] : full.constants) {
        if (k.rfind(detail::kPairKeyPrefix, 0) == 0) {
            auto pk = detail::packet_key(k);
            if (!pk) throw InvariantError("reduce: malformed packet key '" + k + "'");
            groups[pk->family + "/size:" + std::to_string(pk->size)].emplace_back(k, v);
        } else {
            kept[k] = v;
        }
    }
    for (const auto& [key, members] : groups) {
        double lo = members.front().second, hi = lo, sum = 0;
        for (const auto& [_, v] : members) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
        }
        double value = members.front().second;
        if (hi - lo > tolerance) {
            value = sum / static_cast<double>(members.size());
            res.warnings.push_back("pair constants for " + key + " differ by " + format_double(hi - lo) + " pJ, averaged");
        }
        if (kept.count(key)) throw InvariantError("reduce: key '" + key + "' already present");
        kept[key] = value;
    }
    m.constants = std::move(kept);

    static const std::string pair_tpl = "sx:{sx}/sy:{sy}/dx:{dx}/dy:{dy}";
    for (auto& stage : m.function.stages)
        for (auto& rule : stage.rules) {
            if (rule.discard) continue;
            std::string t = rule.emit.text();
            auto pos = t.find(pair_tpl);
            if (pos == std::string::npos) continue;
            t.replace(pos, pair_tpl.size(), "hops:{hops}");
            rule.emit = KeyTemplate(t);
        }
    auto pos = m.function.name.find("_pairs");
    if (pos != std::string::npos) m.function.name.erase(pos, 6);
    if (!m.provenance.is_object()) m.provenance = json::object();
    auto& w = m.provenance["warnings"];
    if (!w.is_array()) w = json::array();
    for (const auto& s : res.warnings) w.push_back(s);
    m.provenance["reduced_noc"] = true;
    return res;
}

struct ReducerOptions {
    ReducerKind kind = ReducerKind::staircase;
    uint32_t flit_bytes = 8;
    size_t window = 16;  // fit on this many points around the middle of the sweep
};

struct ReducerFit {
    EnergyModel model;
    std::map<std::string, LineFit> fits;  // by family
};

// Replaces every packet family's per-size constants by one reducer.
inline ReducerFit fit_noc_reducers(const EnergyModel& model, const ReducerOptions& opt = {}) {
    ReducerFit res;
    res.model = model;
    std::map<std::string, std::vector<std::pair<SizePoint, std::string>>> families;
    for (const auto& [k, v] : model.constants) {
        if (k.rfind("noc/packet/", 0) != 0) continue;
        auto pk = detail::packet_key(k);
        if (!pk) continue;
        families[pk->family].push_back({SizePoint{static_cast<double>(pk->size), v}, k});
    }
    for (auto& [family, pts] : families) {
        std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first.size < b.first.size; });
        std::vector<SizePoint> all;
        for (const auto& p : pts) all.push_back(p.first);
        auto [lo, hi] = center_window(all.size(), opt.window);
        std::vector<SizePoint> fit(all.begin() + static_cast<std::ptrdiff_t>(lo), all.begin() + static_cast<std::ptrdiff_t>(hi));
        LineFit lf = opt.kind == ReducerKind::linear ? fit_linear(fit, all) : fit_staircase(fit, opt.flit_bytes, all);
        lf.reducer.family = family;
        for (const auto& p : pts) res.model.constants.erase(p.second);
        res.model.reducers.push_back(lf.reducer);
        res.fits.emplace(family, std::move(lf));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const EnergyModel& m) {
    json constants = json::object();
    for (const auto& [k, v] : m.constants) constants[k] = v;
    json means = json::object();
    for (const auto& [k, v] : m.group_means) means[k] = v;
    json reducers = json::array();
    for (const auto& r : m.reducers)
        reducers.push_back({{"family", r.family},
                            {"variable", r.variable},
                            {"kind", reducer_kind_name(r.kind)},
                            {"a", r.a},
                            {"b", r.b},
                            {"flit_payload_bytes", r.flit_bytes}});
    return json{{"level", level_name(m.level)},
                {"function_ref", m.function.name},
                {"function", to_json(m.function)},
                {"constants", constants},
                {"group_means", means},
                {"reducers", reducers},
                {"static_power_pW", m.static_power_pw()},
                {"static_pj_per_cycle", m.static_pj_per_cycle},
                {"clock_hz", m.clock_hz},
                {"provenance", m.provenance}};
}

inline std::string serialize_model(const EnergyModel& m) { return to_json(m).dump(2) + "\n"; }

inline EnergyModel model_from_json(const json& doc) {
    EnergyModel m;
    try {
        m.level = parse_level(doc.at("level").get<std::string>());
        if (doc.contains("function"))
            m.function = function_from_json(doc["function"], doc.value("function_ref", std::string("custom")));
        else
            m.function = standard_function(doc.at("function_ref").get<std::string>());
        for (const auto& [k, v] : doc.at("constants").items()) m.constants[k] = v.get<double>();
        if (doc.contains("group_means"))
            for (const auto& [k, v] : doc["group_means"].items()) m.group_means[k] = v.get<double>();
        if (doc.contains("reducers"))
            for (const auto& r : doc["reducers"]) {
                Reducer red;
                red.family = r.at("family").get<std::string>();
                red.variable = r.value("variable", std::string("size"));
                red.kind = parse_reducer_kind(r.at("kind").get<std::string>());
                red.a = r.at("a").get<double>();
                red.b = r.at("b").get<double>();
                red.flit_bytes = r.value("flit_payload_bytes", 8u);
                if (red.flit_bytes == 0) throw InvariantError("reducer flit size must be positive");
                m.reducers.push_back(red);
            }
        m.clock_hz = doc.value("clock_hz", 7e8);
        if (m.clock_hz <= 0) throw InvariantError("model clock_hz must be positive");
        if (doc.contains("static_pj_per_cycle"))
            m.static_pj_per_cycle = doc["static_pj_per_cycle"].get<double>();
        else
            m.static_pj_per_cycle = doc.value("static_power_pW", 0.0) / m.clock_hz;
        m.provenance = doc.value("provenance", json::object());
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
    return m;
}

inline EnergyModel parse_model(const std::string& text) { return model_from_json(detail::parse_json_text(text, "model")); }

inline EnergyModel load_model(const std::string& path) { return parse_model(detail::read_file(path)); }

} // namespace enermod
