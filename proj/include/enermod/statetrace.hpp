#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "enermod/error.hpp"
#include "enermod/trace.hpp"

namespace enermod {

enum class AbstractionLevel : uint8_t { BINARY_USAGE = 0, ACTIVE_IDLE = 1, FINE_GRAINED = 2 };

inline const char* level_name(AbstractionLevel l) {
    static const char* names[] = {"BINARY_USAGE", "ACTIVE_IDLE", "FINE_GRAINED"};
    return names[static_cast<int>(l)];
}

inline AbstractionLevel parse_level(const std::string& s) {
    for (int l = 0; l < 3; ++l)
        if (s == level_name(static_cast<AbstractionLevel>(l))) return static_cast<AbstractionLevel>(l);
    throw ParseError("unknown abstraction level '" + s + "'");
}

// A state description that rules match against: either a simulator event or
// a model-state key produced by an earlier stage. Keys have the form
// component/kind[/attr:value]*.
struct Record {
    std::string component;
    std::string cls;
    std::string kind;
    Attrs attrs;
    const std::string* source_key = nullptr;
};

inline std::string strip_index(const std::string& component) {
    size_t end = component.size();
    while (end > 0 && component[end - 1] >= '0' && component[end - 1] <= '9') --end;
    return end == 0 ? component : component.substr(0, end);
}

inline std::string canonical_key(const std::string& component, const std::string& kind, const Attrs& attrs) {
    std::string out = component + "/" + kind;
    for (int a = 0; a < kNumAttrs; ++a) {
        if (!attrs.has(static_cast<Attr>(a))) continue;
        out += '/';
        out += attr_name(static_cast<Attr>(a));
        out += ':';
        out += std::to_string(attrs.values[static_cast<size_t>(a)]);
    }
    return out;
}

inline Record record_from_event(const StateEvent& e) {
    return Record{e.component.str(), component_class_name(e.component.cls), event_kind_name(e.kind), e.attrs, nullptr};
}

inline Record parse_key(const std::string& key) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t slash = key.find('/', start);
        fields.push_back(key.substr(start, slash - start));
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty())
        throw InvariantError("model-state key '" + key + "' is not component/kind[/attr:value]*");
    Record r;
    r.component = fields[0];
    r.cls = strip_index(fields[0]);
    r.kind = fields[1];
    for (size_t i = 2; i < fields.size(); ++i) {
        auto colon = fields[i].find(':');
        if (colon == std::string::npos) throw InvariantError("model-state key '" + key + "': bad field '" + fields[i] + "'");
        auto attr = find_attr(fields[i].substr(0, colon));
        if (!attr) throw InvariantError("model-state key '" + key + "': unknown attribute '" + fields[i].substr(0, colon) + "'");
        r.attrs.set(*attr, std::stoll(fields[i].substr(colon + 1)));
    }
    r.source_key = &key;
    return r;
}

// Emit template with {component}, {class}, {kind}, {key} and {<attr>}
// placeholders.
class KeyTemplate {
public:
    KeyTemplate() = default;
    explicit KeyTemplate(std::string text) : text_(std::move(text)) {
        size_t i = 0;
        while (i < text_.size()) {
            size_t open = text_.find('{', i);
            if (open == std::string::npos) {
                segs_.push_back({Seg::t_literal, text_.substr(i), Attr::group});
                break;
            }
            if (open > i) segs_.push_back({Seg::t_literal, text_.substr(i, open - i), Attr::group});
            size_t close = text_.find('}', open);
            if (close == std::string::npos) throw ParseError("template '" + text_ + "': unterminated placeholder");
            std::string name = text_.substr(open + 1, close - open - 1);
            if (name == "component") segs_.push_back({Seg::t_component, {}, Attr::group});
            else if (name == "class") segs_.push_back({Seg::t_cls, {}, Attr::group});
            else if (name == "kind") segs_.push_back({Seg::t_kind, {}, Attr::group});
            else if (name == "key") segs_.push_back({Seg::t_key, {}, Attr::group});
            else if (auto a = find_attr(name)) segs_.push_back({Seg::t_attr, {}, *a});
            else throw ParseError("template '" + text_ + "': unknown placeholder {" + name + "}");
            i = close + 1;
        }
    }

    const std::string& text() const { return text_; }

    std::string render(const Record& r) const {
        std::string out;
        for (const auto& s : segs_) {
            switch (s.type) {
            case Seg::t_literal: out += s.literal; break;
            case Seg::t_component: out += r.component; break;
            case Seg::t_cls: out += r.cls; break;
            case Seg::t_kind: out += r.kind; break;
            case Seg::t_key: out += r.source_key ? *r.source_key : canonical_key(r.component, r.kind, r.attrs); break;
            case Seg::t_attr:
                if (!r.attrs.has(s.attr))
                    throw InvariantError("template '" + text_ + "' needs attribute '" + attr_name(s.attr) + "' missing on " +
                                         r.component + "/" + r.kind);
                out += std::to_string(r.attrs.get(s.attr));
                break;
            }
        }
        return out;
    }

    // True when every rendering parses back as a model-state key.
    bool renders_keys() const {
        if (text_ == "{key}") return true;
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            size_t slash = text_.find('/', start);
            fields.push_back(text_.substr(start, slash - start));
            if (slash == std::string::npos) break;
            start = slash + 1;
        }
        if (fields.size() < 2) return false;
        for (size_t i = 2; i < fields.size(); ++i) {
            auto colon = fields[i].find(':');
            if (colon == std::string::npos || !find_attr(fields[i].substr(0, colon))) return false;
        }
        return true;
    }

private:
    struct Seg {
        enum Type { t_literal, t_component, t_cls, t_kind, t_key, t_attr } type;
        std::string literal;
        Attr attr;
    };
    std::string text_;
    std::vector<Seg> segs_;
};

struct Rule {
    std::optional<std::string> kind;
    std::optional<std::string> component;
    std::optional<std::string> cls;
    std::vector<std::pair<Attr, std::optional<int64_t>>> attrs;  // nullopt: attribute must be present
    bool discard = false;
    KeyTemplate emit;

    bool matches(const Record& r) const {
        if (kind && *kind != r.kind) return false;
        if (component && *component != r.component) return false;
        if (cls && *cls != r.cls) return false;
        for (const auto& [a, v] : attrs) {
            if (!r.attrs.has(a)) return false;
            if (v && r.attrs.get(a) != *v) return false;
        }
        return true;
    }
};

struct Stage {
    AbstractionLevel level = AbstractionLevel::FINE_GRAINED;
    bool saturate = false;  // counts clamp to 1 per key (usage flags)
    std::vector<Rule> rules;

    // First matching rule; nullptr when nothing matches.
    const Rule* match(const Record& r) const {
        for (const auto& rule : rules)
            if (rule.matches(r)) return &rule;
        return nullptr;
    }
};

// Transformation from simulator events to model-state keys. A function is a
// chain of stages; stage 0 sees events, later stages see the keys emitted by
// the stage before.
struct ModelFunction {
    std::string name;
    std::vector<Stage> stages;

    // A chain is as coarse as its coarsest stage.
    AbstractionLevel level() const {
        AbstractionLevel l = AbstractionLevel::FINE_GRAINED;
        for (const auto& s : stages) l = std::min(l, s.level);
        return l;
    }
    bool linear() const {
        for (const auto& s : stages)
            if (s.saturate) return false;
        return true;
    }
};

struct StateCountVector {
    std::map<std::string, uint64_t> counts;
    uint64_t duration = 0;

    friend bool operator==(const StateCountVector&, const StateCountVector&) = default;

    uint64_t total() const {
        uint64_t t = 0;
        for (const auto& [_, c] : counts) t += c;
        return t;
    }
    uint64_t at(const std::string& key) const {
        auto it = counts.find(key);
        return it == counts.end() ? 0 : it->second;
    }
};

namespace detail {

struct EventSig {
    ComponentId component;
    EventKind kind;
    Attrs attrs;
    friend bool operator==(const EventSig& a, const EventSig& b) {
        return a.component == b.component && a.kind == b.kind && a.attrs == b.attrs;
    }
};

struct EventSigHash {
    size_t operator()(const EventSig& s) const noexcept {
        uint64_t h = 1469598103934665603ull;
        auto mix = [&](uint64_t v) {
            h ^= v;
            h *= 1099511628211ull;
        };
        mix(static_cast<uint64_t>(s.component.cls));
        mix(s.component.index);
        mix(static_cast<uint64_t>(s.kind));
        mix(s.attrs.mask);
        for (int a = 0; a < kNumAttrs; ++a)
            if (s.attrs.has(static_cast<Attr>(a))) mix(static_cast<uint64_t>(s.attrs.values[static_cast<size_t>(a)]));
        return static_cast<size_t>(h);
    }
};

inline std::string no_rule_message(const Record& r) {
    return "model function has no rule for " + r.component + "/" + r.kind;
}

inline std::map<std::string, uint64_t> apply_key_stage(const Stage& stage, const std::map<std::string, uint64_t>& in) {
    std::map<std::string, uint64_t> out;
    for (const auto& [key, count] : in) {
        Record r = parse_key(key);
        const Rule* rule = stage.match(r);
        if (!rule) throw InvariantError(no_rule_message(r));
        if (rule->discard) continue;
        out[rule->emit.render(r)] += count;
    }
    if (stage.saturate)
        for (auto& [_, c] : out) c = c > 0 ? 1 : 0;
    return out;
}

} // namespace detail

inline StateCountVector abstract_trace(const Trace& trace, const ModelFunction& f) {
    StateCountVector out;
    out.duration = trace.duration();
    if (f.stages.empty()) throw InvariantError("model function '" + f.name + "' has no stages");

    const Stage& first = f.stages.front();
    std::unordered_map<detail::EventSig, int, detail::EventSigHash> memo;
    std::vector<std::string> keys;
    std::vector<uint64_t> counts;
    for (const auto& e : trace.events) {
        detail::EventSig sig{e.component, e.kind, e.attrs};
        auto it = memo.find(sig);
        int slot;
        if (it != memo.end()) {
            slot = it->second;
        } else {
            Record r = record_from_event(e);
            const Rule* rule = first.match(r);
            if (!rule) throw InvariantError(detail::no_rule_message(r));
            slot = -1;
            if (!rule->discard) {
                keys.push_back(rule->emit.render(r));
                counts.push_back(0);
                slot = static_cast<int>(keys.size() - 1);
            }
            memo.emplace(sig, slot);
        }
        if (slot >= 0) ++counts[static_cast<size_t>(slot)];
    }
    for (size_t i = 0; i < keys.size(); ++i) out.counts[keys[i]] += counts[i];
    if (first.saturate)
        for (auto& [_, c] : out.counts) c = c > 0 ? 1 : 0;

    for (size_t s = 1; s < f.stages.size(); ++s) out.counts = detail::apply_key_stage(f.stages[s], out.counts);
    return out;
}

// Applies a function to an already-abstracted count vector.
inline StateCountVector abstract_counts(const StateCountVector& in, const ModelFunction& f) {
    StateCountVector out;
    out.duration = in.duration;
    out.counts = in.counts;
    for (const auto& stage : f.stages) out.counts = detail::apply_key_stage(stage, out.counts);
    return out;
}

// compose(f, g): apply g first, then f to g's keys.
inline ModelFunction compose(const ModelFunction& f, const ModelFunction& g) {
    if (f.stages.empty() || g.stages.empty()) throw InvariantError("compose: empty model function");
    for (const auto& rule : g.stages.back().rules)
        if (!rule.discard && !rule.emit.renders_keys())
            throw InvariantError("compose: domain mismatch, template '" + rule.emit.text() + "' does not produce parseable keys");
    ModelFunction h;
    h.name = f.name + "." + g.name;
    h.stages = g.stages;
    h.stages.insert(h.stages.end(), f.stages.begin(), f.stages.end());
    return h;
}

// ---------------------------------------------------------------------------
// Rule files

inline nlohmann::ordered_json to_json(const Rule& r) {
    nlohmann::ordered_json match = nlohmann::ordered_json::object();
    if (r.kind) match["kind"] = *r.kind;
    if (r.component) match["component"] = *r.component;
    if (r.cls) match["class"] = *r.cls;
    for (const auto& [a, v] : r.attrs) {
        if (v) match[attr_name(a)] = *v;
        else match[attr_name(a)] = "*";
    }
    return {{"match", match}, {"emit", r.discard ? std::string("discard") : r.emit.text()}};
}

inline nlohmann::ordered_json to_json(const ModelFunction& f) {
    nlohmann::ordered_json stages = nlohmann::ordered_json::array();
    for (const auto& s : f.stages) {
        nlohmann::ordered_json rules = nlohmann::ordered_json::array();
        for (const auto& r : s.rules) rules.push_back(to_json(r));
        stages.push_back({{"level", level_name(s.level)}, {"saturate", s.saturate}, {"rules", rules}});
    }
    return {{"name", f.name}, {"stages", stages}};
}

namespace detail {

inline Rule rule_from_json(const nlohmann::ordered_json& o) {
    Rule r;
    const auto& match = o.at("match");
    for (const auto& [k, v] : match.items()) {
        if (k == "kind") r.kind = v.get<std::string>();
        else if (k == "component") r.component = v.get<std::string>();
        else if (k == "class") r.cls = v.get<std::string>();
        else if (auto a = find_attr(k)) {
            if (v.is_string() && v.get<std::string>() == "*") r.attrs.emplace_back(*a, std::nullopt);
            else if (v.is_number_integer()) r.attrs.emplace_back(*a, v.get<int64_t>());
            else throw ParseError("rule: attribute predicate '" + k + "' must be an integer or \"*\"");
        } else {
            throw ParseError("rule: unknown match field '" + k + "'");
        }
    }
    std::string emit = o.at("emit").get<std::string>();
    if (emit == "discard") r.discard = true;
    else r.emit = KeyTemplate(emit);
    return r;
}

inline Stage stage_from_json(const nlohmann::ordered_json& o) {
    Stage s;
    const nlohmann::ordered_json* rules = &o;
    if (o.is_object()) {
        s.level = parse_level(o.value("level", std::string("FINE_GRAINED")));
        s.saturate = o.value("saturate", false);
        rules = &o.at("rules");
    }
    if (!rules->is_array()) throw ParseError("rule file: rules must be a list");
    for (const auto& r : *rules) s.rules.push_back(rule_from_json(r));
    return s;
}

} // namespace detail

// Accepts a bare rule list, a single stage object, or {name, stages:[...]}.
inline ModelFunction function_from_json(const nlohmann::ordered_json& doc, const std::string& fallback_name = "custom") {
    ModelFunction f;
    f.name = fallback_name;
    try {
        if (doc.is_object() && doc.contains("stages")) {
            f.name = doc.value("name", fallback_name);
            for (const auto& s : doc["stages"]) f.stages.push_back(detail::stage_from_json(s));
        } else {
            f.stages.push_back(detail::stage_from_json(doc));
        }
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ParseError(std::string("rule file: ") + e.what());
    }
    if (f.stages.empty()) throw ParseError("rule file: no stages");
    return f;
}

// ---------------------------------------------------------------------------
// Standard functions

namespace detail {

inline Rule emit_rule(std::optional<std::string> kind, std::vector<std::pair<Attr, std::optional<int64_t>>> attrs,
                      const std::string& tmpl) {
    Rule r;
    r.kind = std::move(kind);
    r.attrs = std::move(attrs);
    r.emit = KeyTemplate(tmpl);
    return r;
}

inline Rule discard_rule(std::optional<std::string> kind = std::nullopt) {
    Rule r;
    r.kind = std::move(kind);
    r.discard = true;
    return r;
}

} // namespace detail

// One key per distinct (component, kind, attributes).
inline ModelFunction identity_function() {
    return {"identity", {Stage{AbstractionLevel::FINE_GRAINED, false, {detail::emit_rule(std::nullopt, {}, "{key}")}}}};
}

enum class NocKeying { hops, pairs };

struct FineOptions {
    bool position = false;          // key bundles by imem address too
    NocKeying noc = NocKeying::hops;
};

// Fine-grained model: one constant per (instruction group, data pattern)
// and one per packet class. Idle cycles, flits and memory accesses are
// folded into those constants or the static term.
inline ModelFunction fine_grained_function(FineOptions opt = {}) {
    std::string bundle = "cpu/bundle-issue/group:{group}/pat:{pat}";
    if (opt.position) bundle += "/addr:{addr}";
    std::string packet = opt.noc == NocKeying::hops ? "noc/packet/hops:{hops}/size:{size}"
                                                    : "noc/packet/sx:{sx}/sy:{sy}/dx:{dx}/dy:{dy}/size:{size}";
    Stage s;
    s.level = AbstractionLevel::FINE_GRAINED;
    s.rules = {
        detail::emit_rule("bundle-issue", {}, bundle),
        detail::emit_rule("sync", {{Attr::role, kRoleSend}}, packet),
        detail::emit_rule("sync", {{Attr::role, kRoleBarrier}}, "cpu/sync"),
        detail::discard_rule(),
    };
    std::string name = opt.position ? "fine_position" : "fine";
    if (opt.noc == NocKeying::pairs) name += "_pairs";
    return {name, {s}};
}

// Per component instance: {component}/active per event, {component}/idle
// per idle cycle.
inline ModelFunction active_idle_function() {
    Stage s;
    s.level = AbstractionLevel::ACTIVE_IDLE;
    s.rules = {detail::emit_rule("idle", {}, "{component}/idle"), detail::emit_rule(std::nullopt, {}, "{component}/active")};
    return {"active_idle", {s}};
}

// Per component instance: {component}/used once if it had any activity.
inline ModelFunction binary_usage_function() {
    Stage s;
    s.level = AbstractionLevel::BINARY_USAGE;
    s.saturate = true;
    s.rules = {detail::discard_rule("idle"), detail::emit_rule(std::nullopt, {}, "{component}/used")};
    return {"binary", {s}};
}

// Merges instance keys (cpu3/active) into class keys (cpu/active).
inline ModelFunction class_merge_function(AbstractionLevel level) {
    Stage s;
    s.level = level;
    s.rules = {detail::emit_rule(std::nullopt, {}, "{class}/{kind}")};
    return {"class", {s}};
}

inline ModelFunction active_idle_class_function() {
    return compose(class_merge_function(AbstractionLevel::ACTIVE_IDLE), active_idle_function());
}

inline ModelFunction binary_usage_class_function() {
    return compose(class_merge_function(AbstractionLevel::BINARY_USAGE), binary_usage_function());
}

// Every flit-hop event becomes a (hops, size) key; everything else dropped.
inline ModelFunction noc_flit_hops_function() {
    Stage s;
    s.level = AbstractionLevel::FINE_GRAINED;
    s.rules = {detail::emit_rule("flit-hop", {}, "noc/flit-hop/hops:{hops}/size:{size}"), detail::discard_rule()};
    return {"noc_flit_hops", {s}};
}

inline std::vector<std::string> standard_function_names() {
    return {"identity", "fine", "fine_position", "fine_pairs", "active_idle", "active_idle_class", "binary", "binary_class",
            "noc_flit_hops"};
}

inline ModelFunction standard_function(const std::string& name) {
    if (name == "identity") return identity_function();
    if (name == "fine") return fine_grained_function();
    if (name == "fine_position") return fine_grained_function({true, NocKeying::hops});
    if (name == "fine_pairs") return fine_grained_function({false, NocKeying::pairs});
    if (name == "active_idle") return active_idle_function();
    if (name == "active_idle_class") {
        auto f = active_idle_class_function();
        f.name = name;
        return f;
    }
    if (name == "binary") return binary_usage_function();
    if (name == "binary_class") {
        auto f = binary_usage_class_function();
        f.name = name;
        return f;
    }
    if (name == "noc_flit_hops") return noc_flit_hops_function();
    throw InvariantError("unknown model function '" + name + "'");
}

} // namespace enermod
