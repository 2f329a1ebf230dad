#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "enermod/error.hpp"

namespace enermod {

enum class ComponentClass : uint8_t { cpu, dmem, router, ni, bus };
inline constexpr int kNumComponentClasses = 5;

inline const char* component_class_name(ComponentClass c) {
    static const char* names[] = {"cpu", "dmem", "router", "ni", "bus"};
    return names[static_cast<int>(c)];
}

struct ComponentId {
    ComponentClass cls = ComponentClass::cpu;
    uint32_t index = 0;

    friend bool operator==(const ComponentId&, const ComponentId&) = default;
    friend auto operator<=>(const ComponentId&, const ComponentId&) = default;

    std::string str() const { return component_class_name(cls) + std::to_string(index); }
};

inline ComponentId parse_component(std::string_view s) {
    for (int c = 0; c < kNumComponentClasses; ++c) {
        std::string_view name = component_class_name(static_cast<ComponentClass>(c));
        if (s.size() > name.size() && s.substr(0, name.size()) == name) {
            uint32_t idx = 0;
            auto digits = s.substr(name.size());
            auto res = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
            if (res.ec == std::errc() && res.ptr == digits.data() + digits.size())
                return {static_cast<ComponentClass>(c), idx};
        }
    }
    throw ParseError("unknown component id '" + std::string(s) + "'");
}

enum class EventKind : uint8_t { bundle_issue, flit_hop, ni_transfer, dmem_access, sync, idle };
inline constexpr int kNumEventKinds = 6;

inline const char* event_kind_name(EventKind k) {
    static const char* names[] = {"bundle-issue", "flit-hop", "ni-transfer", "dmem-access", "sync", "idle"};
    return names[static_cast<int>(k)];
}

inline std::optional<EventKind> find_event_kind(std::string_view s) {
    for (int k = 0; k < kNumEventKinds; ++k)
        if (s == event_kind_name(static_cast<EventKind>(k))) return static_cast<EventKind>(k);
    return std::nullopt;
}

// Event attributes. Values are integers; the order here is the canonical
// order used when rendering keys and payloads.
enum class Attr : uint8_t { group, pat, addr, cmp, sx, sy, dx, dy, size, hops, flit, hop, dir, role, from, to };
inline constexpr int kNumAttrs = 16;

inline const char* attr_name(Attr a) {
    static const char* names[] = {"group", "pat", "addr", "cmp", "sx", "sy", "dx", "dy",
                                  "size", "hops", "flit", "hop", "dir", "role", "from", "to"};
    return names[static_cast<int>(a)];
}

inline std::optional<Attr> find_attr(std::string_view s) {
    for (int a = 0; a < kNumAttrs; ++a)
        if (s == attr_name(static_cast<Attr>(a))) return static_cast<Attr>(a);
    return std::nullopt;
}

// sync roles
inline constexpr int64_t kRoleSend = 0;
inline constexpr int64_t kRoleRecv = 1;
inline constexpr int64_t kRoleBarrier = 2;
// ni-transfer directions
inline constexpr int64_t kDirOut = 0;
inline constexpr int64_t kDirIn = 1;

struct Attrs {
    std::array<int64_t, kNumAttrs> values{};
    uint32_t mask = 0;

    bool has(Attr a) const { return (mask >> static_cast<int>(a)) & 1u; }
    int64_t get(Attr a) const { return values[static_cast<size_t>(a)]; }
    Attrs& set(Attr a, int64_t v) {
        values[static_cast<size_t>(a)] = v;
        mask |= 1u << static_cast<int>(a);
        return *this;
    }
    bool empty() const { return mask == 0; }

    friend bool operator==(const Attrs& l, const Attrs& r) {
        if (l.mask != r.mask) return false;
        for (int a = 0; a < kNumAttrs; ++a)
            if (l.has(static_cast<Attr>(a)) && l.values[a] != r.values[a]) return false;
        return true;
    }
};

struct StateEvent {
    uint64_t cycle = 0;
    ComponentId component;
    EventKind kind = EventKind::idle;
    Attrs attrs;

    friend bool operator==(const StateEvent&, const StateEvent&) = default;
};

// Sequence of state events plus the observed duration in cycles.
struct Trace {
    uint64_t cycles = 0;
    std::vector<StateEvent> events;

    friend bool operator==(const Trace&, const Trace&) = default;

    uint64_t duration() const {
        uint64_t d = cycles;
        if (!events.empty()) d = std::max<uint64_t>(d, events.back().cycle + 1);
        return d;
    }

    // Appends `other` shifted by this trace's duration.
    void append(const Trace& other) {
        uint64_t offset = duration();
        for (auto e : other.events) {
            e.cycle += offset;
            events.push_back(e);
        }
        cycles = offset + other.duration();
    }
};

inline std::string format_payload(const Attrs& attrs) {
    std::string out;
    for (int a = 0; a < kNumAttrs; ++a) {
        if (!attrs.has(static_cast<Attr>(a))) continue;
        if (!out.empty()) out += ' ';
        out += attr_name(static_cast<Attr>(a));
        out += '=';
        out += std::to_string(attrs.values[static_cast<size_t>(a)]);
    }
    return out;
}

// Line format: cycle<TAB>component_id<TAB>event_kind<TAB>payload, with the
// payload as space-separated name=value pairs. A leading "# cycles=N" line
// records the duration.
inline void write_trace(std::ostream& out, const Trace& trace) {
    out << "# cycles=" << trace.duration() << '\n';
    std::string line;
    for (const auto& e : trace.events) {
        line.clear();
        line += std::to_string(e.cycle);
        line += '\t';
        line += e.component.str();
        line += '\t';
        line += event_kind_name(e.kind);
        line += '\t';
        line += format_payload(e.attrs);
        line += '\n';
        out << line;
    }
}

inline Trace read_trace(std::istream& in) {
    Trace trace;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto pos = line.find("cycles=");
            if (pos != std::string::npos) trace.cycles = std::stoull(line.substr(pos + 7));
            continue;
        }
        auto fail = [&](const std::string& why) {
            return ParseError("trace line " + std::to_string(lineno) + ": " + why);
        };
        std::string_view sv(line);
        std::array<std::string_view, 4> fields;
        for (int f = 0; f < 3; ++f) {
            auto tab = sv.find('\t');
            if (tab == std::string_view::npos) throw fail("expected 4 tab-separated fields");
            fields[static_cast<size_t>(f)] = sv.substr(0, tab);
            sv.remove_prefix(tab + 1);
        }
        fields[3] = sv;
        StateEvent e;
        auto r = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), e.cycle);
        if (r.ec != std::errc()) throw fail("bad cycle");
        e.component = parse_component(fields[1]);
        auto kind = find_event_kind(fields[2]);
        if (!kind) throw fail("unknown event kind '" + std::string(fields[2]) + "'");
        e.kind = *kind;
        std::string_view payload = fields[3];
        while (!payload.empty()) {
            auto sp = payload.find(' ');
            auto tok = payload.substr(0, sp);
            payload = sp == std::string_view::npos ? std::string_view{} : payload.substr(sp + 1);
            if (tok.empty()) continue;
            auto eq = tok.find('=');
            if (eq == std::string_view::npos) throw fail("bad payload token");
            auto attr = find_attr(tok.substr(0, eq));
            if (!attr) throw fail("unknown attribute '" + std::string(tok.substr(0, eq)) + "'");
            int64_t v = 0;
            auto vs = tok.substr(eq + 1);
            auto rv = std::from_chars(vs.data(), vs.data() + vs.size(), v);
            if (rv.ec != std::errc()) throw fail("bad attribute value");
            e.attrs.set(*attr, v);
        }
        if (!trace.events.empty() && e.cycle < trace.events.back().cycle) throw fail("cycles must be nondecreasing");
        trace.events.push_back(e);
    }
    return trace;
}

inline std::string trace_to_string(const Trace& t) {
    std::ostringstream ss;
    write_trace(ss, t);
    return ss.str();
}

} // namespace enermod
