#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "restsuite/common.hpp"

namespace restsuite {

// Trace keys locate every request/response value of a scenario:
//   <step_alias>.<request|response>.<body|path|query|header|cookie|status>[.<segment>...]
// Object fields append ".name", array elements append "[i]", e.g.
//   createBooking.response.body.rooms[0].id

enum class Direction { Request, Response };

enum class Location { Body, Path, Query, Header, Cookie, Status };

inline const char* direction_name(Direction d) {
    return d == Direction::Request ? "request" : "response";
}

inline const char* location_name(Location l) {
    switch (l) {
        case Location::Body: return "body";
        case Location::Path: return "path";
        case Location::Query: return "query";
        case Location::Header: return "header";
        case Location::Cookie: return "cookie";
        case Location::Status: return "status";
    }
    return "?";
}

struct KeySegment {
    bool is_index = false;
    std::string name;    // valid when !is_index
    size_t index = 0;    // valid when is_index

    bool operator==(const KeySegment&) const = default;
};

struct TraceKey {
    std::string alias;
    Direction direction = Direction::Request;
    Location location = Location::Body;
    std::vector<KeySegment> segments;

    std::string text() const {
        std::string out = alias;
        out += '.';
        out += direction_name(direction);
        out += '.';
        out += location_name(location);
        for (const auto& seg : segments) {
            if (seg.is_index) {
                out += '[' + std::to_string(seg.index) + ']';
            } else {
                out += '.' + seg.name;
            }
        }
        return out;
    }

    bool operator==(const TraceKey&) const = default;
};

namespace detail {

// Segment names must not contain the grammar's separators, otherwise the
// key text would not parse back unambiguously.
inline bool valid_segment_name(std::string_view name) {
    if (name.empty()) return false;
    return name.find_first_of(".[]") == std::string_view::npos;
}

inline std::optional<Location> location_from(std::string_view s) {
    if (s == "body") return Location::Body;
    if (s == "path") return Location::Path;
    if (s == "query") return Location::Query;
    if (s == "header") return Location::Header;
    if (s == "cookie") return Location::Cookie;
    if (s == "status") return Location::Status;
    return std::nullopt;
}

}  // namespace detail

inline TraceKey parse_trace_key(std::string_view text) {
    auto syntax = [&](std::string_view why) -> TraceKey {
        fail(ErrorCode::KeySyntax, "bad trace key '" + std::string(text) + "': " + std::string(why));
    };

    TraceKey key;
    size_t dot = text.find('.');
    if (dot == std::string_view::npos || dot == 0) return syntax("missing step alias");
    key.alias = std::string(text.substr(0, dot));
    if (key.alias.find_first_of("[]") != std::string::npos) return syntax("alias contains brackets");

    std::string_view rest = text.substr(dot + 1);
    size_t dot2 = rest.find('.');
    if (dot2 == std::string_view::npos || dot2 == 0) return syntax("missing direction or location");
    std::string_view dir = rest.substr(0, dot2);
    if (dir == "request") {
        key.direction = Direction::Request;
    } else if (dir == "response") {
        key.direction = Direction::Response;
    } else {
        return syntax("direction must be 'request' or 'response'");
    }

    std::string_view tail = rest.substr(dot2 + 1);
    size_t loc_end = tail.find_first_of(".[");
    std::string_view loc = loc_end == std::string_view::npos ? tail : tail.substr(0, loc_end);
    auto location = detail::location_from(loc);
    if (!location) return syntax("unknown location '" + std::string(loc) + "'");
    key.location = *location;

    std::string_view segs = loc_end == std::string_view::npos ? std::string_view{} : tail.substr(loc_end);
    while (!segs.empty()) {
        if (segs.front() == '[') {
            size_t close = segs.find(']');
            if (close == std::string_view::npos || close == 1) return syntax("unterminated index");
            std::string_view digits = segs.substr(1, close - 1);
            size_t idx = 0;
            for (char c : digits) {
                if (!std::isdigit(static_cast<unsigned char>(c))) return syntax("non-numeric index");
                idx = idx * 10 + static_cast<size_t>(c - '0');
            }
            key.segments.push_back({true, {}, idx});
            segs.remove_prefix(close + 1);
        } else if (segs.front() == '.') {
            segs.remove_prefix(1);
            size_t end = segs.find_first_of(".[");
            std::string_view name = end == std::string_view::npos ? segs : segs.substr(0, end);
            if (name.empty()) return syntax("empty segment name");
            key.segments.push_back({false, std::string(name), 0});
            segs.remove_prefix(name.size());
        } else {
            return syntax("unexpected character after location");
        }
    }
    if (key.location == Location::Status && !key.segments.empty()) {
        return syntax("status takes no segments");
    }
    if (key.direction == Direction::Request && key.location == Location::Status) {
        return syntax("requests have no status");
    }
    return key;
}

inline bool is_valid_trace_key(std::string_view text) {
    try {
        parse_trace_key(text);
        return true;
    } catch (const Error&) {
        return false;
    }
}

// -------- Trace values --------

struct TraceValue {
    enum class Kind { Generated, Dependent };

    Kind kind = Kind::Generated;
    Json literal;     // Generated: JSON scalar or null
    std::string ref;  // Dependent: text of an earlier key

    static TraceValue generated(Json literal) {
        TraceValue v;
        v.kind = Kind::Generated;
        v.literal = std::move(literal);
        return v;
    }

    static TraceValue dependent(std::string ref_key) {
        TraceValue v;
        v.kind = Kind::Dependent;
        v.ref = std::move(ref_key);
        return v;
    }

    bool operator==(const TraceValue&) const = default;
};

inline bool is_scalar_literal(const Json& v) {
    return v.is_string() || v.is_number() || v.is_boolean() || v.is_null();
}

// -------- Execution trace --------

class ExecutionTrace {
public:
    struct Entry {
        std::string key;
        TraceValue value;
        bool operator==(const Entry&) const = default;
    };

    void insert(std::string key, TraceValue value) {
        if (frozen_) fail(ErrorCode::TraceFrozen, "trace is frozen");
        parse_trace_key(key);  // syntax gate
        if (index_.count(key)) fail(ErrorCode::DuplicateKey, "duplicate trace key '" + key + "'");
        if (value.kind == TraceValue::Kind::Dependent) {
            // Refs may only target keys inserted earlier; this rules out
            // forward references, self references and cycles at build time.
            if (!index_.count(value.ref)) {
                fail(ErrorCode::DanglingReference,
                     "dependent value for '" + key + "' references absent key '" + value.ref + "'");
            }
        } else if (!is_scalar_literal(value.literal)) {
            fail(ErrorCode::KeySyntax, "literal for '" + key + "' must be a JSON scalar or null");
        }
        index_.emplace(key, entries_.size());
        entries_.push_back({std::move(key), std::move(value)});
    }

    bool contains(std::string_view key) const { return index_.count(std::string(key)) > 0; }

    const TraceValue& at(std::string_view key) const {
        auto it = index_.find(std::string(key));
        if (it == index_.end()) fail(ErrorCode::MissingKey, "no trace key '" + std::string(key) + "'");
        return entries_[it->second].value;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    // Follows Dependent chains until a Generated literal is found.
    Json resolve(std::string_view key) const {
        std::unordered_set<std::string> seen;
        std::string current(key);
        if (!index_.count(current)) {
            fail(ErrorCode::MissingKey, "no trace key '" + current + "'");
        }
        for (;;) {
            if (!seen.insert(current).second) {
                fail(ErrorCode::CycleDetected, "reference cycle at '" + current + "'");
            }
            auto it = index_.find(current);
            if (it == index_.end()) {
                fail(ErrorCode::DanglingReference, "chain reaches absent key '" + current + "'");
            }
            const TraceValue& v = entries_[it->second].value;
            if (v.kind == TraceValue::Kind::Generated) return v.literal;
            current = v.ref;
        }
    }

    // Every key mapped to its resolved literal, insertion order preserved.
    std::vector<std::pair<std::string, Json>> resolve_all() const {
        std::vector<std::pair<std::string, Json>> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) {
            try {
                out.emplace_back(e.key, resolve(e.key));
            } catch (const Error& err) {
                fail(err.code(), std::string(err.what()) + " (while resolving '" + e.key + "')");
            }
        }
        return out;
    }

    Json to_json() const {
        Json entries = Json::array();
        for (const auto& e : entries_) {
            Json item;
            item["key"] = e.key;
            if (e.value.kind == TraceValue::Kind::Generated) {
                item["kind"] = "generated";
                item["value"] = e.value.literal;
            } else {
                item["kind"] = "dependent";
                item["ref"] = e.value.ref;
            }
            entries.push_back(std::move(item));
        }
        Json doc;
        doc["entries"] = std::move(entries);
        if (!truncated_at_.empty()) doc["truncated_at"] = truncated_at_;
        return doc;
    }

    static ExecutionTrace from_json(const Json& doc) {
        ExecutionTrace trace;
        if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
            fail(ErrorCode::WorkspaceCorrupt, "trace document must contain an 'entries' array");
        }
        for (const auto& item : doc["entries"]) {
            if (!item.is_object() || !item.contains("key") || !item.contains("kind")) {
                fail(ErrorCode::WorkspaceCorrupt, "trace entry missing key/kind");
            }
            const std::string kind = item["kind"].get<std::string>();
            if (kind == "generated") {
                if (!item.contains("value")) fail(ErrorCode::WorkspaceCorrupt, "generated entry missing value");
                trace.insert(item["key"].get<std::string>(), TraceValue::generated(item["value"]));
            } else if (kind == "dependent") {
                if (!item.contains("ref")) fail(ErrorCode::WorkspaceCorrupt, "dependent entry missing ref");
                trace.insert(item["key"].get<std::string>(), TraceValue::dependent(item["ref"].get<std::string>()));
            } else {
                fail(ErrorCode::WorkspaceCorrupt, "unknown trace entry kind '" + kind + "'");
            }
        }
        if (doc.contains("truncated_at")) {
            trace.truncated_at_ = doc["truncated_at"].get<std::vector<std::string>>();
        }
        trace.freeze();
        return trace;
    }

    void record_truncation(std::vector<std::string> prefixes) {
        truncated_at_.insert(truncated_at_.end(), prefixes.begin(), prefixes.end());
    }
    const std::vector<std::string>& truncated_at() const { return truncated_at_; }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
    std::vector<std::string> truncated_at_;
    bool frozen_ = false;
};

// -------- Flattening --------

inline constexpr size_t kDefaultFlattenCap = 2000;

struct FlattenResult {
    std::vector<std::pair<std::string, Json>> pairs;
    // Key prefixes where the pair cap cut off array tails. Non-fatal: the
    // trace records them so suites and prompts stay bounded on services
    // that return very large payloads.
    std::vector<std::string> truncated_at;
    bool truncated() const { return !truncated_at.empty(); }
};

namespace detail {

inline void flatten_value(const std::string& prefix, const Json& value, FlattenResult& out, size_t cap) {
    if (!out.truncated_at.empty()) return;
    if (value.is_object()) {
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (!valid_segment_name(it.key())) {
                fail(ErrorCode::KeySyntax,
                     "object field '" + it.key() + "' cannot be addressed by the trace key grammar");
            }
            flatten_value(prefix + "." + it.key(), it.value(), out, cap);
            if (!out.truncated_at.empty()) return;
        }
        return;
    }
    if (value.is_array()) {
        for (size_t i = 0; i < value.size(); ++i) {
            if (out.pairs.size() >= cap) {
                out.truncated_at.push_back(prefix + "[" + std::to_string(i) + "]");
                return;
            }
            flatten_value(prefix + "[" + std::to_string(i) + "]", value[i], out, cap);
            if (!out.truncated_at.empty()) return;
        }
        return;
    }
    if (value.is_binary()) {
        fail(ErrorCode::KeySyntax, "binary payloads are not flattened");
    }
    if (out.pairs.size() >= cap) {
        out.truncated_at.push_back(prefix);
        return;
    }
    out.pairs.emplace_back(prefix, value);
}

}  // namespace detail

// Depth-first, document-order flattening of one step's payload.
// `payload_by_location` is an object whose keys are a subset of
// body/path/query/header/cookie (and status for responses).
inline FlattenResult flatten(const std::string& step_alias, Direction direction,
                             const Json& payload_by_location, size_t cap = kDefaultFlattenCap) {
    if (!detail::valid_segment_name(step_alias)) {
        fail(ErrorCode::KeySyntax, "invalid step alias '" + step_alias + "'");
    }
    if (!payload_by_location.is_object()) {
        fail(ErrorCode::KeySyntax, "payload must be an object keyed by location");
    }
    static const char* order[] = {"body", "path", "query", "header", "cookie", "status"};
    FlattenResult out;
    const std::string base = step_alias + "." + direction_name(direction) + ".";
    for (const char* loc : order) {
        if (!payload_by_location.contains(loc)) continue;
        const Json& part = payload_by_location[loc];
        std::string_view loc_sv(loc);
        if (loc_sv == "status") {
            if (direction != Direction::Response) {
                fail(ErrorCode::KeySyntax, "requests have no status");
            }
            out.pairs.emplace_back(base + "status", part);
            continue;
        }
        if (loc_sv == "body") {
            detail::flatten_value(base + "body", part, out, cap);
        } else {
            if (!part.is_object()) {
                fail(ErrorCode::KeySyntax, std::string("location '") + loc + "' must be an object of named values");
            }
            detail::flatten_value(base + loc, part, out, cap);
        }
    }
    for (auto it = payload_by_location.begin(); it != payload_by_location.end(); ++it) {
        bool known = false;
        for (const char* loc : order) {
            if (it.key() == loc) { known = true; break; }
        }
        if (!known) fail(ErrorCode::KeySyntax, "unknown location '" + it.key() + "'");
    }
    return out;
}

// -------- Unflattening (inverse used by request rendering) --------

namespace detail {

inline void unflatten_assign(Json& root, const TraceKey& key, const Json& value) {
    Json* node = &root;
    const auto conflict = [&](const std::string& why) {
        fail(ErrorCode::UnflattenConflict, "key '" + key.text() + "': " + why);
    };
    for (size_t i = 0; i < key.segments.size(); ++i) {
        const KeySegment& seg = key.segments[i];
        if (seg.is_index) {
            if (node->is_null()) *node = Json::array();
            if (!node->is_array()) conflict("array index into non-array position");
            while (node->size() <= seg.index) node->push_back(Json());
            node = &(*node)[seg.index];
        } else {
            if (node->is_null()) *node = Json::object();
            if (!node->is_object()) conflict("object field on non-object position");
            node = &(*node)[seg.name];
        }
    }
    if (!node->is_null()) conflict("position assigned twice");
    *node = value;
}

inline void verify_dense_arrays(const Json& value, const std::string& at) {
    if (value.is_array()) {
        for (size_t i = 0; i < value.size(); ++i) {
            verify_dense_arrays(value[i], at + "[" + std::to_string(i) + "]");
        }
    } else if (value.is_object()) {
        for (auto it = value.begin(); it != value.end(); ++it) {
            verify_dense_arrays(it.value(), at + "." + it.key());
        }
    }
}

}  // namespace detail

// Rebuilds the per-location payload object from flattened (key, literal)
// pairs. All keys must share one alias and direction.
inline Json unflatten(const std::vector<std::pair<std::string, Json>>& pairs) {
    Json out = Json::object();
    std::optional<std::string> alias;
    std::optional<Direction> direction;
    std::unordered_set<std::string> seen;
    for (const auto& [text, literal] : pairs) {
        if (!seen.insert(text).second) {
            fail(ErrorCode::UnflattenConflict, "key '" + text + "' assigned twice");
        }
        TraceKey key = parse_trace_key(text);
        if (!alias) {
            alias = key.alias;
            direction = key.direction;
        } else if (*alias != key.alias || *direction != key.direction) {
            fail(ErrorCode::UnflattenConflict, "pairs span multiple steps or directions");
        }
        const char* loc = location_name(key.location);
        if (key.location == Location::Status) {
            if (out.contains("status")) fail(ErrorCode::UnflattenConflict, "status assigned twice");
            out["status"] = literal;
            continue;
        }
        if (!out.contains(loc)) out[loc] = Json();
        detail::unflatten_assign(out[loc], key, literal);
    }
    for (auto it = out.begin(); it != out.end(); ++it) {
        detail::verify_dense_arrays(it.value(), it.key());
    }
    return out;
}

// -------- Diff --------

// Exactly the keys whose literals differ. Both mappings must cover the
// same key set; this is the executable form of "all other parameters
// remain valid" for negative-case substitution.
inline std::set<std::string> diff(const std::vector<std::pair<std::string, Json>>& a,
                                  const std::vector<std::pair<std::string, Json>>& b) {
    std::map<std::string, const Json*> bm;
    for (const auto& [k, v] : b) bm.emplace(k, &v);
    if (a.size() != bm.size() || a.size() != b.size()) {
        fail(ErrorCode::KeySetMismatch, "mappings have different key sets");
    }
    std::set<std::string> changed;
    for (const auto& [k, v] : a) {
        auto it = bm.find(k);
        if (it == bm.end()) fail(ErrorCode::KeySetMismatch, "key '" + k + "' missing from second mapping");
        if (*it->second != v) changed.insert(k);
    }
    return changed;
}

}  // namespace restsuite
