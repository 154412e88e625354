#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "restsuite/common.hpp"
#include "restsuite/happy_path.hpp"
#include "restsuite/llm.hpp"
#include "restsuite/oas.hpp"
#include "restsuite/prompts.hpp"
#include "restsuite/schema_check.hpp"
#include "restsuite/trace.hpp"

namespace restsuite {

enum class ScenarioKind { Structural, Functional };

inline const char* scenario_kind_name(ScenarioKind k) {
    return k == ScenarioKind::Structural ? "structural" : "functional";
}

struct TestScenario {
    std::string name;  // carries _ST or _FN suffix
    ScenarioKind kind = ScenarioKind::Structural;
    std::string description;
    std::set<std::string> target_keys;  // within the final step's request
    std::string expected_status_class = "4xx";
    // Structural scenarios cite the constraint they break.
    std::string constraint_locator;
    ConstraintKind constraint_kind = ConstraintKind::Type;

    Json to_json() const {
        Json j;
        j["name"] = name;
        j["kind"] = scenario_kind_name(kind);
        j["description"] = description;
        j["target_keys"] = std::vector<std::string>(target_keys.begin(), target_keys.end());
        j["expected_status_class"] = expected_status_class;
        if (kind == ScenarioKind::Structural) {
            j["constraint_locator"] = constraint_locator;
            j["constraint_kind"] = constraint_kind_name(constraint_kind);
        }
        return j;
    }
};

struct InvalidValueSet {
    std::string scenario_name;
    std::vector<std::pair<std::string, Json>> overrides;  // keys == scenario target_keys

    std::set<std::string> key_set() const {
        std::set<std::string> keys;
        for (const auto& [k, v] : overrides) {
            (void)v;
            keys.insert(k);
        }
        return keys;
    }
};

struct NegativeBudget {
    size_t max_structural = 10;
    size_t max_functional = 10;
};

// Maps a final-step request key to its constraint-catalog locator:
// body keys keep their dotted path (indices collapse to "[]"), the other
// locations resolve to the parameter name.
inline std::string locator_for_key(const TraceKey& key) {
    if (key.location == Location::Body) {
        std::string locator = "body";
        for (const auto& seg : key.segments) {
            locator += seg.is_index ? "[]" : "." + seg.name;
        }
        return locator;
    }
    if (!key.segments.empty() && !key.segments[0].is_index) return key.segments[0].name;
    return {};
}

struct ScenarioGeneration {
    std::vector<TestScenario> scenarios;
    std::vector<std::string> dropped;  // human-readable reasons, for the log
};

namespace detail {

inline std::string ensure_suffix(std::string name, ScenarioKind kind) {
    const std::string want = kind == ScenarioKind::Structural ? "_ST" : "_FN";
    const std::string other = kind == ScenarioKind::Structural ? "_FN" : "_ST";
    if (name.size() >= 3 && name.substr(name.size() - 3) == other) {
        name.resize(name.size() - 3);
    }
    if (name.size() < 3 || name.substr(name.size() - 3) != want) name += want;
    return name;
}

inline std::string render_catalog(const ConstraintCatalog& catalog) {
    if (catalog.entries.empty()) return "(no declared constraints)\n";
    std::string out;
    for (const auto& e : catalog.entries) {
        out += "- locator: " + e.locator + ", kind: " + constraint_kind_name(e.kind);
        if (!e.payload.is_null()) out += ", detail: " + e.payload.dump();
        out += "\n";
    }
    return out;
}

}  // namespace detail

// Asks the model for negative scenarios against the frozen happy path and
// keeps only proposals that survive validation; everything dropped is
// reported with a reason. An empty result is not an error: the suite then
// carries only the happy-path case.
inline ScenarioGeneration generate_scenarios(const ApiOperation& target_op, const HappyPath& happy,
                                             const ConstraintCatalog& catalog, bool want_structural,
                                             bool want_functional, const NegativeBudget& budget,
                                             LlmGateway& gateway, const HappyPathConfig& cfg) {
    ScenarioGeneration result;
    if (!want_structural && !want_functional) return result;

    const std::string final_alias = happy.final_alias();
    std::vector<std::pair<std::string, Json>> final_request_values;
    std::set<std::string> final_request_keys;
    for (const auto& [key, literal] : happy.trace.resolve_all()) {
        TraceKey parsed = parse_trace_key(key);
        if (parsed.alias == final_alias && parsed.direction == Direction::Request) {
            final_request_values.emplace_back(key, literal);
            final_request_keys.insert(key);
        }
    }

    StructuredRequest req;
    req.purpose = Purpose::Scenarios;
    req.output_schema = prompts::scenarios_output_schema();
    req.messages = prompts::scenarios_messages(
        target_op, operation_summary(target_op, cfg.summary_budget), detail::render_catalog(catalog),
        final_request_values, want_structural, want_functional,
        std::max(budget.max_structural, budget.max_functional));

    Json value = gateway.complete_structured(req).first;

    size_t structural_count = 0, functional_count = 0;
    std::set<std::string> used_names;
    for (const auto& proposal : value["scenarios"]) {
        const std::string raw_name = proposal["name"].get<std::string>();
        auto drop = [&](const std::string& why) {
            result.dropped.push_back("scenario '" + raw_name + "': " + why);
        };

        TestScenario scenario;
        const std::string kind_text = proposal["kind"].get<std::string>();
        if (kind_text == "structural") {
            scenario.kind = ScenarioKind::Structural;
        } else if (kind_text == "functional") {
            scenario.kind = ScenarioKind::Functional;
        } else {
            drop("unknown kind '" + kind_text + "'");
            continue;
        }
        if (scenario.kind == ScenarioKind::Structural && !want_structural) {
            drop("structural scenarios were not requested");
            continue;
        }
        if (scenario.kind == ScenarioKind::Functional && !want_functional) {
            drop("functional scenarios were not requested");
            continue;
        }
        scenario.name = detail::ensure_suffix(raw_name, scenario.kind);
        scenario.description = proposal["description"].get<std::string>();

        bool keys_ok = true;
        for (const auto& k : proposal["target_keys"]) {
            const std::string key_text = k.get<std::string>();
            if (!final_request_keys.count(key_text)) {
                drop("target key '" + key_text + "' is not a request key of the final step");
                keys_ok = false;
                break;
            }
            scenario.target_keys.insert(key_text);
        }
        if (!keys_ok) continue;
        if (scenario.target_keys.empty()) {
            drop("no target keys");
            continue;
        }

        if (scenario.kind == ScenarioKind::Structural) {
            if (scenario.target_keys.size() != 1) {
                drop("structural scenarios must target exactly one key");
                continue;
            }
            if (!proposal.contains("constraint_locator") || !proposal.contains("constraint_kind")) {
                drop("structural scenario must cite a constraint");
                continue;
            }
            scenario.constraint_locator = proposal["constraint_locator"].get<std::string>();
            auto kind = constraint_kind_from(proposal["constraint_kind"].get<std::string>());
            if (!kind) {
                drop("unknown constraint kind '" + proposal["constraint_kind"].get<std::string>() + "'");
                continue;
            }
            scenario.constraint_kind = *kind;
            const ConstraintEntry* entry = catalog.find(scenario.constraint_locator, *kind);
            if (!entry) {
                drop("cited constraint (" + scenario.constraint_locator + ", " +
                     constraint_kind_name(*kind) + ") is not in the catalog");
                continue;
            }
            TraceKey target = parse_trace_key(*scenario.target_keys.begin());
            if (locator_for_key(target) != scenario.constraint_locator) {
                drop("target key does not address the cited constraint's position");
                continue;
            }
            if (*kind == ConstraintKind::Required && target.location == Location::Path) {
                drop("a path segment cannot be omitted");
                continue;
            }
            const SchemaNode* node = locate_schema(target_op, scenario.constraint_locator);
            if (!node) {
                drop("constraint locator does not resolve to a schema position");
                continue;
            }
            if (!constraint_is_checkable(*node, *kind)) {
                drop("constraint is not mechanically checkable");
                continue;
            }
        }

        if (!used_names.insert(scenario.name).second) {
            drop("duplicate scenario name after normalization");
            continue;
        }
        size_t& count = scenario.kind == ScenarioKind::Structural ? structural_count : functional_count;
        const size_t limit = scenario.kind == ScenarioKind::Structural ? budget.max_structural
                                                                       : budget.max_functional;
        if (count >= limit) {
            drop("over the per-kind scenario budget");
            continue;
        }
        ++count;
        result.scenarios.push_back(std::move(scenario));
    }
    return result;
}

// Asks the model for the invalid replacement values of one scenario.
// Structural overrides are mechanically verified to violate the cited
// constraint; the happy value must satisfy what the override breaks.
inline InvalidValueSet generate_invalid_values(const TestScenario& scenario,
                                               const ApiOperation& target_op, const HappyPath& happy,
                                               LlmGateway& gateway) {
    std::vector<std::pair<std::string, Json>> happy_at_targets;
    for (const auto& key : scenario.target_keys) {
        happy_at_targets.emplace_back(key, happy.trace.resolve(key));
    }

    std::string constraint_rendering;
    const SchemaNode* node = nullptr;
    if (scenario.kind == ScenarioKind::Structural) {
        node = locate_schema(target_op, scenario.constraint_locator);
        if (!node) {
            fail(ErrorCode::ConstraintNotViolated,
                 "scenario '" + scenario.name + "' cites an unlocatable constraint");
        }
        constraint_rendering = std::string(constraint_kind_name(scenario.constraint_kind)) +
                               " constraint at " + scenario.constraint_locator + " (schema: " +
                               detail::schema_type_line(*node) + ")";
    }

    StructuredRequest req;
    req.purpose = Purpose::InvalidValues;
    req.output_schema = prompts::invalid_values_output_schema();
    req.messages = prompts::invalid_values_messages(scenario.name, scenario.description,
                                                    constraint_rendering, happy_at_targets);

    bool constraint_rejected = false;
    auto semantic = [&](const Json& value) -> std::optional<std::string> {
        const Json& overrides = value["overrides"];
        std::set<std::string> provided;
        for (auto it = overrides.begin(); it != overrides.end(); ++it) provided.insert(it.key());
        if (provided != scenario.target_keys) {
            return "overrides must cover exactly the target keys of the scenario";
        }
        for (auto it = overrides.begin(); it != overrides.end(); ++it) {
            if (!is_scalar_literal(it.value())) {
                return "override for '" + it.key() + "' must be a JSON scalar";
            }
            const Json current = happy.trace.resolve(it.key());
            if (current == it.value()) {
                return "override for '" + it.key() + "' equals the current value; it must differ";
            }
        }
        if (scenario.kind == ScenarioKind::Structural) {
            const Json& override_value = overrides.begin().value();
            if (scenario.constraint_kind == ConstraintKind::Required) {
                if (!is_absent(override_value)) {
                    constraint_rejected = true;
                    return "a Required violation must use the \"<<ABSENT>>\" marker";
                }
            } else {
                if (is_absent(override_value)) {
                    constraint_rejected = true;
                    return "only Required violations may use the \"<<ABSENT>>\" marker";
                }
                if (!violates(override_value, *node, scenario.constraint_kind)) {
                    constraint_rejected = true;
                    return "the override still satisfies the cited " +
                           std::string(constraint_kind_name(scenario.constraint_kind)) +
                           " constraint; produce a value that violates it";
                }
            }
        }
        return std::nullopt;
    };

    Json value;
    try {
        value = gateway.complete_structured(req, semantic).first;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedAfterRetries && constraint_rejected) {
            fail(ErrorCode::ConstraintNotViolated,
                 "scenario '" + scenario.name + "': " + e.what());
        }
        throw;
    }

    InvalidValueSet out;
    out.scenario_name = scenario.name;
    // Keep the deterministic set order of target keys.
    for (const auto& key : scenario.target_keys) {
        out.overrides.emplace_back(key, value["overrides"][key]);
    }
    return out;
}

// Replaces the valid values at exactly the override keys, leaving every
// other value untouched: diff(happy, result) == override key set.
inline std::vector<std::pair<std::string, Json>> substitute(
    const std::vector<std::pair<std::string, Json>>& happy_values, const InvalidValueSet& invalid) {
    std::map<std::string, const Json*> overrides;
    for (const auto& [k, v] : invalid.overrides) overrides.emplace(k, &v);
    std::set<std::string> remaining = invalid.key_set();

    std::vector<std::pair<std::string, Json>> out;
    out.reserve(happy_values.size());
    for (const auto& [key, literal] : happy_values) {
        auto it = overrides.find(key);
        if (it == overrides.end()) {
            out.emplace_back(key, literal);
        } else {
            out.emplace_back(key, *it->second);
            remaining.erase(key);
        }
    }
    if (!remaining.empty()) {
        fail(ErrorCode::UnknownKey,
             "override key '" + *remaining.begin() + "' is not part of the happy value mapping");
    }
    return out;
}

// Tagged-value variant used by the test builder: the override replaces the
// original entry (literal or reference) with a generated invalid literal at
// the final-step request position.
inline std::vector<std::pair<std::string, TraceValue>> apply_overrides(
    const std::vector<std::pair<std::string, TraceValue>>& entries, const InvalidValueSet& invalid) {
    std::map<std::string, const Json*> overrides;
    for (const auto& [k, v] : invalid.overrides) overrides.emplace(k, &v);
    std::set<std::string> remaining = invalid.key_set();

    std::vector<std::pair<std::string, TraceValue>> out;
    out.reserve(entries.size());
    for (const auto& [key, value] : entries) {
        auto it = overrides.find(key);
        if (it == overrides.end()) {
            out.emplace_back(key, value);
        } else {
            out.emplace_back(key, TraceValue::generated(*it->second));
            remaining.erase(key);
        }
    }
    if (!remaining.empty()) {
        fail(ErrorCode::UnknownKey,
             "override key '" + *remaining.begin() + "' is not a request entry of the happy path");
    }
    return out;
}

}  // namespace restsuite
