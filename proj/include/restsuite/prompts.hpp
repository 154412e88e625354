#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "restsuite/common.hpp"
#include "restsuite/llm.hpp"
#include "restsuite/oas.hpp"
#include "restsuite/trace.hpp"

// Prompt templates used for the four structured model calls. The README
// documents them; tests replace the model with a scripted provider, so the
// exact wording only matters for live runs.

namespace restsuite::prompts {

inline std::string render_operation_index(const ApiSpec& spec) {
    std::string out;
    for (const auto& op : spec.operations) {
        out += "- " + op.id + ": " + op.method + " " + op.path_template;
        if (!op.description.empty()) out += " -- " + op.description;
        out += "\n";
    }
    return out;
}

inline std::string render_trace(const ExecutionTrace& trace) {
    if (trace.empty()) return "(empty)\n";
    std::string out;
    for (const auto& entry : trace.entries()) {
        out += entry.key;
        if (entry.value.kind == TraceValue::Kind::Generated) {
            out += " = " + entry.value.literal.dump() + " (GENERATED)\n";
        } else {
            out += " -> " + entry.value.ref + " (DEPENDENT, resolves to " +
                   trace.resolve(entry.key).dump() + ")\n";
        }
    }
    return out;
}

// ---- step ①: operation sequence + usage guide ----

inline Json plan_output_schema() {
    return Json::parse(R"({
      "type": "object",
      "required": ["steps", "usage_guide"],
      "properties": {
        "steps": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["alias", "operation_id"],
            "properties": {
              "alias": {"type": "string"},
              "operation_id": {"type": "string"}
            }
          }
        },
        "usage_guide": {"type": "string"}
      }
    })");
}

inline std::vector<ChatMessage> plan_messages(const ApiSpec& spec, const ApiOperation& target,
                                              const std::string& target_summary,
                                              const std::string& guidance,
                                              const std::vector<std::string>& fixed_steps,
                                              size_t max_sequence_len) {
    std::vector<ChatMessage> messages;
    messages.emplace_back(
        ChatMessage::Role::System,
        "You plan REST API call sequences. Given an API and a target operation, list the "
        "operations that must be called, in order, so that a valid request for the target "
        "operation can be made. The target operation is always the last step. Use existing "
        "resources only through earlier steps. Reply with ONLY a JSON object of the form "
        "{\"steps\": [{\"alias\": string, \"operation_id\": string}], \"usage_guide\": string}. "
        "Aliases are short unique lowerCamelCase names. The usage_guide explains, in plain "
        "language, how later steps should derive parameter values from earlier responses.");
    std::string user;
    user += "API operations:\n" + render_operation_index(spec);
    user += "\nTarget operation:\n" + target_summary;
    user += "\nAt most " + std::to_string(max_sequence_len) + " steps.\n";
    if (!fixed_steps.empty()) {
        user += "\nThe step sequence is fixed by the user; use exactly these operation_ids in "
                "this order and still write the usage_guide:\n";
        for (const auto& id : fixed_steps) user += "- " + id + "\n";
    }
    if (!guidance.empty()) {
        user += "\nAdditional user guidance (authoritative; may contain credentials or "
                "pre-configured identifiers):\n" + guidance + "\n";
    }
    (void)target;
    messages.emplace_back(ChatMessage::Role::User, user);
    return messages;
}

// ---- step ②: parameter values for one step ----

inline Json values_output_schema() {
    return Json::parse(R"({
      "type": "object",
      "required": ["entries"],
      "properties": {
        "entries": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["key", "kind"],
            "properties": {
              "key": {"type": "string"},
              "kind": {"type": "string", "enum": ["generated", "dependent"]},
              "ref": {"type": "string"}
            }
          }
        }
      }
    })");
}

struct PriorError {
    int status = 0;
    std::string response_body;
    Json previous_entries;  // the rejected assignment, echoed verbatim
};

inline std::vector<ChatMessage> values_messages(const ApiOperation& op, const std::string& op_summary,
                                                const std::string& usage_guide,
                                                const ExecutionTrace& trace,
                                                const std::string& step_alias,
                                                const std::string& guidance,
                                                const std::optional<PriorError>& prior_error) {
    std::vector<ChatMessage> messages;
    messages.emplace_back(
        ChatMessage::Role::System,
        "You generate valid parameter values for one REST request. Values are reported as "
        "key/value entries. Keys follow the grammar "
        "<step_alias>.request.<body|path|query|header|cookie> followed by '.field' for object "
        "fields and '[i]' for array elements. Each entry is either "
        "{\"key\": k, \"kind\": \"generated\", \"value\": <JSON scalar>} for a new value, or "
        "{\"key\": k, \"kind\": \"dependent\", \"ref\": <existing trace key>} to reuse a value "
        "recorded in the execution trace. Prefer dependent entries whenever the value must match "
        "an earlier response (identifiers, foreign keys). Cover every required parameter and "
        "required body property. Reply with ONLY a JSON object {\"entries\": [...]}.");
    std::string user;
    user += "Step alias: " + step_alias + "\n";
    user += "Operation under this step:\n" + op_summary + "\n";
    if (!usage_guide.empty()) user += "Usage guide:\n" + usage_guide + "\n";
    user += "Execution trace so far:\n" + render_trace(trace);
    if (!guidance.empty()) user += "\nUser guidance:\n" + guidance + "\n";
    if (prior_error) {
        user += "\nThe previous attempt was rejected by the service with HTTP " +
                std::to_string(prior_error->status) + " and this response body:\n" +
                prior_error->response_body + "\nPrevious entries:\n" +
                prior_error->previous_entries.dump() +
                "\nGenerate corrected entries that fix the reported problem.\n";
    }
    (void)op;
    messages.emplace_back(ChatMessage::Role::User, user);
    return messages;
}

// ---- step ④a/④b: negative test scenarios ----

inline Json scenarios_output_schema() {
    return Json::parse(R"({
      "type": "object",
      "required": ["scenarios"],
      "properties": {
        "scenarios": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["name", "kind", "description", "target_keys"],
            "properties": {
              "name": {"type": "string"},
              "kind": {"type": "string", "enum": ["structural", "functional"]},
              "description": {"type": "string"},
              "target_keys": {"type": "array", "items": {"type": "string"}},
              "constraint_locator": {"type": "string"},
              "constraint_kind": {"type": "string"}
            }
          }
        }
      }
    })");
}

inline std::vector<ChatMessage> scenarios_messages(
    const ApiOperation& op, const std::string& op_summary, const std::string& catalog_rendering,
    const std::vector<std::pair<std::string, Json>>& final_request_values, bool want_structural,
    bool want_functional, size_t budget_per_kind) {
    std::vector<ChatMessage> messages;
    messages.emplace_back(
        ChatMessage::Role::System,
        "You design negative test scenarios for one REST operation. A scenario names request "
        "values that, when replaced by invalid ones, must make the service answer with a 4xx "
        "client error. Two kinds exist:\n"
        "- structural: violates a declared schema constraint; cite it via constraint_locator and "
        "constraint_kind taken verbatim from the provided constraint catalog; target exactly one "
        "key; name ends in _ST.\n"
        "- functional: violates business logic that the schema cannot express (for example "
        "ordering rules between dates); name ends in _FN.\n"
        "target_keys must be keys of the shown request. Do not target path parameters with "
        "Required violations (a path segment cannot be omitted). Reply with ONLY a JSON object "
        "{\"scenarios\": [{\"name\", \"kind\", \"description\", \"target_keys\", "
        "\"constraint_locator\"?, \"constraint_kind\"?}]}.");
    std::string user;
    user += "Operation under test:\n" + op_summary + "\n";
    user += "Happy-path request values of the final step:\n";
    for (const auto& [k, v] : final_request_values) user += "- " + k + " = " + v.dump() + "\n";
    user += "\nConstraint catalog:\n" + catalog_rendering;
    user += "\nProduce ";
    if (want_structural) user += "up to " + std::to_string(budget_per_kind) + " structural";
    if (want_structural && want_functional) user += " and ";
    if (want_functional) user += "up to " + std::to_string(budget_per_kind) + " functional";
    user += " scenarios.\n";
    (void)op;
    messages.emplace_back(ChatMessage::Role::User, user);
    return messages;
}

// ---- step ④ continued: invalid values for one scenario ----

inline Json invalid_values_output_schema() {
    return Json::parse(R"({
      "type": "object",
      "required": ["overrides"],
      "properties": {
        "overrides": {"type": "object"}
      }
    })");
}

inline std::vector<ChatMessage> invalid_values_messages(
    const std::string& scenario_name, const std::string& scenario_description,
    const std::string& constraint_rendering,
    const std::vector<std::pair<std::string, Json>>& happy_values_at_targets) {
    std::vector<ChatMessage> messages;
    messages.emplace_back(
        ChatMessage::Role::System,
        "You produce invalid parameter values for one negative test scenario. For every target "
        "key, reply with a replacement value that realizes the scenario while every other "
        "request value stays untouched. To omit a parameter or property entirely, use the exact "
        "string \"<<ABSENT>>\" as the value. Replacements must differ from the current values. "
        "Reply with ONLY a JSON object {\"overrides\": {<target key>: <invalid value>, ...}} "
        "covering exactly the target keys.");
    std::string user;
    user += "Scenario: " + scenario_name + "\n" + scenario_description + "\n";
    if (!constraint_rendering.empty()) user += "Violated constraint: " + constraint_rendering + "\n";
    user += "Current happy-path values:\n";
    for (const auto& [k, v] : happy_values_at_targets) user += "- " + k + " = " + v.dump() + "\n";
    messages.emplace_back(ChatMessage::Role::User, user);
    return messages;
}

}  // namespace restsuite::prompts
