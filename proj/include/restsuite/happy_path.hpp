#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "restsuite/common.hpp"
#include "restsuite/llm.hpp"
#include "restsuite/oas.hpp"
#include "restsuite/prompts.hpp"
#include "restsuite/request_engine.hpp"
#include "restsuite/trace.hpp"

namespace restsuite {

struct PlanStep {
    std::string alias;
    std::string operation_id;
};

struct OperationPlan {
    std::string target_operation_id;
    std::vector<PlanStep> steps;
    std::string usage_guide;

    Json to_json() const {
        Json steps_json = Json::array();
        for (const auto& s : steps) {
            Json j;
            j["alias"] = s.alias;
            j["operation_id"] = s.operation_id;
            steps_json.push_back(std::move(j));
        }
        Json j;
        j["target_operation_id"] = target_operation_id;
        j["steps"] = std::move(steps_json);
        j["usage_guide"] = usage_guide;
        return j;
    }

    static OperationPlan from_json(const Json& j) {
        OperationPlan plan;
        plan.target_operation_id = j.at("target_operation_id").get<std::string>();
        for (const auto& s : j.at("steps")) {
            plan.steps.push_back({s.at("alias").get<std::string>(),
                                  s.at("operation_id").get<std::string>()});
        }
        plan.usage_guide = j.value("usage_guide", std::string{});
        return plan;
    }
};

struct ValueAssignment {
    std::string step_alias;
    std::vector<std::pair<std::string, TraceValue>> entries;

    Json to_json_entries() const {
        Json arr = Json::array();
        for (const auto& [key, value] : entries) {
            Json j;
            j["key"] = key;
            if (value.kind == TraceValue::Kind::Generated) {
                j["kind"] = "generated";
                j["value"] = value.literal;
            } else {
                j["kind"] = "dependent";
                j["ref"] = value.ref;
            }
            arr.push_back(std::move(j));
        }
        return arr;
    }
};

struct HappyPathConfig {
    int max_retries_per_step = 3;
    size_t max_sequence_len = 8;
    size_t summary_budget = 4000;
    size_t flatten_cap = kDefaultFlattenCap;
    // Response headers enter the trace only when named here (on demand).
    std::vector<std::string> capture_response_headers;
};

struct StepExchange {
    std::string alias;
    int attempt = 0;  // 1-based
    HttpExchange exchange;
};

struct HappyPath {
    OperationPlan plan;
    ExecutionTrace trace;  // frozen
    std::vector<StepExchange> exchanges;
    std::vector<int> attempts_per_step;

    const std::string& final_alias() const { return plan.steps.back().alias; }

    // Request-side entries (tagged) in trace order, the seed of every test case.
    std::vector<std::pair<std::string, TraceValue>> request_entries() const {
        std::vector<std::pair<std::string, TraceValue>> out;
        for (const auto& e : trace.entries()) {
            TraceKey key = parse_trace_key(e.key);
            if (key.direction == Direction::Request) out.emplace_back(e.key, e.value);
        }
        return out;
    }
};

struct HappyPathFailure {
    enum class Kind { StepExhausted, ServerErrorDuringGeneration, TransportError, ValuesFailed };

    Kind kind = Kind::StepExhausted;
    std::string step_alias;
    std::string operation_id;
    int attempts = 0;
    int last_status = 0;
    std::string last_body;
    std::string message;

    const char* kind_name() const {
        switch (kind) {
            case Kind::StepExhausted: return "StepExhausted";
            case Kind::ServerErrorDuringGeneration: return "ServerErrorDuringGeneration";
            case Kind::TransportError: return "TransportError";
            case Kind::ValuesFailed: return "ValuesFailed";
        }
        return "?";
    }

    Json to_json() const {
        Json j;
        j["kind"] = kind_name();
        j["step_alias"] = step_alias;
        j["operation_id"] = operation_id;
        j["attempts"] = attempts;
        if (last_status) j["last_status"] = last_status;
        if (!last_body.empty()) j["last_body"] = last_body;
        j["message"] = message;
        return j;
    }
};

struct HappyPathOutcome {
    std::optional<HappyPath> path;
    std::optional<HappyPathFailure> failure;
    std::vector<StepExchange> exchanges;  // everything sent, including failed attempts

    bool ok() const { return path.has_value(); }
};

// -------- Plan validation / construction --------

namespace detail {

inline void validate_plan(const ApiSpec& spec, const std::string& target, const OperationPlan& plan,
                          size_t max_sequence_len, bool from_override) {
    const ErrorCode code = ErrorCode::PlanInvalid;
    if (plan.steps.empty()) fail(code, "plan has no steps");
    if (plan.steps.size() > max_sequence_len) {
        fail(from_override ? ErrorCode::SequenceTooLong : code,
             "plan has " + std::to_string(plan.steps.size()) + " steps, limit is " +
                 std::to_string(max_sequence_len));
    }
    std::set<std::string> aliases;
    for (const auto& step : plan.steps) {
        if (!restsuite::detail::valid_segment_name(step.alias)) {
            fail(code, "step alias '" + step.alias + "' is not a valid trace alias");
        }
        if (!aliases.insert(step.alias).second) fail(code, "duplicate step alias '" + step.alias + "'");
        if (!spec.find(step.operation_id)) {
            fail(code, "plan names unknown operation '" + step.operation_id + "'");
        }
    }
    if (plan.steps.back().operation_id != target) {
        fail(code, "plan must end at the target operation '" + target + "'");
    }
}

inline std::string synthesize_alias(const std::string& operation_id, size_t index,
                                    std::set<std::string>& used) {
    std::string base = "step" + std::to_string(index + 1) + "_" + sanitize_id(operation_id);
    std::string alias = base;
    int n = 1;
    while (!used.insert(alias).second) alias = base + "_" + std::to_string(++n);
    return alias;
}

}  // namespace detail

// Builds the dependency plan for one target operation. A user-supplied
// override step list is validated and used verbatim; the model still writes
// the usage guide. Guidance text, when present, rides along in the prompt.
inline OperationPlan plan_sequence(const ApiSpec& spec, const std::string& target,
                                   const std::string& guidance,
                                   const std::vector<std::string>& override_steps,
                                   LlmGateway& gateway, const HappyPathConfig& cfg) {
    const ApiOperation* target_op = spec.find(target);
    if (!target_op) fail(ErrorCode::UnknownOperation, "no operation '" + target + "' in the spec");
    const std::string summary = operation_summary(*target_op, cfg.summary_budget);

    if (!override_steps.empty()) {
        OperationPlan plan;
        plan.target_operation_id = target;
        std::set<std::string> used;
        for (size_t i = 0; i < override_steps.size(); ++i) {
            plan.steps.push_back(
                {detail::synthesize_alias(override_steps[i], i, used), override_steps[i]});
        }
        detail::validate_plan(spec, target, plan, cfg.max_sequence_len, /*from_override=*/true);

        StructuredRequest req;
        req.purpose = Purpose::Plan;
        req.output_schema = prompts::plan_output_schema();
        req.messages = prompts::plan_messages(spec, *target_op, summary, guidance, override_steps,
                                              cfg.max_sequence_len);
        auto [value, usage] = gateway.complete_structured(req);
        (void)usage;
        plan.usage_guide = value["usage_guide"].get<std::string>();
        return plan;
    }

    StructuredRequest req;
    req.purpose = Purpose::Plan;
    req.output_schema = prompts::plan_output_schema();
    req.messages = prompts::plan_messages(spec, *target_op, summary, guidance, {}, cfg.max_sequence_len);

    auto semantic = [&](const Json& value) -> std::optional<std::string> {
        OperationPlan candidate;
        candidate.target_operation_id = target;
        for (const auto& s : value["steps"]) {
            candidate.steps.push_back(
                {s["alias"].get<std::string>(), s["operation_id"].get<std::string>()});
        }
        try {
            detail::validate_plan(spec, target, candidate, cfg.max_sequence_len, false);
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::nullopt;
    };

    Json value;
    try {
        value = gateway.complete_structured(req, semantic).first;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedAfterRetries) {
            fail(ErrorCode::PlanInvalid, std::string("no valid plan: ") + e.what());
        }
        throw;
    }
    OperationPlan plan;
    plan.target_operation_id = target;
    for (const auto& s : value["steps"]) {
        plan.steps.push_back({s["alias"].get<std::string>(), s["operation_id"].get<std::string>()});
    }
    plan.usage_guide = value["usage_guide"].get<std::string>();
    return plan;
}

// -------- Value assignment --------

namespace detail {

inline std::optional<std::string> check_assignment(const ApiOperation& op,
                                                   const std::string& step_alias,
                                                   const ExecutionTrace& trace,
                                                   const ValueAssignment& assignment) {
    std::set<std::string> seen;
    for (const auto& [text, value] : assignment.entries) {
        TraceKey key;
        try {
            key = parse_trace_key(text);
        } catch (const Error& e) {
            return std::string(e.what());
        }
        if (key.alias != step_alias) {
            return "entry '" + text + "' does not belong to step '" + step_alias + "'";
        }
        if (key.direction != Direction::Request) {
            return "entry '" + text + "' must be a request key";
        }
        if (!seen.insert(text).second) return "entry '" + text + "' appears twice";
        if (value.kind == TraceValue::Kind::Dependent) {
            if (!trace.contains(value.ref)) {
                return "entry '" + text + "' references '" + value.ref + "' which is not in the trace";
            }
        } else {
            if (!is_scalar_literal(value.literal)) {
                return "entry '" + text + "' must carry a JSON scalar value";
            }
            if (is_absent(value.literal)) {
                return "entry '" + text + "' uses the ABSENT marker; omit the entry instead";
            }
        }
        if (key.location == Location::Path) {
            if (key.segments.size() != 1 || key.segments[0].is_index) {
                return "path entry '" + text + "' must name exactly one parameter";
            }
            if (!op.find_parameter(key.segments[0].name, Location::Path)) {
                return "operation has no path parameter '" + key.segments[0].name + "'";
            }
        }
    }
    auto covered = [&](Location loc, const std::string& name) {
        for (const auto& [text, value] : assignment.entries) {
            (void)value;
            TraceKey key = parse_trace_key(text);
            if (key.location == loc && !key.segments.empty() && !key.segments[0].is_index &&
                key.segments[0].name == name) {
                return true;
            }
        }
        return false;
    };
    for (const auto& p : op.parameters) {
        if (!p.required) continue;
        if (!covered(p.location, p.name)) {
            return "required " + std::string(location_name(p.location)) + " parameter '" + p.name +
                   "' is not assigned";
        }
    }
    if (op.request_body_schema && op.body_required) {
        for (const auto& required : op.request_body_schema->required_properties) {
            bool found = false;
            for (const auto& [text, value] : assignment.entries) {
                (void)value;
                TraceKey key = parse_trace_key(text);
                if (key.location == Location::Body && !key.segments.empty() &&
                    !key.segments[0].is_index && key.segments[0].name == required) {
                    found = true;
                    break;
                }
            }
            if (!found) return "required body property '" + required + "' is not assigned";
        }
    }
    return std::nullopt;
}

inline ValueAssignment parse_assignment(const Json& value, const std::string& step_alias) {
    ValueAssignment assignment;
    assignment.step_alias = step_alias;
    for (const auto& entry : value["entries"]) {
        const std::string key = entry["key"].get<std::string>();
        const std::string kind = entry["kind"].get<std::string>();
        if (kind == "generated") {
            assignment.entries.emplace_back(
                key, TraceValue::generated(entry.contains("value") ? entry["value"] : Json()));
        } else {
            assignment.entries.emplace_back(
                key, TraceValue::dependent(entry.value("ref", std::string{})));
        }
    }
    return assignment;
}

}  // namespace detail

// Generates values for one step. When a previous attempt was rejected by the
// service, the verbatim error body and the previous entries ride along in
// the re-prompt.
inline ValueAssignment generate_step_values(const ApiOperation& op, const std::string& step_alias,
                                            const std::string& usage_guide,
                                            const ExecutionTrace& trace, const std::string& guidance,
                                            const std::optional<prompts::PriorError>& prior_error,
                                            LlmGateway& gateway, const HappyPathConfig& cfg) {
    StructuredRequest req;
    req.purpose = Purpose::Values;
    req.output_schema = prompts::values_output_schema();
    req.messages = prompts::values_messages(op, operation_summary(op, cfg.summary_budget),
                                            usage_guide, trace, step_alias, guidance, prior_error);
    auto semantic = [&](const Json& value) -> std::optional<std::string> {
        ValueAssignment candidate = detail::parse_assignment(value, step_alias);
        return detail::check_assignment(op, step_alias, trace, candidate);
    };
    Json value;
    try {
        value = gateway.complete_structured(req, semantic).first;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedAfterRetries) {
            fail(ErrorCode::AssignmentInvalid, std::string("no valid assignment: ") + e.what());
        }
        throw;
    }
    return detail::parse_assignment(value, step_alias);
}

// -------- Building the happy path --------

namespace detail {

inline std::vector<std::pair<std::string, Json>> resolve_assignment(const ExecutionTrace& trace,
                                                                    const ValueAssignment& assignment) {
    std::vector<std::pair<std::string, Json>> resolved;
    resolved.reserve(assignment.entries.size());
    for (const auto& [key, value] : assignment.entries) {
        if (value.kind == TraceValue::Kind::Generated) {
            resolved.emplace_back(key, value.literal);
        } else {
            resolved.emplace_back(key, trace.resolve(value.ref));
        }
    }
    return resolved;
}

}  // namespace detail

// Runs the plan step by step: generate values, send, retry on 4xx with the
// error fed back, and fold each 2xx exchange into the trace before the next
// step. Any 5xx aborts the build and is reported as a discovered server
// error by the caller.
inline HappyPathOutcome build_happy_path(const ApiSpec& spec, const OperationPlan& plan,
                                         const std::string& base_url, const std::string& guidance,
                                         RequestEngine& engine, LlmGateway& gateway,
                                         const HappyPathConfig& cfg) {
    HappyPathOutcome outcome;
    ExecutionTrace trace;
    std::vector<int> attempts_per_step;

    for (const auto& step : plan.steps) {
        const ApiOperation* op = spec.find(step.operation_id);
        if (!op) {
            fail(ErrorCode::UnknownOperation, "plan step references unknown operation '" +
                                                  step.operation_id + "'");
        }
        std::optional<prompts::PriorError> prior_error;
        bool step_done = false;
        int attempts = 0;
        for (int attempt = 1; attempt <= cfg.max_retries_per_step + 1; ++attempt) {
            attempts = attempt;
            ValueAssignment assignment;
            try {
                assignment = generate_step_values(*op, step.alias, plan.usage_guide, trace, guidance,
                                                  prior_error, gateway, cfg);
            } catch (const Error& e) {
                outcome.failure = HappyPathFailure{HappyPathFailure::Kind::ValuesFailed, step.alias,
                                                   step.operation_id, attempt, 0, "", e.what()};
                return outcome;
            }

            HttpExchange exchange;
            try {
                auto resolved = detail::resolve_assignment(trace, assignment);
                HttpRequestPlan request = render_request(*op, resolved, base_url);
                exchange = engine.execute(request);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::TransportError) {
                    outcome.failure = HappyPathFailure{HappyPathFailure::Kind::TransportError,
                                                       step.alias, step.operation_id, attempt, 0, "",
                                                       e.what()};
                    return outcome;
                }
                // Rendering rejected the assignment (missing value, bad body);
                // feed the problem back like a client error.
                prior_error = prompts::PriorError{0, e.what(), assignment.to_json_entries()};
                continue;
            }
            outcome.exchanges.push_back({step.alias, attempt, exchange});

            if (status_is_5xx(exchange.status)) {
                outcome.failure = HappyPathFailure{
                    HappyPathFailure::Kind::ServerErrorDuringGeneration, step.alias,
                    step.operation_id, attempt, exchange.status, exchange.response_body,
                    "server error during happy path construction"};
                return outcome;
            }
            if (status_is_2xx(exchange.status)) {
                for (auto& [key, value] : assignment.entries) {
                    trace.insert(key, value);
                }
                Json response_payload = Json::object();
                if (!exchange.response_body.empty()) {
                    Json body = Json();
                    try {
                        body = Json::parse(exchange.response_body);
                        response_payload["body"] = body;
                    } catch (const Json::parse_error&) {
                        // Non-JSON bodies stay out of the trace; the raw text
                        // is still preserved on the exchange.
                    }
                }
                if (!cfg.capture_response_headers.empty()) {
                    Json headers = Json::object();
                    for (const auto& name : cfg.capture_response_headers) {
                        if (auto v = exchange.response_header(name)) headers[name] = *v;
                    }
                    if (!headers.empty()) response_payload["header"] = headers;
                }
                response_payload["status"] = exchange.status;
                FlattenResult flat = flatten(step.alias, Direction::Response, response_payload,
                                             cfg.flatten_cap);
                for (auto& [key, literal] : flat.pairs) {
                    trace.insert(key, TraceValue::generated(literal));
                }
                if (flat.truncated()) trace.record_truncation(flat.truncated_at);
                step_done = true;
                break;
            }
            // 3xx and 4xx: retry with the response as error feedback.
            prior_error = prompts::PriorError{exchange.status, exchange.response_body,
                                              assignment.to_json_entries()};
        }
        if (!step_done) {
            outcome.failure = HappyPathFailure{HappyPathFailure::Kind::StepExhausted, step.alias,
                                               step.operation_id, attempts,
                                               prior_error ? prior_error->status : 0,
                                               prior_error ? prior_error->response_body : "",
                                               "step kept failing after " + std::to_string(attempts) +
                                                   " attempt(s)"};
            return outcome;
        }
        attempts_per_step.push_back(attempts);
    }

    trace.freeze();
    // Post-build assertion: every dependent value must resolve.
    (void)trace.resolve_all();

    HappyPath path;
    path.plan = plan;
    path.trace = std::move(trace);
    path.exchanges = outcome.exchanges;
    path.attempts_per_step = std::move(attempts_per_step);
    outcome.path = std::move(path);
    return outcome;
}

}  // namespace restsuite
