#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "restsuite/common.hpp"
#include "restsuite/llm.hpp"
#include "restsuite/request_engine.hpp"
#include "restsuite/test_builder.hpp"
#include "restsuite/trace.hpp"

namespace restsuite {

enum class Verdict { Passed, Failed, ServerError, SetupFailed };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Passed: return "Passed";
        case Verdict::Failed: return "Failed";
        case Verdict::ServerError: return "ServerError";
        case Verdict::SetupFailed: return "SetupFailed";
    }
    return "?";
}

// Final-step classification. Negative kinds invert: a 2xx where a 4xx was
// expected is a missed validation, reported as Failed.
inline Verdict classify_final_status(CaseKind kind, int status) {
    if (status_is_5xx(status)) return Verdict::ServerError;
    if (kind == CaseKind::Happy) {
        return status_is_2xx(status) ? Verdict::Passed : Verdict::Failed;
    }
    return status_is_4xx(status) ? Verdict::Passed : Verdict::Failed;
}

struct StepResult {
    std::string alias;
    std::string operation_id;
    int status = 0;

    Json to_json() const {
        Json j;
        j["alias"] = alias;
        j["operation_id"] = operation_id;
        j["status"] = status;
        return j;
    }
};

struct TestOutcome {
    std::string name;
    CaseKind kind = CaseKind::Happy;
    Verdict verdict = Verdict::Passed;
    int final_status = 0;  // 0 when no final-step response exists
    std::vector<StepResult> steps;
    std::string detail;

    Json to_json() const {
        Json j;
        j["name"] = name;
        j["kind"] = case_kind_name(kind);
        j["verdict"] = verdict_name(verdict);
        j["final_status"] = final_status;
        Json steps_json = Json::array();
        for (const auto& s : steps) steps_json.push_back(s.to_json());
        j["steps"] = std::move(steps_json);
        if (!detail.empty()) j["detail"] = detail;
        return j;
    }
};

// -------- Server-error registry --------

// Any observed 5xx lands here, generation phase included. Deduplication key:
// (method, path template, sorted override key set).
class ServerErrorRegistry {
public:
    struct Record {
        std::string method;
        std::string path_template;
        std::set<std::string> override_keys;
        std::string context;  // e.g. "test case X" or "happy path for Y"
        int status = 0;

        std::string signature() const {
            std::string sig = method + " " + path_template + " |";
            for (const auto& k : override_keys) sig += " " + k;
            return sig;
        }

        Json to_json() const {
            Json j;
            j["method"] = method;
            j["path_template"] = path_template;
            j["override_keys"] = std::vector<std::string>(override_keys.begin(), override_keys.end());
            j["status"] = status;
            j["context"] = context;
            return j;
        }

        static Record from_json(const Json& j) {
            Record r;
            r.method = j.at("method").get<std::string>();
            r.path_template = j.at("path_template").get<std::string>();
            for (const auto& k : j.at("override_keys")) r.override_keys.insert(k.get<std::string>());
            r.status = j.at("status").get<int>();
            r.context = j.value("context", std::string{});
            return r;
        }
    };

    // Returns true when the signature was new.
    bool record(Record record) {
        const std::string sig = record.signature();
        if (!signatures_.insert(sig).second) return false;
        records_.push_back(std::move(record));
        return true;
    }

    size_t count() const { return records_.size(); }
    const std::vector<Record>& records() const { return records_; }

    Json to_json() const {
        Json arr = Json::array();
        for (const auto& r : records_) arr.push_back(r.to_json());
        return arr;
    }

private:
    std::set<std::string> signatures_;
    std::vector<Record> records_;
};

// -------- Executing one test case --------

struct RunnerConfig {
    std::string base_url;
    std::optional<EnvInitScript> init_script;
};

namespace detail {

inline Json substitute_vars(const Json& node, const std::map<std::string, Json>& vars) {
    if (node.is_string()) {
        const std::string& s = node.get_ref<const std::string&>();
        if (s.rfind("@@VAR:", 0) == 0 && s.size() > 8 && s.substr(s.size() - 2) == "@@") {
            const std::string name = s.substr(6, s.size() - 8);
            auto it = vars.find(name);
            if (it == vars.end()) {
                fail(ErrorCode::DanglingDependency, "variable '" + name + "' was never extracted");
            }
            return it->second;
        }
        return node;
    }
    if (node.is_object()) {
        Json out = Json::object();
        for (auto it = node.begin(); it != node.end(); ++it) {
            out[it.key()] = substitute_vars(it.value(), vars);
        }
        return out;
    }
    if (node.is_array()) {
        Json out = Json::array();
        for (const auto& item : node) out.push_back(substitute_vars(item, vars));
        return out;
    }
    return node;
}

inline std::string materialize_text(const ValueOrVar& v, const std::map<std::string, Json>& vars) {
    if (!v.is_var) return literal_to_text(v.literal);
    auto it = vars.find(v.var);
    if (it == vars.end()) {
        fail(ErrorCode::DanglingDependency, "variable '" + v.var + "' was never extracted");
    }
    return literal_to_text(it->second);
}

inline HttpRequestPlan materialize_step(const TestStep& step, const std::string& base_url,
                                        const std::map<std::string, Json>& vars) {
    HttpRequestPlan plan;
    plan.method = step.method;
    plan.base_url = base_url;
    plan.path_template = step.path_template;

    std::string rendered;
    const std::string& tmpl = step.path_template;
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            rendered += tmpl.substr(pos);
            break;
        }
        rendered += tmpl.substr(pos, open - pos);
        size_t close = tmpl.find('}', open);
        const std::string name = tmpl.substr(open + 1, close - open - 1);
        auto it = std::find_if(step.path_params.begin(), step.path_params.end(),
                               [&](const auto& kv) { return kv.first == name; });
        if (it == step.path_params.end()) {
            fail(ErrorCode::MissingRequiredValue, "no value for path parameter '" + name + "'");
        }
        rendered += percent_encode(materialize_text(it->second, vars));
        pos = close + 1;
    }
    plan.path = rendered;
    for (const auto& [name, value] : step.query) {
        plan.query.emplace_back(name, materialize_text(value, vars));
    }
    for (const auto& [name, value] : step.headers) {
        plan.headers.emplace_back(name, materialize_text(value, vars));
    }
    for (const auto& [name, value] : step.cookies) {
        plan.cookies.emplace_back(name, materialize_text(value, vars));
    }
    if (step.body) {
        plan.body = substitute_vars(*step.body, vars).dump();
    }
    return plan;
}

inline Json extract_from_exchange(const ExtractionDirective& extraction,
                                  const HttpExchange& exchange) {
    TraceKey key = parse_trace_key(extraction.source_key);
    if (key.location == Location::Status) return Json(exchange.status);
    if (key.location == Location::Header) {
        auto v = exchange.response_header(key.segments[0].name);
        if (!v) {
            fail(ErrorCode::DanglingDependency,
                 "response lacks header '" + key.segments[0].name + "'");
        }
        return Json(*v);
    }
    Json body;
    try {
        body = Json::parse(exchange.response_body);
    } catch (const Json::parse_error&) {
        fail(ErrorCode::DanglingDependency,
             "response body is not JSON; cannot extract '" + extraction.source_key + "'");
    }
    const Json* node = &body;
    for (const auto& seg : key.segments) {
        if (seg.is_index) {
            if (!node->is_array() || seg.index >= node->size()) {
                fail(ErrorCode::DanglingDependency,
                     "response lacks '" + extraction.source_key + "'");
            }
            node = &(*node)[seg.index];
        } else {
            if (!node->is_object() || !node->contains(seg.name)) {
                fail(ErrorCode::DanglingDependency,
                     "response lacks '" + extraction.source_key + "'");
            }
            node = &(*node)[seg.name];
        }
    }
    return *node;
}

}  // namespace detail

// Executes one test case: init script first, then the steps in order.
// Prerequisite failures become SetupFailed so they never masquerade as
// findings against the operation under test.
inline TestOutcome run_test_case(const TestCase& tc, RequestEngine& engine, const RunnerConfig& cfg,
                                 ServerErrorRegistry& server_errors) {
    TestOutcome outcome;
    outcome.name = tc.name;
    outcome.kind = tc.kind;

    if (cfg.init_script) {
        ScriptResult reset = run_init_script(*cfg.init_script);
        if (!reset.ok()) {
            outcome.verdict = Verdict::SetupFailed;
            outcome.detail = "environment initialization failed: " + reset.describe() +
                             (reset.output.empty() ? "" : "; output: " + reset.output);
            return outcome;
        }
    }

    std::map<std::string, Json> vars;
    for (size_t i = 0; i < tc.steps.size(); ++i) {
        const TestStep& step = tc.steps[i];
        const bool final_step = i + 1 == tc.steps.size();

        HttpExchange exchange;
        try {
            HttpRequestPlan plan = detail::materialize_step(step, cfg.base_url, vars);
            exchange = engine.execute(plan);
        } catch (const Error& e) {
            outcome.verdict = Verdict::SetupFailed;
            outcome.detail = "step '" + step.alias + "': " + e.what();
            return outcome;
        }
        outcome.steps.push_back({step.alias, step.operation_id, exchange.status});

        if (status_is_5xx(exchange.status)) {
            server_errors.record({step.method, step.path_template,
                                  final_step ? tc.target_keys : std::set<std::string>{},
                                  "test case '" + tc.name + "', step '" + step.alias + "'",
                                  exchange.status});
        }

        if (final_step) {
            outcome.final_status = exchange.status;
            outcome.verdict = classify_final_status(tc.kind, exchange.status);
            if (outcome.verdict == Verdict::Failed) {
                outcome.detail = tc.kind == CaseKind::Happy
                                     ? "expected 2xx, received " + std::to_string(exchange.status)
                                     : "expected 4xx, received " + std::to_string(exchange.status) +
                                           " (missed validation)";
            } else if (outcome.verdict == Verdict::ServerError) {
                outcome.detail = "server answered " + std::to_string(exchange.status);
            }
            return outcome;
        }

        if (!status_is_2xx(exchange.status)) {
            outcome.verdict = Verdict::SetupFailed;
            outcome.detail = "prerequisite step '" + step.alias + "' answered " +
                             std::to_string(exchange.status);
            return outcome;
        }
        try {
            for (const auto& extraction : step.extractions) {
                vars[extraction.variable] = detail::extract_from_exchange(extraction, exchange);
            }
        } catch (const Error& e) {
            outcome.verdict = Verdict::SetupFailed;
            outcome.detail = "step '" + step.alias + "': " + e.what();
            return outcome;
        }
    }
    return outcome;  // unreachable for non-empty cases
}

// -------- Whole-run report --------

struct GenerationRecord {
    std::vector<std::string> covered;  // operations with a working happy path
    std::vector<std::pair<std::string, std::string>> uncovered;  // (operation, reason)
    // 5xx responses observed while constructing happy paths; they persist in
    // the workspace so re-runs keep counting them.
    std::vector<ServerErrorRegistry::Record> server_errors;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long llm_invocations = 0;

    long long total_tokens() const { return prompt_tokens + completion_tokens; }

    Json to_json() const {
        Json j;
        j["covered"] = covered;
        Json unc = Json::array();
        for (const auto& [op, reason] : uncovered) {
            Json u;
            u["operation"] = op;
            u["reason"] = reason;
            unc.push_back(std::move(u));
        }
        j["uncovered"] = std::move(unc);
        Json ses = Json::array();
        for (const auto& r : server_errors) ses.push_back(r.to_json());
        j["server_errors"] = std::move(ses);
        Json tokens;
        tokens["prompt_tokens"] = prompt_tokens;
        tokens["completion_tokens"] = completion_tokens;
        tokens["total_tokens"] = total_tokens();
        tokens["invocations"] = llm_invocations;
        j["tokens"] = std::move(tokens);
        return j;
    }

    static GenerationRecord from_json(const Json& j) {
        GenerationRecord g;
        for (const auto& c : j.at("covered")) g.covered.push_back(c.get<std::string>());
        for (const auto& u : j.at("uncovered")) {
            g.uncovered.emplace_back(u.at("operation").get<std::string>(),
                                     u.at("reason").get<std::string>());
        }
        if (j.contains("server_errors")) {
            for (const auto& r : j["server_errors"]) {
                g.server_errors.push_back(ServerErrorRegistry::Record::from_json(r));
            }
        }
        const Json& tokens = j.at("tokens");
        g.prompt_tokens = tokens.at("prompt_tokens").get<long long>();
        g.completion_tokens = tokens.at("completion_tokens").get<long long>();
        g.llm_invocations = tokens.at("invocations").get<long long>();
        return g;
    }
};

struct SuiteOutcome {
    std::string operation_id;
    std::vector<TestOutcome> outcomes;
};

struct RunReport {
    GenerationRecord generation;
    std::vector<SuiteOutcome> suites;
    ServerErrorRegistry server_errors;
    bool executed = false;  // false for generate-only workspaces
    Json config_echo = Json::object();
    std::string timestamp;  // the single nondeterministic field

    size_t test_case_count() const {
        size_t n = 0;
        for (const auto& s : suites) n += s.outcomes.size();
        return n;
    }

    size_t verdict_count(Verdict v) const {
        size_t n = 0;
        for (const auto& s : suites) {
            for (const auto& o : s.outcomes) {
                if (o.verdict == v) ++n;
            }
        }
        return n;
    }

    size_t operations_covered() const { return generation.covered.size(); }

    bool all_passed() const {
        for (const auto& s : suites) {
            for (const auto& o : s.outcomes) {
                if (o.verdict != Verdict::Passed) return false;
            }
        }
        return true;
    }
};

// Strictly sequential execution of every suite; init scripts mutate shared
// service state, so nothing here may run concurrently.
inline void run_all(const std::vector<TestSuite>& suites, RequestEngine& engine,
                    const RunnerConfig& cfg, RunReport& report) {
    report.executed = true;
    for (const auto& r : report.generation.server_errors) {
        report.server_errors.record(r);
    }
    for (const auto& suite : suites) {
        SuiteOutcome so;
        so.operation_id = suite.operation_id;
        for (const auto& tc : suite.cases) {
            so.outcomes.push_back(run_test_case(tc, engine, cfg, report.server_errors));
        }
        report.suites.push_back(std::move(so));
    }
}

}  // namespace restsuite
