#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "restsuite/common.hpp"
#include "restsuite/happy_path.hpp"
#include "restsuite/llm.hpp"
#include "restsuite/negative.hpp"
#include "restsuite/oas.hpp"
#include "restsuite/report.hpp"
#include "restsuite/request_engine.hpp"
#include "restsuite/runner.hpp"
#include "restsuite/test_builder.hpp"

namespace restsuite {

struct RunConfig {
    std::string spec_source;  // file path or http(s) URL
    std::string base_url;
    std::vector<std::string> operation_filters;  // globs over operation ids; empty = all
    bool kind_happy = true;
    bool kind_structural = true;
    bool kind_functional = true;

    std::string init_command;  // empty: no environment initialization
    std::string init_workdir;
    int init_timeout_s = 60;

    std::string guidance;
    std::map<std::string, std::vector<std::string>> sequence_overrides;  // operation -> step ids

    ProviderConfig provider;
    std::string replay_file;  // selects the scripted provider when set

    HappyPathConfig happy;
    NegativeBudget negative;

    std::string out_dir = "restsuite-out";
    int request_timeout_s = 30;
    bool verify_tls = true;
    bool verbose = false;

    void validate_common() const {
        if (!kind_happy && !kind_structural && !kind_functional) {
            fail(ErrorCode::ConfigError, "at least one test kind must be selected");
        }
        if (happy.max_retries_per_step < 0) fail(ErrorCode::ConfigError, "max retries must be >= 0");
        if (happy.max_sequence_len == 0) fail(ErrorCode::ConfigError, "max sequence length must be positive");
        if (negative.max_structural == 0 && kind_structural) {
            fail(ErrorCode::ConfigError, "structural budget must be positive");
        }
        if (negative.max_functional == 0 && kind_functional) {
            fail(ErrorCode::ConfigError, "functional budget must be positive");
        }
        if (out_dir.empty()) fail(ErrorCode::ConfigError, "output directory must be set");
        if (request_timeout_s <= 0) fail(ErrorCode::ConfigError, "request timeout must be positive");
    }

    std::optional<EnvInitScript> init_script() const {
        if (init_command.empty()) return std::nullopt;
        return EnvInitScript{init_command, init_workdir, init_timeout_s};
    }

    // Echoed into report.json. The output directory stays out so that two
    // runs into different directories still produce identical reports.
    Json echo() const {
        Json j;
        j["spec_source"] = spec_source;
        j["base_url"] = base_url;
        j["operation_filters"] = operation_filters;
        Json kinds = Json::array();
        if (kind_happy) kinds.push_back("happy");
        if (kind_structural) kinds.push_back("structural");
        if (kind_functional) kinds.push_back("functional");
        j["kinds"] = std::move(kinds);
        j["init_command"] = init_command;
        j["guidance_present"] = !guidance.empty();
        Json provider_echo;
        provider_echo["endpoint"] = provider.endpoint;
        provider_echo["model"] = provider.model;
        provider_echo["api_key_env"] = provider.api_key_env;
        provider_echo["max_reprompts"] = provider.max_reprompts;
        provider_echo["temperature"] = provider.temperature;
        j["provider"] = std::move(provider_echo);
        j["replay"] = !replay_file.empty();
        Json budgets;
        budgets["max_retries_per_step"] = happy.max_retries_per_step;
        budgets["max_sequence_len"] = happy.max_sequence_len;
        budgets["max_structural"] = negative.max_structural;
        budgets["max_functional"] = negative.max_functional;
        budgets["flatten_cap"] = happy.flatten_cap;
        j["budgets"] = std::move(budgets);
        j["request_timeout_s"] = request_timeout_s;
        j["verify_tls"] = verify_tls;
        return j;
    }
};

// -------- Helpers --------

namespace detail {

inline bool glob_match(std::string_view pattern, std::string_view text) {
    if (pattern.empty()) return text.empty();
    if (pattern[0] == '*') {
        for (size_t skip = 0; skip <= text.size(); ++skip) {
            if (glob_match(pattern.substr(1), text.substr(skip))) return true;
        }
        return false;
    }
    if (text.empty()) return false;
    if (pattern[0] != '?' && pattern[0] != text[0]) return false;
    return glob_match(pattern.substr(1), text.substr(1));
}

inline bool operation_selected(const std::vector<std::string>& filters, const ApiOperation& op) {
    if (filters.empty()) return true;
    for (const auto& f : filters) {
        if (glob_match(f, op.id) || glob_match(f, op.method + " " + op.path_template)) return true;
    }
    return false;
}

}  // namespace detail

// Reads the OpenAPI document from a local file or an http(s) URL.
inline std::string load_spec_text(const std::string& source, int timeout_s = 30, bool verify_tls = true) {
    if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
        size_t host_start = source.find("://") + 3;
        size_t slash = source.find('/', host_start);
        std::string scheme_host = slash == std::string::npos ? source : source.substr(0, slash);
        std::string path = slash == std::string::npos ? "/" : source.substr(slash);
        httplib::Client client(scheme_host);
        client.set_connection_timeout(timeout_s, 0);
        client.set_read_timeout(timeout_s, 0);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
        client.enable_server_certificate_verification(verify_tls);
#endif
        auto res = client.Get(path);
        if (!res) {
            fail(ErrorCode::TransportError,
                 "cannot fetch spec from '" + source + "': " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            fail(ErrorCode::ConfigError,
                 "spec URL '" + source + "' answered HTTP " + std::to_string(res->status));
        }
        return res->body;
    }
    std::ifstream in(source, std::ios::binary);
    if (!in) fail(ErrorCode::ConfigError, "cannot open spec file '" + source + "'");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::unique_ptr<LlmProvider> make_provider(const RunConfig& cfg) {
    if (!cfg.replay_file.empty()) {
        return std::make_unique<ReplayProvider>(ReplayProvider::from_file(cfg.replay_file));
    }
    return std::make_unique<HttpLlmProvider>(cfg.provider);
}

// -------- Generation phase --------

struct GenerateResult {
    SpecInfo spec_info;
    RunReport report;  // executed == false
    std::vector<OperationArtifacts> artifacts;
    std::vector<TestSuite> suites;
};

inline GenerateResult generate_suites(const RunConfig& cfg, LlmGateway& gateway,
                                      RequestEngine& engine, std::ostream& log = std::cerr) {
    ApiSpec spec = parse_spec(load_spec_text(cfg.spec_source, cfg.request_timeout_s, cfg.verify_tls));

    GenerateResult result;
    result.spec_info = {spec.title, spec.version, spec.operations.size()};
    result.report.executed = false;
    result.report.config_echo = cfg.echo();
    result.report.timestamp = utc_timestamp();

    std::vector<const ApiOperation*> targets;
    for (const auto& op : spec.operations) {
        if (detail::operation_selected(cfg.operation_filters, op)) targets.push_back(&op);
    }

    std::vector<std::string> selected_ids;
    for (const auto* op : targets) selected_ids.push_back(op->id);
    std::vector<std::string> dirs = directory_names(selected_ids);

    const PostmanEmitter emitter;
    for (size_t target_index = 0; target_index < targets.size(); ++target_index) {
        const ApiOperation& op = *targets[target_index];
        auto uncovered = [&](const std::string& reason) {
            result.report.generation.uncovered.emplace_back(op.id, reason);
            if (cfg.verbose) log << "[restsuite] " << op.id << " not covered: " << reason << "\n";
        };

        if (auto init = cfg.init_script()) {
            ScriptResult reset = run_init_script(*init);
            if (!reset.ok()) {
                uncovered("environment initialization failed: " + reset.describe());
                continue;
            }
        }

        OperationPlan plan;
        try {
            std::vector<std::string> override_steps;
            auto it = cfg.sequence_overrides.find(op.id);
            if (it != cfg.sequence_overrides.end()) override_steps = it->second;
            plan = plan_sequence(spec, op.id, cfg.guidance, override_steps, gateway, cfg.happy);
        } catch (const Error& e) {
            uncovered(e.what());
            continue;
        }

        HappyPathOutcome outcome =
            build_happy_path(spec, plan, cfg.base_url, cfg.guidance, engine, gateway, cfg.happy);
        for (const auto& se : outcome.exchanges) {
            if (status_is_5xx(se.exchange.status)) {
                ServerErrorRegistry::Record record{se.exchange.request.method,
                                                   se.exchange.request.path_template,
                                                   {},
                                                   "happy path construction for '" + op.id + "'",
                                                   se.exchange.status};
                bool fresh = true;
                for (const auto& existing : result.report.generation.server_errors) {
                    if (existing.signature() == record.signature()) {
                        fresh = false;
                        break;
                    }
                }
                if (fresh) result.report.generation.server_errors.push_back(std::move(record));
            }
        }
        if (!outcome.ok()) {
            uncovered(std::string(outcome.failure->kind_name()) + ": " + outcome.failure->message +
                      (outcome.failure->last_status
                           ? " (last status " + std::to_string(outcome.failure->last_status) + ")"
                           : ""));
            continue;
        }
        const HappyPath& happy = *outcome.path;
        result.report.generation.covered.push_back(op.id);

        ConstraintCatalog catalog = constraint_catalog(op);

        ScenarioGeneration scenarios;
        std::vector<std::pair<TestScenario, InvalidValueSet>> realized;
        if (cfg.kind_structural || cfg.kind_functional) {
            try {
                scenarios = generate_scenarios(op, happy, catalog, cfg.kind_structural,
                                               cfg.kind_functional, cfg.negative, gateway, cfg.happy);
            } catch (const Error& e) {
                scenarios.dropped.push_back(std::string("scenario generation failed: ") + e.what());
            }
            for (const auto& scenario : scenarios.scenarios) {
                try {
                    InvalidValueSet invalid = generate_invalid_values(scenario, op, happy, gateway);
                    realized.emplace_back(scenario, std::move(invalid));
                } catch (const Error& e) {
                    scenarios.dropped.push_back("scenario '" + scenario.name + "' dropped: " + e.what());
                }
            }
            if (cfg.verbose) {
                for (const auto& reason : scenarios.dropped) log << "[restsuite] " << reason << "\n";
            }
        }

        const auto request_entries = happy.request_entries();
        TestSuite suite;
        suite.operation_id = op.id;
        suite.name = sanitize_id(op.id);
        suite.base_url = cfg.base_url;
        if (cfg.kind_happy) {
            suite.cases.push_back(build_test_case(plan, request_entries, spec, CaseKind::Happy,
                                                  sanitize_id(op.id) + "_happy",
                                                  "valid request sequence for " + op.id, {}));
        }
        for (ScenarioKind kind : {ScenarioKind::Structural, ScenarioKind::Functional}) {
            for (const auto& [scenario, invalid] : realized) {
                if (scenario.kind != kind) continue;
                auto entries = apply_overrides(request_entries, invalid);
                suite.cases.push_back(build_test_case(
                    plan, entries, spec,
                    kind == ScenarioKind::Structural ? CaseKind::Structural : CaseKind::Functional,
                    scenario.name, scenario.description, scenario.target_keys));
            }
        }
        if (suite.cases.empty()) {
            // Happy case disabled and no valid negative scenario survived.
            uncovered("no test cases could be built for this operation");
            result.report.generation.covered.pop_back();
            continue;
        }

        OperationArtifacts art;
        art.operation_id = op.id;
        art.directory = dirs[target_index];
        art.collection_file = sanitize_id(op.id) + ".postman_collection.json";
        art.case_count = suite.cases.size();
        art.plan = plan.to_json();
        art.trace = happy.trace.to_json();
        Json scen_json;
        Json list = Json::array();
        for (const auto& [scenario, invalid] : realized) {
            Json s = scenario.to_json();
            Json overrides = Json::object();
            for (const auto& [k, v] : invalid.overrides) overrides[k] = v;
            s["overrides"] = std::move(overrides);
            list.push_back(std::move(s));
        }
        scen_json["scenarios"] = std::move(list);
        scen_json["dropped"] = scenarios.dropped;
        art.scenarios = std::move(scen_json);
        art.collection_text = emitter.emit(suite.cases, {suite.name, op.id, cfg.base_url});

        result.artifacts.push_back(std::move(art));
        result.suites.push_back(std::move(suite));
    }

    result.report.generation.prompt_tokens = gateway.ledger().totals().prompt_tokens;
    result.report.generation.completion_tokens = gateway.ledger().totals().completion_tokens;
    result.report.generation.llm_invocations = static_cast<long long>(gateway.ledger().invocations());
    return result;
}

// -------- Commands --------

// generate: build suites and write the workspace; no execution.
inline int cmd_generate(const RunConfig& cfg, std::ostream& log = std::cerr) {
    cfg.validate_common();
    if (cfg.spec_source.empty()) fail(ErrorCode::ConfigError, "spec source is required");
    if (cfg.base_url.empty()) fail(ErrorCode::ConfigError, "base URL is required");

    std::unique_ptr<LlmProvider> provider = make_provider(cfg);
    LlmGateway gateway(cfg.provider, *provider);
    HttpRequestEngine engine(SendConfig{cfg.request_timeout_s, cfg.verify_tls});

    GenerateResult result = generate_suites(cfg, gateway, engine, log);
    write_workspace(cfg.out_dir, result.report, result.spec_info, result.artifacts);
    log << "[restsuite] generated " << result.suites.size() << " suite(s) into " << cfg.out_dir
        << "\n";
    return 0;
}

// run: execute previously generated suites from disk; no LLM calls at all.
inline int cmd_run(const RunConfig& cfg, std::ostream& log = std::cerr) {
    cfg.validate_common();
    LoadedWorkspace ws = load_workspace(cfg.out_dir);

    RunReport report;
    report.generation = ws.generation;
    report.config_echo = ws.previous_config;
    report.timestamp = utc_timestamp();

    std::string base_url = cfg.base_url;
    if (base_url.empty() && !ws.suites.empty()) base_url = ws.suites.front().base_url;
    if (base_url.empty()) fail(ErrorCode::ConfigError, "no base URL: pass one or keep it in the workspace");

    HttpRequestEngine engine(SendConfig{cfg.request_timeout_s, cfg.verify_tls});
    RunnerConfig runner_cfg{base_url, cfg.init_script()};
    run_all(ws.suites, engine, runner_cfg, report);

    write_workspace(cfg.out_dir, report, ws.spec, ws.artifacts, /*write_generation_files=*/false);
    log << "[restsuite] executed " << report.test_case_count() << " test case(s); "
        << report.verdict_count(Verdict::Passed) << " passed\n";
    return report.all_passed() ? 0 : 1;
}

// all: generate, then run what was written, in one invocation.
inline int cmd_all(const RunConfig& cfg, std::ostream& log = std::cerr) {
    int rc = cmd_generate(cfg, log);
    if (rc != 0) return rc;
    return cmd_run(cfg, log);
}

// report: print the stored human-readable report.
inline int cmd_report(const RunConfig& cfg, std::ostream& out = std::cout) {
    const std::filesystem::path path = std::filesystem::path(cfg.out_dir) / "report.txt";
    if (!std::filesystem::exists(path)) {
        fail(ErrorCode::WorkspaceCorrupt, "no report.txt under '" + cfg.out_dir + "'");
    }
    out << detail::read_file(path);
    return 0;
}

}  // namespace restsuite
