#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "restsuite/oas.hpp"
#include "restsuite/pipeline.hpp"

namespace {

using restsuite::Error;
using restsuite::ErrorCode;
using restsuite::Json;
using restsuite::RunConfig;

void apply_kinds(RunConfig& cfg, const std::string& kinds_text) {
    cfg.kind_happy = cfg.kind_structural = cfg.kind_functional = false;
    size_t pos = 0;
    while (pos <= kinds_text.size()) {
        size_t comma = kinds_text.find(',', pos);
        std::string kind = kinds_text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                             : comma - pos);
        if (kind == "happy") cfg.kind_happy = true;
        else if (kind == "structural") cfg.kind_structural = true;
        else if (kind == "functional") cfg.kind_functional = true;
        else if (!kind.empty()) restsuite::fail(ErrorCode::ConfigError, "unknown test kind '" + kind + "'");
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
}

void apply_sequence_override(RunConfig& cfg, const std::string& text) {
    size_t eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        restsuite::fail(ErrorCode::ConfigError,
                        "--sequence expects '<operation>=<op1>,<op2>,...', got '" + text + "'");
    }
    const std::string target = text.substr(0, eq);
    std::vector<std::string> steps;
    size_t pos = eq + 1;
    while (pos <= text.size()) {
        size_t comma = text.find(',', pos);
        std::string step = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!step.empty()) steps.push_back(step);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (steps.empty()) restsuite::fail(ErrorCode::ConfigError, "--sequence has no steps for '" + target + "'");
    cfg.sequence_overrides[target] = steps;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) restsuite::fail(ErrorCode::ConfigError, "cannot open file '" + path + "'");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Config file (JSON or YAML) supplies any flag value; command-line flags win.
void apply_config_file(RunConfig& cfg, const std::string& path,
                       const std::map<std::string, bool>& given) {
    Json doc = restsuite::load_document_text(read_text_file(path));
    if (!doc.is_object()) restsuite::fail(ErrorCode::ConfigError, "config file must hold an object");
    auto has = [&](const char* key) { return doc.contains(key) && !given.count(key); };
    if (has("spec")) cfg.spec_source = doc["spec"].get<std::string>();
    if (has("base-url")) cfg.base_url = doc["base-url"].get<std::string>();
    if (has("op")) {
        cfg.operation_filters.clear();
        for (const auto& f : doc["op"]) cfg.operation_filters.push_back(f.get<std::string>());
    }
    if (has("kinds")) apply_kinds(cfg, doc["kinds"].get<std::string>());
    if (has("init-script")) cfg.init_command = doc["init-script"].get<std::string>();
    if (has("init-workdir")) cfg.init_workdir = doc["init-workdir"].get<std::string>();
    if (has("init-timeout")) cfg.init_timeout_s = doc["init-timeout"].get<int>();
    if (has("guidance")) cfg.guidance = doc["guidance"].get<std::string>();
    if (has("guidance-file")) cfg.guidance = read_text_file(doc["guidance-file"].get<std::string>());
    if (has("sequence")) {
        for (const auto& s : doc["sequence"]) apply_sequence_override(cfg, s.get<std::string>());
    }
    if (has("endpoint")) cfg.provider.endpoint = doc["endpoint"].get<std::string>();
    if (has("model")) cfg.provider.model = doc["model"].get<std::string>();
    if (has("api-key-env")) cfg.provider.api_key_env = doc["api-key-env"].get<std::string>();
    if (has("provider-timeout")) cfg.provider.timeout_s = doc["provider-timeout"].get<int>();
    if (has("max-reprompts")) cfg.provider.max_reprompts = doc["max-reprompts"].get<int>();
    if (has("temperature")) cfg.provider.temperature = doc["temperature"].get<double>();
    if (has("replay")) cfg.replay_file = doc["replay"].get<std::string>();
    if (has("max-retries")) cfg.happy.max_retries_per_step = doc["max-retries"].get<int>();
    if (has("max-seq-len")) cfg.happy.max_sequence_len = doc["max-seq-len"].get<size_t>();
    if (has("max-structural")) cfg.negative.max_structural = doc["max-structural"].get<size_t>();
    if (has("max-functional")) cfg.negative.max_functional = doc["max-functional"].get<size_t>();
    if (has("flatten-cap")) cfg.happy.flatten_cap = doc["flatten-cap"].get<size_t>();
    if (has("capture-header")) {
        for (const auto& h : doc["capture-header"]) {
            cfg.happy.capture_response_headers.push_back(h.get<std::string>());
        }
    }
    if (has("out")) cfg.out_dir = doc["out"].get<std::string>();
    if (has("timeout")) cfg.request_timeout_s = doc["timeout"].get<int>();
    if (has("insecure")) cfg.verify_tls = !doc["insecure"].get<bool>();
    if (has("verbose")) cfg.verbose = doc["verbose"].get<bool>();
}

struct CliState {
    RunConfig cfg;
    std::string kinds_text;
    std::string guidance_file;
    std::vector<std::string> sequence_texts;
    std::string config_file;
    bool insecure = false;
};

void add_common_options(CLI::App* cmd, CliState& state) {
    auto& cfg = state.cfg;
    cmd->add_option("--spec", cfg.spec_source, "OpenAPI document: file path or http(s) URL");
    cmd->add_option("--base-url", cfg.base_url, "Base URL of the service under test");
    cmd->add_option("--op", cfg.operation_filters,
                    "Operation filter (glob over operation ids); repeatable");
    cmd->add_option("--kinds", state.kinds_text,
                    "Comma list of test kinds: happy,structural,functional");
    cmd->add_option("--init-script", cfg.init_command,
                    "Command resetting the service state; runs before every happy path "
                    "construction and every executed test case");
    cmd->add_option("--init-workdir", cfg.init_workdir, "Working directory for the init script");
    cmd->add_option("--init-timeout", cfg.init_timeout_s, "Init script timeout in seconds");
    cmd->add_option("--guidance", cfg.guidance,
                    "Extra natural-language input for the model (credentials, known ids, ...)");
    cmd->add_option("--guidance-file", state.guidance_file, "Read --guidance text from a file");
    cmd->add_option("--sequence", state.sequence_texts,
                    "Fixed operation sequence: '<target>=<op1>,<op2>,...'; repeatable");
    cmd->add_option("--endpoint", cfg.provider.endpoint, "OpenAI-compatible API endpoint");
    cmd->add_option("--model", cfg.provider.model, "Model name");
    cmd->add_option("--api-key-env", cfg.provider.api_key_env,
                    "Name of the environment variable holding the API key");
    cmd->add_option("--provider-timeout", cfg.provider.timeout_s, "Provider timeout in seconds");
    cmd->add_option("--max-reprompts", cfg.provider.max_reprompts,
                    "Re-prompts for malformed structured output");
    cmd->add_option("--temperature", cfg.provider.temperature, "Sampling temperature");
    cmd->add_option("--replay", cfg.replay_file,
                    "Replay file with scripted model responses (no live provider)");
    cmd->add_option("--max-retries", cfg.happy.max_retries_per_step,
                    "Value-generation retries per step on 4xx");
    cmd->add_option("--max-seq-len", cfg.happy.max_sequence_len, "Maximum plan length");
    cmd->add_option("--max-structural", cfg.negative.max_structural,
                    "Structural scenario budget per operation");
    cmd->add_option("--max-functional", cfg.negative.max_functional,
                    "Functional scenario budget per operation");
    cmd->add_option("--flatten-cap", cfg.happy.flatten_cap, "Flattened pair cap per step");
    cmd->add_option("--capture-header", cfg.happy.capture_response_headers,
                    "Response header to record in the execution trace; repeatable");
    cmd->add_option("--out", cfg.out_dir, "Workspace output directory");
    cmd->add_option("--timeout", cfg.request_timeout_s, "HTTP request timeout in seconds");
    cmd->add_flag("--insecure", state.insecure, "Disable TLS certificate verification");
    cmd->add_flag("--verbose", cfg.verbose, "Log generation details to stderr");
    cmd->add_option("--config", state.config_file, "JSON/YAML config file supplying any flag");
}

void finalize_config(CLI::App* cmd, CliState& state) {
    std::map<std::string, bool> given;
    for (const auto* opt : cmd->get_options()) {
        if (opt->count() > 0) {
            std::string name = opt->get_name();
            if (name.rfind("--", 0) == 0) name = name.substr(2);
            given[name] = true;
        }
    }
    if (!state.config_file.empty()) apply_config_file(state.cfg, state.config_file, given);
    if (!state.kinds_text.empty()) apply_kinds(state.cfg, state.kinds_text);
    if (!state.guidance_file.empty()) state.cfg.guidance = read_text_file(state.guidance_file);
    for (const auto& s : state.sequence_texts) apply_sequence_override(state.cfg, s);
    if (state.insecure) state.cfg.verify_tls = false;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generates and runs reusable REST API test suites from an OpenAPI document"};
    app.require_subcommand(1);

    CliState generate_state, run_state, all_state, report_state;
    CLI::App* generate = app.add_subcommand("generate", "Build test suites; do not execute them");
    add_common_options(generate, generate_state);
    CLI::App* run = app.add_subcommand("run", "Execute previously generated suites from a workspace");
    add_common_options(run, run_state);
    CLI::App* all = app.add_subcommand("all", "Generate suites and execute them");
    add_common_options(all, all_state);
    CLI::App* report = app.add_subcommand("report", "Print the report of a workspace");
    report->add_option("--out", report_state.cfg.out_dir, "Workspace directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            finalize_config(generate, generate_state);
            return restsuite::cmd_generate(generate_state.cfg);
        }
        if (run->parsed()) {
            finalize_config(run, run_state);
            return restsuite::cmd_run(run_state.cfg);
        }
        if (all->parsed()) {
            finalize_config(all, all_state);
            return restsuite::cmd_all(all_state.cfg);
        }
        if (report->parsed()) {
            return restsuite::cmd_report(report_state.cfg);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
