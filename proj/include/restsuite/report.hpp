#pragma once

#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "restsuite/common.hpp"
#include "restsuite/llm.hpp"
#include "restsuite/runner.hpp"

namespace restsuite {

inline constexpr std::string_view kToolName = "restsuite";
inline constexpr std::string_view kToolVersion = "0.1.0";

struct OperationArtifacts {
    std::string operation_id;
    std::string directory;        // relative to the workspace root
    std::string collection_file;  // file name inside the directory
    size_t case_count = 0;
    Json plan;
    Json trace;
    Json scenarios;
    std::string collection_text;
};

struct SpecInfo {
    std::string title;
    std::string version;
    size_t operations_total = 0;

    Json to_json() const {
        Json j;
        j["title"] = title;
        j["version"] = version;
        j["operations_total"] = operations_total;
        return j;
    }

    static SpecInfo from_json(const Json& j) {
        SpecInfo s;
        s.title = j.value("title", std::string{});
        s.version = j.value("version", std::string{});
        s.operations_total = j.value("operations_total", size_t{0});
        return s;
    }
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << content;
    if (!out) fail(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read '" + path.string() + "'");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

inline std::string pretty(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

inline std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Directory name per operation, deduplicated deterministically.
inline std::vector<std::string> directory_names(const std::vector<std::string>& operation_ids) {
    std::vector<std::string> out;
    std::map<std::string, int> used;
    for (const auto& id : operation_ids) {
        std::string base = sanitize_id(id);
        int& n = used[base];
        ++n;
        out.push_back(n == 1 ? base : base + "_" + std::to_string(n));
    }
    return out;
}

// -------- report.json --------

inline Json report_to_json(const RunReport& report, const SpecInfo& spec,
                           const std::vector<OperationArtifacts>& artifacts) {
    Json doc;
    Json tool;
    tool["name"] = std::string(kToolName);
    tool["version"] = std::string(kToolVersion);
    doc["tool"] = std::move(tool);
    doc["timestamp"] = report.timestamp;
    doc["config"] = report.config_echo;
    doc["spec"] = spec.to_json();
    doc["generation"] = report.generation.to_json();

    Json suites = Json::array();
    std::map<std::string, const SuiteOutcome*> outcome_by_op;
    for (const auto& so : report.suites) outcome_by_op.emplace(so.operation_id, &so);
    for (const auto& art : artifacts) {
        Json s;
        s["operation"] = art.operation_id;
        s["directory"] = art.directory;
        s["collection"] = art.directory + "/" + art.collection_file;
        s["test_cases"] = art.case_count;
        auto it = outcome_by_op.find(art.operation_id);
        if (report.executed && it != outcome_by_op.end()) {
            Json outcomes = Json::array();
            for (const auto& o : it->second->outcomes) outcomes.push_back(o.to_json());
            s["outcomes"] = std::move(outcomes);
        }
        suites.push_back(std::move(s));
    }
    doc["suites"] = std::move(suites);

    size_t test_cases = 0;
    for (const auto& art : artifacts) test_cases += art.case_count;
    Json metrics;
    metrics["executed"] = report.executed;
    metrics["operations_total"] = spec.operations_total;
    metrics["operations_covered"] = report.operations_covered();
    metrics["test_cases"] = test_cases;
    metrics["server_errors"] = report.server_errors.count();
    if (test_cases > 0) {
        metrics["tokens_per_test_case"] =
            static_cast<double>(report.generation.total_tokens()) / static_cast<double>(test_cases);
    } else {
        metrics["tokens_per_test_case"] = Json();
    }
    if (report.executed) {
        Json verdicts;
        verdicts["passed"] = report.verdict_count(Verdict::Passed);
        verdicts["failed"] = report.verdict_count(Verdict::Failed);
        verdicts["server_error"] = report.verdict_count(Verdict::ServerError);
        verdicts["setup_failed"] = report.verdict_count(Verdict::SetupFailed);
        metrics["verdicts"] = std::move(verdicts);
    }
    doc["metrics"] = std::move(metrics);
    doc["server_errors"] = report.server_errors.to_json();
    return doc;
}

// -------- report.txt --------

inline std::string render_report_text(const RunReport& report, const SpecInfo& spec,
                                      const std::vector<OperationArtifacts>& artifacts) {
    std::string out;
    out += std::string(kToolName) + " test report for '" + spec.title + "' (" + spec.version + ")\n";
    out += std::string(out.size() - 1, '=') + "\n\n";

    // Server errors come first: these are the findings nobody should miss.
    const auto& se = report.server_errors.records();
    if (!se.empty()) {
        out += "!!! SERVER ERRORS (" + std::to_string(se.size()) + ") !!!\n";
        for (const auto& r : se) {
            out += "  - " + r.method + " " + r.path_template;
            if (!r.override_keys.empty()) {
                out += " [";
                bool first = true;
                for (const auto& k : r.override_keys) {
                    if (!first) out += ", ";
                    out += k;
                    first = false;
                }
                out += "]";
            }
            out += " -> HTTP " + std::to_string(r.status) + " (" + r.context + ")\n";
        }
        out += "\n";
    }

    std::map<std::string, const SuiteOutcome*> outcome_by_op;
    for (const auto& so : report.suites) outcome_by_op.emplace(so.operation_id, &so);
    if (!artifacts.empty()) {
        out += "Suites:\n";
        for (const auto& art : artifacts) {
            out += "  " + art.operation_id + " (" + art.directory + "/)\n";
            auto it = outcome_by_op.find(art.operation_id);
            if (report.executed && it != outcome_by_op.end()) {
                for (const auto& o : it->second->outcomes) {
                    char line[512];
                    std::snprintf(line, sizeof(line), "    [%-11s] %s (%d)%s%s\n",
                                  verdict_name(o.verdict), o.name.c_str(), o.final_status,
                                  o.detail.empty() ? "" : " -- ", o.detail.c_str());
                    out += line;
                }
            } else {
                out += "    (generated, not yet executed)\n";
            }
        }
        out += "\n";
    }

    if (!report.generation.uncovered.empty()) {
        out += "Uncovered operations (no valid request could be produced):\n";
        for (const auto& [op, reason] : report.generation.uncovered) {
            out += "  - " + op + ": " + reason + "\n";
        }
        out += "\n";
    }

    size_t test_cases = 0;
    for (const auto& art : artifacts) test_cases += art.case_count;
    out += "Metrics:\n";
    out += "  operations covered: " + std::to_string(report.operations_covered()) + " / " +
           std::to_string(spec.operations_total) + "\n";
    out += "  test cases: " + std::to_string(test_cases) + "\n";
    out += "  server errors: " + std::to_string(report.server_errors.count()) + "\n";
    if (report.executed) {
        out += "  verdicts: " + std::to_string(report.verdict_count(Verdict::Passed)) + " passed, " +
               std::to_string(report.verdict_count(Verdict::Failed)) + " failed, " +
               std::to_string(report.verdict_count(Verdict::ServerError)) + " server errors, " +
               std::to_string(report.verdict_count(Verdict::SetupFailed)) + " setup failures\n";
    }
    out += "  tokens per test case: " +
           format_tokens_per_test_case(report.generation.total_tokens(), test_cases) + " (total " +
           std::to_string(report.generation.total_tokens()) + " over " + std::to_string(test_cases) +
           " cases)\n";
    return out;
}

// -------- Workspace writing --------

// Layout:
//   <root>/report.json, <root>/report.txt
//   <root>/<operation>/plan.json, trace.json, scenarios.json,
//   <root>/<operation>/<operation>.postman_collection.json
//   <root>/<operation>/outcomes.json        (once executed)
inline std::vector<std::string> write_workspace(const std::filesystem::path& root,
                                                const RunReport& report, const SpecInfo& spec,
                                                const std::vector<OperationArtifacts>& artifacts,
                                                bool write_generation_files = true) {
    std::vector<std::string> written;
    auto emit = [&](const std::filesystem::path& rel, const std::string& content) {
        detail::write_file(root / rel, content);
        written.push_back(rel.string());
    };

    std::map<std::string, const SuiteOutcome*> outcome_by_op;
    for (const auto& so : report.suites) outcome_by_op.emplace(so.operation_id, &so);

    for (const auto& art : artifacts) {
        const std::filesystem::path dir = art.directory;
        if (write_generation_files) {
            emit(dir / "plan.json", detail::pretty(art.plan));
            emit(dir / "trace.json", detail::pretty(art.trace));
            emit(dir / "scenarios.json", detail::pretty(art.scenarios));
            emit(dir / art.collection_file, art.collection_text);
        }
        auto it = outcome_by_op.find(art.operation_id);
        if (report.executed && it != outcome_by_op.end()) {
            Json outcomes = Json::array();
            for (const auto& o : it->second->outcomes) outcomes.push_back(o.to_json());
            emit(dir / "outcomes.json", detail::pretty(outcomes));
        }
    }
    emit("report.json", detail::pretty(report_to_json(report, spec, artifacts)));
    emit("report.txt", render_report_text(report, spec, artifacts));
    return written;
}

// -------- Workspace reading (cmd_run) --------

struct LoadedWorkspace {
    SpecInfo spec;
    GenerationRecord generation;
    std::vector<OperationArtifacts> artifacts;  // plan/trace/scenarios left empty
    std::vector<TestSuite> suites;
    Json previous_config = Json::object();
};

inline LoadedWorkspace load_workspace(const std::filesystem::path& root) {
    const std::filesystem::path report_path = root / "report.json";
    if (!std::filesystem::exists(report_path)) {
        fail(ErrorCode::WorkspaceCorrupt,
             "no report.json under '" + root.string() + "'; generate a workspace first");
    }
    Json doc;
    try {
        doc = Json::parse(detail::read_file(report_path));
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::WorkspaceCorrupt, std::string("report.json is not valid JSON: ") + e.what());
    }
    LoadedWorkspace ws;
    try {
        ws.spec = SpecInfo::from_json(doc.at("spec"));
        ws.generation = GenerationRecord::from_json(doc.at("generation"));
        ws.previous_config = doc.value("config", Json::object());
        for (const auto& s : doc.at("suites")) {
            OperationArtifacts art;
            art.operation_id = s.at("operation").get<std::string>();
            art.directory = s.at("directory").get<std::string>();
            const std::string collection_rel = s.at("collection").get<std::string>();
            art.collection_file = std::filesystem::path(collection_rel).filename().string();
            art.case_count = s.at("test_cases").get<size_t>();
            const std::string text = detail::read_file(root / collection_rel);
            art.collection_text = text;
            TestSuite suite = parse_postman_collection(text);
            if (suite.operation_id != art.operation_id) {
                fail(ErrorCode::WorkspaceCorrupt,
                     "collection '" + collection_rel + "' belongs to operation '" +
                         suite.operation_id + "', report says '" + art.operation_id + "'");
            }
            if (suite.cases.size() != art.case_count) {
                fail(ErrorCode::WorkspaceCorrupt,
                     "collection '" + collection_rel + "' case count differs from the report");
            }
            ws.suites.push_back(std::move(suite));
            ws.artifacts.push_back(std::move(art));
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::WorkspaceCorrupt, std::string("report.json is incomplete: ") + e.what());
    }
    return ws;
}

}  // namespace restsuite
