#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "restsuite/common.hpp"
#include "restsuite/happy_path.hpp"
#include "restsuite/negative.hpp"
#include "restsuite/oas.hpp"
#include "restsuite/trace.hpp"

namespace restsuite {

enum class CaseKind { Happy, Structural, Functional };

inline const char* case_kind_name(CaseKind k) {
    switch (k) {
        case CaseKind::Happy: return "happy";
        case CaseKind::Structural: return "structural";
        case CaseKind::Functional: return "functional";
    }
    return "?";
}

inline std::optional<CaseKind> case_kind_from(std::string_view s) {
    if (s == "happy") return CaseKind::Happy;
    if (s == "structural") return CaseKind::Structural;
    if (s == "functional") return CaseKind::Functional;
    return std::nullopt;
}

enum class StatusClass { Success2xx, ClientError4xx };

// A value slot in a request template: either an inline literal or a
// collection variable filled by an extraction from an earlier response.
struct ValueOrVar {
    bool is_var = false;
    Json literal;
    std::string var;

    static ValueOrVar of(Json v) { return {false, std::move(v), {}}; }
    static ValueOrVar variable(std::string name) { return {true, Json(), std::move(name)}; }
};

struct ExtractionDirective {
    std::string source_key;  // response key on the producing step
    std::string variable;
};

// Marker embedded in body templates where a variable's value belongs.
inline std::string var_marker(const std::string& name) { return "@@VAR:" + name + "@@"; }

inline std::string variable_name_for(const std::string& trace_key) {
    std::string out;
    out.reserve(trace_key.size());
    for (char c : trace_key) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
}

struct TestStep {
    std::string alias;
    std::string operation_id;
    std::string method;
    std::string path_template;
    std::vector<std::pair<std::string, ValueOrVar>> path_params;
    std::vector<std::pair<std::string, ValueOrVar>> query;
    std::vector<std::pair<std::string, ValueOrVar>> headers;
    std::vector<std::pair<std::string, ValueOrVar>> cookies;
    std::optional<Json> body;  // template tree; var slots hold var_marker strings
    std::vector<ExtractionDirective> extractions;
    StatusClass expect = StatusClass::Success2xx;
};

struct TestCase {
    std::string name;
    CaseKind kind = CaseKind::Happy;
    std::string description;
    std::set<std::string> target_keys;  // overridden keys; empty for the happy case
    std::vector<TestStep> steps;
};

struct TestSuite {
    std::string operation_id;
    std::string name;
    std::string base_url;
    std::vector<TestCase> cases;
};

// -------- Building test cases from scenario values --------

namespace detail {

struct ExtractionTarget {
    bool inline_literal = false;
    Json literal;
    std::string response_key;  // when !inline_literal
};

// Follows a dependent reference through request-side entries until it lands
// on a response key (extraction) or a generated request literal (inline).
inline ExtractionTarget chase_reference(const std::string& ref,
                                        const std::map<std::string, const TraceValue*>& by_key) {
    std::string current = ref;
    std::set<std::string> seen;
    for (;;) {
        if (!seen.insert(current).second) {
            fail(ErrorCode::DanglingDependency, "reference cycle at '" + current + "'");
        }
        TraceKey key = parse_trace_key(current);
        if (key.direction == Direction::Response) {
            return {false, Json(), current};
        }
        auto it = by_key.find(current);
        if (it == by_key.end()) {
            fail(ErrorCode::DanglingDependency,
                 "reference '" + current + "' does not name a known value");
        }
        if (it->second->kind == TraceValue::Kind::Generated) {
            return {true, it->second->literal, {}};
        }
        current = it->second->ref;
    }
}

inline std::string render_extraction_script(const ExtractionDirective& extraction) {
    TraceKey key = parse_trace_key(extraction.source_key);
    std::string accessor;
    switch (key.location) {
        case Location::Status:
            return "pm.collectionVariables.set(\"" + extraction.variable + "\", pm.response.code);";
        case Location::Header:
            return "pm.collectionVariables.set(\"" + extraction.variable +
                   "\", pm.response.headers.get(" + Json(key.segments[0].name).dump() + "));";
        case Location::Body: {
            for (const auto& seg : key.segments) {
                accessor += seg.is_index ? "[" + std::to_string(seg.index) + "]"
                                         : "[" + Json(seg.name).dump() + "]";
            }
            return "pm.collectionVariables.set(\"" + extraction.variable +
                   "\", pm.response.json()" + accessor + ");";
        }
        default:
            fail(ErrorCode::DanglingDependency,
                 "cannot extract from '" + extraction.source_key + "'");
    }
}

}  // namespace detail

// Assembles one executable test case from tagged scenario values. Generated
// values are inlined; dependent values become collection variables plus an
// extraction directive on the step that produces the referenced response
// value, so re-execution re-reads fresh identifiers instead of replaying
// stale ones.
inline TestCase build_test_case(const OperationPlan& plan,
                                const std::vector<std::pair<std::string, TraceValue>>& values,
                                const ApiSpec& spec, CaseKind kind, const std::string& name,
                                const std::string& description,
                                const std::set<std::string>& target_keys) {
    TestCase tc;
    tc.name = name;
    tc.kind = kind;
    tc.description = description;
    tc.target_keys = target_keys;

    std::map<std::string, size_t> step_index;
    for (size_t i = 0; i < plan.steps.size(); ++i) {
        const PlanStep& step = plan.steps[i];
        const ApiOperation* op = spec.find(step.operation_id);
        if (!op) fail(ErrorCode::UnknownOperation, "unknown operation '" + step.operation_id + "'");
        TestStep ts;
        ts.alias = step.alias;
        ts.operation_id = step.operation_id;
        ts.method = op->method;
        ts.path_template = op->path_template;
        ts.expect = StatusClass::Success2xx;
        tc.steps.push_back(std::move(ts));
        step_index[step.alias] = i;
    }
    tc.steps.back().expect =
        kind == CaseKind::Happy ? StatusClass::Success2xx : StatusClass::ClientError4xx;

    std::map<std::string, const TraceValue*> by_key;
    for (const auto& [key, value] : values) by_key.emplace(key, &value);

    std::set<std::string> declared_vars;
    auto ensure_extraction = [&](const std::string& response_key, size_t consumer_index) -> std::string {
        TraceKey key = parse_trace_key(response_key);
        auto producer = step_index.find(key.alias);
        if (producer == step_index.end()) {
            fail(ErrorCode::DanglingDependency,
                 "reference '" + response_key + "' targets a step outside the plan");
        }
        if (producer->second >= consumer_index) {
            fail(ErrorCode::DanglingDependency,
                 "reference '" + response_key + "' is not produced by an earlier step");
        }
        const std::string var = variable_name_for(response_key);
        if (declared_vars.insert(var).second) {
            tc.steps[producer->second].extractions.push_back({response_key, var});
        }
        return var;
    };

    for (const auto& [text, value] : values) {
        TraceKey key = parse_trace_key(text);
        if (key.direction != Direction::Request) continue;
        auto idx_it = step_index.find(key.alias);
        if (idx_it == step_index.end()) {
            fail(ErrorCode::DanglingDependency, "value '" + text + "' belongs to no plan step");
        }
        const size_t idx = idx_it->second;
        TestStep& ts = tc.steps[idx];

        ValueOrVar slot;
        if (value.kind == TraceValue::Kind::Generated) {
            if (is_absent(value.literal)) continue;  // omitted by the ABSENT contract
            slot = ValueOrVar::of(value.literal);
        } else {
            detail::ExtractionTarget target = detail::chase_reference(value.ref, by_key);
            if (target.inline_literal) {
                if (is_absent(target.literal)) continue;
                slot = ValueOrVar::of(target.literal);
            } else {
                slot = ValueOrVar::variable(ensure_extraction(target.response_key, idx));
            }
        }

        switch (key.location) {
            case Location::Path:
                ts.path_params.emplace_back(key.segments[0].name, std::move(slot));
                break;
            case Location::Query:
                ts.query.emplace_back(key.segments[0].name, std::move(slot));
                break;
            case Location::Header:
                ts.headers.emplace_back(key.segments[0].name, std::move(slot));
                break;
            case Location::Cookie:
                ts.cookies.emplace_back(key.segments[0].name, std::move(slot));
                break;
            case Location::Body: {
                if (!ts.body) ts.body = Json();
                Json leaf = slot.is_var ? Json(var_marker(slot.var)) : slot.literal;
                TraceKey body_key = key;
                detail::unflatten_assign(*ts.body, body_key, leaf);
                break;
            }
            case Location::Status:
                fail(ErrorCode::DanglingDependency, "status cannot be a request value");
        }
    }
    return tc;
}

// -------- Postman Collection v2.1 emission --------

inline constexpr std::string_view kPostmanSchemaUrl =
    "https://schema.getpostman.com/json/collection/v2.1.0/collection.json";

struct SuiteMeta {
    std::string suite_name;
    std::string operation_id;
    std::string base_url;
};

// Emitter seam: any framework adapter maps a suite to one document text.
class CollectionEmitter {
public:
    virtual ~CollectionEmitter() = default;
    virtual std::string emit(const std::vector<TestCase>& suite, const SuiteMeta& meta) const = 0;
    virtual std::string file_extension() const = 0;
};

namespace detail {

inline std::string status_window(StatusClass expect, bool lower) {
    if (expect == StatusClass::Success2xx) return lower ? "200" : "299";
    return lower ? "400" : "499";
}

inline std::string render_test_script_line(const std::string& alias, StatusClass expect) {
    const char* klass = expect == StatusClass::Success2xx ? "2xx" : "4xx";
    return "pm.test(\"" + alias + ": status is " + std::string(klass) +
           "\", function () { pm.expect(pm.response.code).to.be.within(" +
           status_window(expect, true) + ", " + status_window(expect, false) + "); });";
}

inline std::string value_text(const ValueOrVar& v) {
    if (v.is_var) return "{{" + v.var + "}}";
    return literal_to_text(v.literal);
}

inline std::vector<std::string> split_path_segments(const std::string& path) {
    std::vector<std::string> out;
    std::string current;
    for (char c : path) {
        if (c == '/') {
            if (!current.empty()) out.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) out.push_back(current);
    return out;
}

inline std::string render_step_path(const TestStep& step) {
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
        if (close == std::string::npos) {
            fail(ErrorCode::CollectionFormat, "unterminated '{' in path template");
        }
        const std::string name = tmpl.substr(open + 1, close - open - 1);
        auto it = std::find_if(step.path_params.begin(), step.path_params.end(),
                               [&](const auto& kv) { return kv.first == name; });
        if (it == step.path_params.end()) {
            fail(ErrorCode::MissingRequiredValue, "no value for path parameter '" + name + "'");
        }
        rendered += value_text(it->second);
        pos = close + 1;
    }
    return rendered;
}

inline std::string render_body_raw(const Json& body_template) {
    std::string raw = body_template.dump();
    // Variable markers become unquoted {{name}} placeholders so substituted
    // numbers stay numbers.
    static const std::regex marker("\"@@VAR:([A-Za-z0-9_]+)@@\"");
    return std::regex_replace(raw, marker, "{{$1}}");
}

}  // namespace detail

class PostmanEmitter : public CollectionEmitter {
public:
    std::string emit(const std::vector<TestCase>& suite, const SuiteMeta& meta) const override {
        if (suite.empty()) fail(ErrorCode::ConfigError, "cannot emit an empty suite");
        Json doc;
        Json info;
        info["name"] = meta.suite_name;
        info["description"] = "operation: " + meta.operation_id;
        info["schema"] = std::string(kPostmanSchemaUrl);
        doc["info"] = std::move(info);

        std::vector<std::string> variables;  // first-use order
        std::set<std::string> seen_vars;
        auto note_var = [&](const std::string& name) {
            if (seen_vars.insert(name).second) variables.push_back(name);
        };

        Json folders = Json::array();
        for (const TestCase& tc : suite) {
            Json folder;
            folder["name"] = tc.name;
            std::string description = "kind: " + std::string(case_kind_name(tc.kind));
            if (!tc.target_keys.empty()) {
                description += "\ntargets: ";
                bool first = true;
                for (const auto& k : tc.target_keys) {
                    if (!first) description += ", ";
                    description += k;
                    first = false;
                }
            }
            if (!tc.description.empty()) description += "\nrationale: " + tc.description;
            folder["description"] = description;

            Json items = Json::array();
            for (const TestStep& step : tc.steps) {
                Json item;
                item["name"] = step.alias;

                std::vector<std::string> exec;
                exec.push_back(detail::render_test_script_line(step.alias, step.expect));
                for (const auto& extraction : step.extractions) {
                    exec.push_back(detail::render_extraction_script(extraction));
                    note_var(extraction.variable);
                }
                Json script;
                script["type"] = "text/javascript";
                script["exec"] = exec;
                Json event;
                event["listen"] = "test";
                event["script"] = std::move(script);
                item["event"] = Json::array({event});

                Json request;
                request["description"] =
                    "operation: " + step.operation_id + "\npath_template: " + step.path_template;
                request["method"] = step.method;

                Json headers = Json::array();
                for (const auto& [name, value] : step.headers) {
                    Json h;
                    h["key"] = name;
                    h["value"] = detail::value_text(value);
                    headers.push_back(std::move(h));
                    if (value.is_var) note_var(value.var);
                }
                if (!step.cookies.empty()) {
                    std::string cookie;
                    for (const auto& [name, value] : step.cookies) {
                        if (!cookie.empty()) cookie += "; ";
                        cookie += name + "=" + detail::value_text(value);
                        if (value.is_var) note_var(value.var);
                    }
                    Json h;
                    h["key"] = "Cookie";
                    h["value"] = cookie;
                    headers.push_back(std::move(h));
                }
                if (step.body) {
                    Json h;
                    h["key"] = "Content-Type";
                    h["value"] = "application/json";
                    headers.push_back(std::move(h));
                }
                request["header"] = std::move(headers);

                const std::string path = detail::render_step_path(step);
                for (const auto& [name, value] : step.path_params) {
                    (void)name;
                    if (value.is_var) note_var(value.var);
                }
                std::string raw = "{{baseUrl}}" + path;
                Json url;
                Json query = Json::array();
                if (!step.query.empty()) {
                    char sep = '?';
                    for (const auto& [name, value] : step.query) {
                        const std::string text = detail::value_text(value);
                        raw += sep + name + "=" + text;
                        sep = '&';
                        Json q;
                        q["key"] = name;
                        q["value"] = text;
                        query.push_back(std::move(q));
                        if (value.is_var) note_var(value.var);
                    }
                }
                url["raw"] = raw;
                url["host"] = Json::array({"{{baseUrl}}"});
                url["path"] = detail::split_path_segments(path);
                if (!query.empty()) url["query"] = query;
                request["url"] = std::move(url);

                if (step.body) {
                    const std::string body_raw = detail::render_body_raw(*step.body);
                    static const std::regex var_ref(R"(\{\{([A-Za-z0-9_]+)\}\})");
                    for (std::sregex_iterator it(body_raw.begin(), body_raw.end(), var_ref), end;
                         it != end; ++it) {
                        note_var((*it)[1].str());
                    }
                    Json body;
                    body["mode"] = "raw";
                    body["raw"] = body_raw;
                    Json options;
                    options["raw"]["language"] = "json";
                    body["options"] = std::move(options);
                    request["body"] = std::move(body);
                }

                item["request"] = std::move(request);
                items.push_back(std::move(item));
            }
            folder["item"] = std::move(items);
            folders.push_back(std::move(folder));
        }
        doc["item"] = std::move(folders);

        Json vars = Json::array();
        Json base;
        base["key"] = "baseUrl";
        base["value"] = meta.base_url;
        vars.push_back(std::move(base));
        for (const auto& name : variables) {
            if (name == "baseUrl") continue;
            Json v;
            v["key"] = name;
            v["value"] = "";
            vars.push_back(std::move(v));
        }
        doc["variable"] = std::move(vars);
        return doc.dump(2) + "\n";
    }

    std::string file_extension() const override { return ".postman_collection.json"; }
};

// -------- Parsing emitted collections back into runnable form --------

namespace detail {

inline std::string description_field(const std::string& description, const std::string& field) {
    const std::string prefix = field + ": ";
    size_t pos = 0;
    while (pos < description.size()) {
        size_t end = description.find('\n', pos);
        std::string_view line(description.data() + pos,
                              (end == std::string::npos ? description.size() : end) - pos);
        if (line.rfind(prefix, 0) == 0) return std::string(line.substr(prefix.size()));
        if (end == std::string::npos) break;
        pos = end + 1;
    }
    return {};
}

inline ValueOrVar parse_value_text(const std::string& text) {
    static const std::regex only_var(R"(^\{\{([A-Za-z0-9_]+)\}\}$)");
    std::smatch m;
    if (std::regex_match(text, m, only_var)) return ValueOrVar::variable(m[1].str());
    return ValueOrVar::of(Json(text));
}

inline void parse_script_lines(const Json& exec, TestStep& step) {
    static const std::regex test_line(
        R"re(^pm\.test\("(.*): status is ([24]xx)", function \(\) \{ pm\.expect\(pm\.response\.code\)\.to\.be\.within\((\d+), (\d+)\); \}\);$)re");
    static const std::regex set_body(
        R"re(^pm\.collectionVariables\.set\("([A-Za-z0-9_]+)", pm\.response\.json\(\)((?:\[[^\]]+\])+)\);$)re");
    static const std::regex set_status(
        R"re(^pm\.collectionVariables\.set\("([A-Za-z0-9_]+)", pm\.response\.code\);$)re");
    static const std::regex set_header(
        R"re(^pm\.collectionVariables\.set\("([A-Za-z0-9_]+)", pm\.response\.headers\.get\("([^"]+)"\)\);$)re");
    static const std::regex accessor_step(R"re(\[(?:(\d+)|"((?:[^"\\]|\\.)*)")\])re");

    bool saw_test = false;
    for (const auto& line_json : exec) {
        const std::string line = line_json.get<std::string>();
        std::smatch m;
        if (std::regex_match(line, m, test_line)) {
            step.expect = m[2].str() == "2xx" ? StatusClass::Success2xx : StatusClass::ClientError4xx;
            saw_test = true;
            continue;
        }
        if (std::regex_match(line, m, set_body)) {
            std::string source = step.alias + ".response.body";
            const std::string accessors = m[2].str();
            for (std::sregex_iterator it(accessors.begin(), accessors.end(), accessor_step), end;
                 it != end; ++it) {
                if ((*it)[1].matched) {
                    source += "[" + (*it)[1].str() + "]";
                } else {
                    source += "." + Json::parse("\"" + (*it)[2].str() + "\"").get<std::string>();
                }
            }
            step.extractions.push_back({source, m[1].str()});
            continue;
        }
        if (std::regex_match(line, m, set_status)) {
            step.extractions.push_back({step.alias + ".response.status", m[1].str()});
            continue;
        }
        if (std::regex_match(line, m, set_header)) {
            step.extractions.push_back({step.alias + ".response.header." + m[2].str(), m[1].str()});
            continue;
        }
        fail(ErrorCode::CollectionFormat, "unrecognized test script line: " + line);
    }
    if (!saw_test) fail(ErrorCode::CollectionFormat, "step '" + step.alias + "' has no status assertion");
}

}  // namespace detail

// Strict reader for the collections this tool emits; tampered or foreign
// documents are rejected with CollectionFormat.
inline TestSuite parse_postman_collection(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::CollectionFormat, std::string("collection is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("info") || !doc.contains("item")) {
        fail(ErrorCode::CollectionFormat, "collection must have info and item");
    }
    if (!doc["info"].contains("schema") ||
        doc["info"]["schema"].get<std::string>() != kPostmanSchemaUrl) {
        fail(ErrorCode::CollectionFormat, "collection does not declare the v2.1.0 schema");
    }
    TestSuite suite;
    suite.name = doc["info"].value("name", std::string{});
    suite.operation_id =
        detail::description_field(doc["info"].value("description", std::string{}), "operation");
    if (suite.operation_id.empty()) {
        fail(ErrorCode::CollectionFormat, "collection lacks the operation marker");
    }

    std::set<std::string> known_vars;
    if (doc.contains("variable")) {
        for (const auto& v : doc["variable"]) {
            const std::string key = v.value("key", std::string{});
            if (key == "baseUrl") {
                suite.base_url = v.value("value", std::string{});
            } else if (!key.empty()) {
                known_vars.insert(key);
            }
        }
    }

    for (const auto& folder : doc["item"]) {
        if (!folder.is_object() || !folder.contains("item")) {
            fail(ErrorCode::CollectionFormat, "top-level items must be test case folders");
        }
        TestCase tc;
        tc.name = folder.value("name", std::string{});
        const std::string description = folder.value("description", std::string{});
        auto kind = case_kind_from(detail::description_field(description, "kind"));
        if (!kind) fail(ErrorCode::CollectionFormat, "folder '" + tc.name + "' lacks a kind marker");
        tc.kind = *kind;
        tc.description = detail::description_field(description, "rationale");
        const std::string targets = detail::description_field(description, "targets");
        size_t pos = 0;
        while (pos < targets.size()) {
            size_t comma = targets.find(", ", pos);
            tc.target_keys.insert(targets.substr(pos, comma == std::string::npos ? std::string::npos
                                                                                : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 2;
        }

        for (const auto& item : folder["item"]) {
            if (!item.contains("request")) {
                fail(ErrorCode::CollectionFormat, "step item lacks a request");
            }
            TestStep step;
            step.alias = item.value("name", std::string{});
            const Json& request = item["request"];
            step.operation_id =
                detail::description_field(request.value("description", std::string{}), "operation");
            step.path_template = detail::description_field(request.value("description", std::string{}),
                                                           "path_template");
            if (step.operation_id.empty() || step.path_template.empty()) {
                fail(ErrorCode::CollectionFormat,
                     "step '" + step.alias + "' lacks operation/path markers");
            }
            step.method = request.value("method", std::string{});
            if (step.method.empty()) fail(ErrorCode::CollectionFormat, "step lacks a method");

            if (request.contains("header")) {
                for (const auto& h : request["header"]) {
                    const std::string key = h.value("key", std::string{});
                    const std::string value = h.value("value", std::string{});
                    if (key == "Cookie") {
                        size_t start = 0;
                        while (start < value.size()) {
                            size_t semi = value.find("; ", start);
                            std::string pair = value.substr(
                                start, semi == std::string::npos ? std::string::npos : semi - start);
                            size_t eq = pair.find('=');
                            if (eq != std::string::npos) {
                                step.cookies.emplace_back(
                                    pair.substr(0, eq), detail::parse_value_text(pair.substr(eq + 1)));
                            }
                            if (semi == std::string::npos) break;
                            start = semi + 2;
                        }
                    } else if (key == "Content-Type" && value == "application/json") {
                        // Re-added automatically when the body is present.
                    } else {
                        step.headers.emplace_back(key, detail::parse_value_text(value));
                    }
                }
            }

            if (!request.contains("url") || !request["url"].is_object()) {
                fail(ErrorCode::CollectionFormat, "step '" + step.alias + "' lacks a url object");
            }
            const Json& url = request["url"];
            // Path parameter slots are reconstructed against the template.
            std::vector<std::string> segments;
            if (url.contains("path")) {
                for (const auto& s : url["path"]) segments.push_back(s.get<std::string>());
            }
            std::vector<std::string> template_segments =
                detail::split_path_segments(step.path_template);
            if (segments.size() != template_segments.size()) {
                fail(ErrorCode::CollectionFormat,
                     "step '" + step.alias + "' path does not match its template");
            }
            for (size_t i = 0; i < segments.size(); ++i) {
                const std::string& tseg = template_segments[i];
                if (tseg.size() >= 2 && tseg.front() == '{' && tseg.back() == '}') {
                    step.path_params.emplace_back(tseg.substr(1, tseg.size() - 2),
                                                  detail::parse_value_text(segments[i]));
                } else if (tseg != segments[i]) {
                    fail(ErrorCode::CollectionFormat,
                         "step '" + step.alias + "' path segment '" + segments[i] +
                             "' conflicts with template '" + tseg + "'");
                }
            }
            if (url.contains("query")) {
                for (const auto& q : url["query"]) {
                    step.query.emplace_back(q.value("key", std::string{}),
                                            detail::parse_value_text(q.value("value", std::string{})));
                }
            }

            if (request.contains("body")) {
                const Json& body = request["body"];
                if (body.value("mode", std::string{}) != "raw") {
                    fail(ErrorCode::CollectionFormat, "only raw JSON bodies are supported");
                }
                std::string raw = body.value("raw", std::string{});
                for (const auto& var : known_vars) {
                    const std::string placeholder = "{{" + var + "}}";
                    const std::string replacement = "\"" + var_marker(var) + "\"";
                    size_t at = 0;
                    while ((at = raw.find(placeholder, at)) != std::string::npos) {
                        raw.replace(at, placeholder.size(), replacement);
                        at += replacement.size();
                    }
                }
                try {
                    step.body = Json::parse(raw);
                } catch (const Json::parse_error& e) {
                    fail(ErrorCode::CollectionFormat,
                         std::string("step body is not valid templated JSON: ") + e.what());
                }
            }

            if (!item.contains("event") || !item["event"].is_array() || item["event"].empty()) {
                fail(ErrorCode::CollectionFormat, "step '" + step.alias + "' lacks a test event");
            }
            bool parsed_script = false;
            for (const auto& event : item["event"]) {
                if (event.value("listen", std::string{}) != "test") continue;
                detail::parse_script_lines(event["script"]["exec"], step);
                parsed_script = true;
            }
            if (!parsed_script) {
                fail(ErrorCode::CollectionFormat, "step '" + step.alias + "' has no test script");
            }
            tc.steps.push_back(std::move(step));
        }
        if (tc.steps.empty()) fail(ErrorCode::CollectionFormat, "test case folder has no steps");
        suite.cases.push_back(std::move(tc));
    }
    return suite;
}

// Static chaining soundness over the emitted document: every {{variable}}
// read inside a folder must be set by a test script of a strictly earlier
// item in the same folder (baseUrl and pre-set collection variables aside).
inline std::optional<std::string> check_static_chaining(const Json& collection) {
    std::set<std::string> preset;
    if (collection.contains("variable")) {
        for (const auto& v : collection["variable"]) {
            if (!v.value("value", std::string{}).empty() || v.value("key", std::string{}) == "baseUrl") {
                preset.insert(v.value("key", std::string{}));
            }
        }
    }
    static const std::regex var_ref(R"re(\{\{([A-Za-z0-9_]+)\}\})re");
    static const std::regex setter(R"re(pm\.collectionVariables\.set\("([A-Za-z0-9_]+)")re");
    if (!collection.contains("item")) return "collection has no items";
    for (const auto& folder : collection["item"]) {
        std::set<std::string> known = preset;
        if (!folder.contains("item")) continue;
        for (const auto& item : folder["item"]) {
            const std::string request_text = item.contains("request") ? item["request"].dump() : "";
            for (std::sregex_iterator it(request_text.begin(), request_text.end(), var_ref), end;
                 it != end; ++it) {
                const std::string name = (*it)[1].str();
                if (!known.count(name)) {
                    return "folder '" + folder.value("name", std::string{}) + "' reads {{" + name +
                           "}} before any earlier step sets it";
                }
            }
            if (item.contains("event")) {
                const std::string events_text = item["event"].dump();
                for (std::sregex_iterator it(events_text.begin(), events_text.end(), setter), end;
                     it != end; ++it) {
                    known.insert((*it)[1].str());
                }
            }
        }
    }
    return std::nullopt;
}

}  // namespace restsuite
