#pragma once

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstring>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "restsuite/common.hpp"
#include "restsuite/oas.hpp"
#include "restsuite/trace.hpp"

namespace restsuite {

// -------- Request plans and exchanges --------

struct HttpRequestPlan {
    std::string method;
    std::string base_url;
    std::string path;  // rendered, percent-encoded, no residual {placeholder}
    std::vector<std::pair<std::string, std::string>> query;  // decoded values, trace order
    std::vector<std::pair<std::string, std::string>> headers;
    std::vector<std::pair<std::string, std::string>> cookies;
    std::optional<std::string> body;  // canonical JSON text
    std::string path_template;        // kept for reporting and error signatures

    std::string path_with_query() const {
        std::string out = path;
        char sep = '?';
        for (const auto& [k, v] : query) {
            out += sep;
            out += percent_encode(k) + "=" + percent_encode(v);
            sep = '&';
        }
        return out;
    }

    std::string url() const { return base_url + path_with_query(); }
};

struct HttpExchange {
    HttpRequestPlan request;
    int status = 0;  // always within [100, 599] when an exchange exists
    std::vector<std::pair<std::string, std::string>> response_headers;
    std::string response_body;
    long long elapsed_ms = 0;  // never serialized: workspaces must be reproducible

    std::optional<std::string> response_header(std::string_view name) const {
        for (const auto& [k, v] : response_headers) {
            if (iequals(k, name)) return v;
        }
        return std::nullopt;
    }
};

namespace detail {

inline bool header_name_valid(std::string_view name) {
    if (name.empty()) return false;
    for (unsigned char c : name) {
        const bool token = std::isalnum(c) || std::strchr("!#$%&'*+-.^_`|~", c) != nullptr;
        if (!token) return false;
    }
    return true;
}

}  // namespace detail

// Renders one step's resolved values (trace keys -> literals) into a
// concrete request. Inverse of flattening: body keys are unflattened, the
// other key families feed path/query/header/cookie directly. Entries whose
// value is the ABSENT sentinel are omitted.
inline HttpRequestPlan render_request(const ApiOperation& op,
                                      const std::vector<std::pair<std::string, Json>>& resolved,
                                      const std::string& base_url) {
    HttpRequestPlan plan;
    plan.method = op.method;
    plan.base_url = base_url;
    plan.path_template = op.path_template;

    std::vector<std::pair<std::string, Json>> body_pairs;
    std::vector<std::pair<std::string, std::string>> path_values;

    for (const auto& [text, literal] : resolved) {
        TraceKey key = parse_trace_key(text);
        if (key.direction != Direction::Request) {
            fail(ErrorCode::UnknownKey, "response key '" + text + "' in request rendering");
        }
        if (is_absent(literal)) continue;
        switch (key.location) {
            case Location::Body:
                body_pairs.emplace_back(text, literal);
                break;
            case Location::Path: {
                if (key.segments.size() != 1 || key.segments[0].is_index) {
                    fail(ErrorCode::UnknownKey, "path key '" + text + "' must name one parameter");
                }
                path_values.emplace_back(key.segments[0].name, literal_to_text(literal));
                break;
            }
            case Location::Query: {
                if (key.segments.empty() || key.segments[0].is_index) {
                    fail(ErrorCode::UnknownKey, "query key '" + text + "' must name a parameter");
                }
                plan.query.emplace_back(key.segments[0].name, literal_to_text(literal));
                break;
            }
            case Location::Header: {
                if (key.segments.size() != 1 || key.segments[0].is_index) {
                    fail(ErrorCode::UnknownKey, "header key '" + text + "' must name one header");
                }
                if (!detail::header_name_valid(key.segments[0].name)) {
                    fail(ErrorCode::KeySyntax, "header name '" + key.segments[0].name + "' is not an HTTP token");
                }
                plan.headers.emplace_back(key.segments[0].name, literal_to_text(literal));
                break;
            }
            case Location::Cookie: {
                if (key.segments.size() != 1 || key.segments[0].is_index) {
                    fail(ErrorCode::UnknownKey, "cookie key '" + text + "' must name one cookie");
                }
                plan.cookies.emplace_back(key.segments[0].name, literal_to_text(literal));
                break;
            }
            case Location::Status:
                fail(ErrorCode::UnknownKey, "status key '" + text + "' in request rendering");
        }
    }

    // Path template substitution; every placeholder must be covered.
    std::string rendered;
    const std::string& tmpl = op.path_template;
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
            fail(ErrorCode::MalformedDocument, "unterminated '{' in path template '" + tmpl + "'");
        }
        const std::string name = tmpl.substr(open + 1, close - open - 1);
        const auto it = std::find_if(path_values.begin(), path_values.end(),
                                     [&](const auto& kv) { return kv.first == name; });
        if (it == path_values.end()) {
            fail(ErrorCode::MissingRequiredValue,
                 "no value for path parameter '" + name + "' of " + op.id);
        }
        rendered += percent_encode(it->second);
        pos = close + 1;
    }
    plan.path = rendered;
    for (const auto& [name, value] : path_values) {
        (void)value;
        if (tmpl.find("{" + name + "}") == std::string::npos) {
            fail(ErrorCode::UnknownKey, "path value '" + name + "' has no placeholder in '" + tmpl + "'");
        }
    }

    for (const auto& p : op.parameters) {
        if (!p.required || p.location == Location::Path) continue;
        const auto& list = p.location == Location::Query    ? plan.query
                           : p.location == Location::Header ? plan.headers
                                                            : plan.cookies;
        const bool present = std::any_of(list.begin(), list.end(),
                                         [&](const auto& kv) { return kv.first == p.name; });
        if (!present) {
            fail(ErrorCode::MissingRequiredValue,
                 "required " + std::string(location_name(p.location)) + " parameter '" + p.name +
                     "' of " + op.id + " is missing");
        }
    }

    if (!body_pairs.empty()) {
        if (!op.body_content_type.empty() && op.body_content_type != "application/json" &&
            op.body_content_type.rfind("application/json;", 0) != 0 && op.body_content_type != "*/*") {
            fail(ErrorCode::UnsupportedBodyContent,
                 "operation " + op.id + " declares body content '" + op.body_content_type +
                     "'; only JSON bodies are supported");
        }
        Json by_location = unflatten(body_pairs);
        plan.body = by_location["body"].dump();
    } else if (op.request_body_schema && op.body_required) {
        fail(ErrorCode::MissingRequiredValue, "operation " + op.id + " requires a request body");
    }
    return plan;
}

// -------- Sending --------

struct SendConfig {
    int timeout_s = 30;
    bool verify_tls = true;
};

class RequestEngine {
public:
    virtual ~RequestEngine() = default;
    virtual HttpExchange execute(const HttpRequestPlan& plan) = 0;
};

class HttpRequestEngine : public RequestEngine {
public:
    explicit HttpRequestEngine(SendConfig cfg = {}) : cfg_(cfg) {}

    HttpExchange execute(const HttpRequestPlan& plan) override { return send(plan, cfg_); }

    // Captures the exchange verbatim; redirects are not followed and status
    // semantics are left entirely to callers.
    static HttpExchange send(const HttpRequestPlan& plan, const SendConfig& cfg) {
        httplib::Client client(plan.base_url);
        client.set_connection_timeout(cfg.timeout_s, 0);
        client.set_read_timeout(cfg.timeout_s, 0);
        client.set_follow_location(false);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
        client.enable_server_certificate_verification(cfg.verify_tls);
#endif
        httplib::Headers headers;
        for (const auto& [k, v] : plan.headers) headers.emplace(k, v);
        if (!plan.cookies.empty()) {
            std::string cookie;
            for (const auto& [k, v] : plan.cookies) {
                if (!cookie.empty()) cookie += "; ";
                cookie += k + "=" + v;
            }
            headers.emplace("Cookie", cookie);
        }

        const std::string target = plan.path_with_query();
        const std::string body = plan.body.value_or("");
        const char* content_type = "application/json";

        const auto started = std::chrono::steady_clock::now();
        httplib::Result res;
        if (plan.method == "GET") {
            res = client.Get(target, headers);
        } else if (plan.method == "POST") {
            res = client.Post(target, headers, body, content_type);
        } else if (plan.method == "PUT") {
            res = client.Put(target, headers, body, content_type);
        } else if (plan.method == "PATCH") {
            res = client.Patch(target, headers, body, content_type);
        } else if (plan.method == "DELETE") {
            res = plan.body ? client.Delete(target, headers, body, content_type)
                            : client.Delete(target, headers);
        } else if (plan.method == "HEAD") {
            res = client.Head(target, headers);
        } else if (plan.method == "OPTIONS") {
            res = client.Options(target, headers);
        } else {
            fail(ErrorCode::ConfigError, "unsupported HTTP method '" + plan.method + "'");
        }
        const auto finished = std::chrono::steady_clock::now();

        if (!res) {
            fail(ErrorCode::TransportError,
                 "could not reach " + plan.url() + ": " + httplib::to_string(res.error()));
        }
        HttpExchange exchange;
        exchange.request = plan;
        exchange.status = res->status;
        for (const auto& [k, v] : res->headers) exchange.response_headers.emplace_back(k, v);
        exchange.response_body = res->body;
        exchange.elapsed_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(finished - started).count();
        return exchange;
    }

private:
    SendConfig cfg_;
};

// -------- Environment initialization scripts --------

struct EnvInitScript {
    std::string command;      // run via /bin/sh -c
    std::string working_dir;  // empty: inherit
    int timeout_s = 60;
};

struct ScriptResult {
    enum class Status { Ok, Failed, Timeout, NotFound };

    Status status = Status::Ok;
    int exit_code = 0;
    std::string output;  // combined stdout + stderr

    bool ok() const { return status == Status::Ok; }

    std::string describe() const {
        switch (status) {
            case Status::Ok: return "ok";
            case Status::Failed: return "exit code " + std::to_string(exit_code);
            case Status::Timeout: return "timed out";
            case Status::NotFound: return "command not found";
        }
        return "?";
    }
};

// Runs the script, blocking until exit or timeout. The child runs in its own
// process group so a timeout can kill the whole tree.
inline ScriptResult run_init_script(const EnvInitScript& script) {
    if (script.timeout_s <= 0) fail(ErrorCode::ConfigError, "init script timeout must be positive");
    int pipe_fd[2];
    if (pipe(pipe_fd) != 0) fail(ErrorCode::IoError, "pipe() failed for init script");

    pid_t pid = fork();
    if (pid < 0) {
        close(pipe_fd[0]);
        close(pipe_fd[1]);
        fail(ErrorCode::IoError, "fork() failed for init script");
    }
    if (pid == 0) {
        setpgid(0, 0);
        dup2(pipe_fd[1], STDOUT_FILENO);
        dup2(pipe_fd[1], STDERR_FILENO);
        close(pipe_fd[0]);
        close(pipe_fd[1]);
        if (!script.working_dir.empty() && chdir(script.working_dir.c_str()) != 0) {
            _exit(126);
        }
        execl("/bin/sh", "sh", "-c", script.command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(pipe_fd[1]);
    fcntl(pipe_fd[0], F_SETFL, O_NONBLOCK);

    ScriptResult result;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(script.timeout_s);
    bool exited = false;
    int wait_status = 0;
    char buf[4096];
    while (true) {
        struct pollfd pfd{pipe_fd[0], POLLIN, 0};
        poll(&pfd, 1, 50);
        ssize_t n;
        while ((n = read(pipe_fd[0], buf, sizeof(buf))) > 0) {
            result.output.append(buf, static_cast<size_t>(n));
        }
        pid_t done = waitpid(pid, &wait_status, WNOHANG);
        if (done == pid) {
            exited = true;
            break;
        }
        if (std::chrono::steady_clock::now() >= deadline) break;
    }
    if (!exited) {
        kill(-pid, SIGKILL);
        waitpid(pid, &wait_status, 0);
        result.status = ScriptResult::Status::Timeout;
        close(pipe_fd[0]);
        return result;
    }
    ssize_t n;
    while ((n = read(pipe_fd[0], buf, sizeof(buf))) > 0) {
        result.output.append(buf, static_cast<size_t>(n));
    }
    close(pipe_fd[0]);

    if (WIFEXITED(wait_status)) {
        result.exit_code = WEXITSTATUS(wait_status);
    } else {
        result.exit_code = -1;
    }
    if (result.exit_code == 0) {
        result.status = ScriptResult::Status::Ok;
    } else if (result.exit_code == 127) {
        result.status = ScriptResult::Status::NotFound;
    } else {
        result.status = ScriptResult::Status::Failed;
    }
    return result;
}

}  // namespace restsuite
