#pragma once

#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "restsuite/common.hpp"

namespace restsuite {

enum class Purpose { Plan, Values, Scenarios, InvalidValues };

inline const char* purpose_name(Purpose p) {
    switch (p) {
        case Purpose::Plan: return "plan";
        case Purpose::Values: return "values";
        case Purpose::Scenarios: return "scenarios";
        case Purpose::InvalidValues: return "invalid_values";
    }
    return "?";
}

inline std::optional<Purpose> purpose_from(std::string_view s) {
    if (s == "plan") return Purpose::Plan;
    if (s == "values") return Purpose::Values;
    if (s == "scenarios") return Purpose::Scenarios;
    if (s == "invalid_values") return Purpose::InvalidValues;
    return std::nullopt;
}

struct ChatMessage {
    enum class Role { System, User, Assistant };

    Role role = Role::User;
    std::string content;

    ChatMessage(Role r, std::string c) : role(r), content(std::move(c)) {
        if (content.empty()) fail(ErrorCode::ConfigError, "chat message content must be non-empty");
    }

    const char* role_name() const {
        switch (role) {
            case Role::System: return "system";
            case Role::User: return "user";
            case Role::Assistant: return "assistant";
        }
        return "?";
    }
};

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;

    long long total() const { return prompt_tokens + completion_tokens; }

    TokenUsage& operator+=(const TokenUsage& other) {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        return *this;
    }
};

struct ProviderConfig {
    std::string endpoint = "https://api.openai.com/v1";
    std::string model = "gpt-4.1-mini";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_s = 60;
    int max_reprompts = 2;
    double temperature = 0.0;

    void validate() const {
        if (timeout_s <= 0) fail(ErrorCode::ConfigError, "provider timeout must be positive");
        if (max_reprompts < 0) fail(ErrorCode::ConfigError, "max re-prompts must be >= 0");
    }
};

struct StructuredRequest {
    std::vector<ChatMessage> messages;
    Json output_schema;  // must describe a single top-level object
    Purpose purpose = Purpose::Plan;
};

// Every provider invocation, including attempts whose output was later
// rejected, lands here exactly once.
class TokenLedger {
public:
    struct Record {
        Purpose purpose;
        TokenUsage usage;
    };

    void add(Purpose purpose, TokenUsage usage) {
        totals_ += usage;
        records_.push_back({purpose, usage});
    }

    const TokenUsage& totals() const { return totals_; }
    size_t invocations() const { return records_.size(); }
    const std::vector<Record>& records() const { return records_; }

    Json to_json() const {
        Json j;
        j["prompt_tokens"] = totals_.prompt_tokens;
        j["completion_tokens"] = totals_.completion_tokens;
        j["total_tokens"] = totals_.total();
        j["invocations"] = invocations();
        return j;
    }

private:
    std::vector<Record> records_;
    TokenUsage totals_;
};

// (total prompt + completion tokens) / test case count.
inline double tokens_per_test_case(const TokenLedger& ledger, size_t test_case_count) {
    if (test_case_count == 0) {
        fail(ErrorCode::NoTestCases, "cannot compute tokens per test case without test cases");
    }
    return static_cast<double>(ledger.totals().total()) / static_cast<double>(test_case_count);
}

// Two-decimal rendering without floating point drift.
inline std::string format_tokens_per_test_case(long long total_tokens, size_t test_case_count) {
    if (test_case_count == 0) return "n/a";
    long long scaled = (total_tokens * 100 + static_cast<long long>(test_case_count) / 2) /
                       static_cast<long long>(test_case_count);
    std::string whole = std::to_string(scaled / 100);
    long long frac = scaled % 100;
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02lld", frac);
    return whole + "." + buf;
}

struct ProviderReply {
    std::string content;
    TokenUsage usage;
};

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual ProviderReply invoke(Purpose purpose, const std::vector<ChatMessage>& messages) = 0;
    virtual std::string name() const = 0;
};

// -------- Scripted provider (replay files) --------

// Replay file: ordered JSON array of {purpose, content, prompt_tokens,
// completion_tokens}. Each invocation consumes the next unused entry whose
// purpose matches; this makes the whole pipeline deterministic.
class ReplayProvider : public LlmProvider {
public:
    struct Entry {
        Purpose purpose = Purpose::Plan;
        std::string content;
        TokenUsage usage;
        bool consumed = false;
    };

    explicit ReplayProvider(std::vector<Entry> entries) : entries_(std::move(entries)) {}

    static ReplayProvider from_json(const Json& doc) {
        if (!doc.is_array()) fail(ErrorCode::ConfigError, "replay file must be a JSON array");
        std::vector<Entry> entries;
        for (const auto& item : doc) {
            if (!item.is_object() || !item.contains("purpose")) {
                fail(ErrorCode::ConfigError, "replay entry needs a 'purpose' field");
            }
            auto purpose = purpose_from(item["purpose"].get<std::string>());
            if (!purpose) {
                fail(ErrorCode::ConfigError,
                     "unknown replay purpose '" + item["purpose"].get<std::string>() + "'");
            }
            Entry e;
            e.purpose = *purpose;
            if (!item.contains("content")) fail(ErrorCode::ConfigError, "replay entry needs 'content'");
            // Content may be the reply text or an embedded JSON value.
            e.content = item["content"].is_string() ? item["content"].get<std::string>()
                                                    : item["content"].dump();
            if (item.contains("prompt_tokens")) e.usage.prompt_tokens = item["prompt_tokens"].get<long long>();
            if (item.contains("completion_tokens")) {
                e.usage.completion_tokens = item["completion_tokens"].get<long long>();
            }
            entries.push_back(std::move(e));
        }
        return ReplayProvider(std::move(entries));
    }

    static ReplayProvider from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorCode::ConfigError, "cannot open replay file '" + path + "'");
        Json doc;
        try {
            in >> doc;
        } catch (const Json::parse_error& e) {
            fail(ErrorCode::ConfigError, "replay file '" + path + "': " + e.what());
        }
        return from_json(doc);
    }

    ProviderReply invoke(Purpose purpose, const std::vector<ChatMessage>&) override {
        for (auto& e : entries_) {
            if (e.consumed || e.purpose != purpose) continue;
            e.consumed = true;
            return {e.content, e.usage};
        }
        fail(ErrorCode::ReplayExhausted,
             std::string("replay file has no remaining entry for purpose '") + purpose_name(purpose) + "'");
    }

    std::string name() const override { return "replay"; }

    size_t remaining() const {
        size_t n = 0;
        for (const auto& e : entries_) {
            if (!e.consumed) ++n;
        }
        return n;
    }

private:
    std::vector<Entry> entries_;
};

// -------- OpenAI-compatible chat-completions provider --------

class HttpLlmProvider : public LlmProvider {
public:
    explicit HttpLlmProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (!key || !*key) {
            fail(ErrorCode::ConfigError,
                 "API key environment variable '" + cfg_.api_key_env + "' is not set");
        }
        api_key_ = key;
    }

    ProviderReply invoke(Purpose, const std::vector<ChatMessage>& messages) override {
        Json body;
        body["model"] = cfg_.model;
        body["temperature"] = cfg_.temperature;
        Json msgs = Json::array();
        for (const auto& m : messages) {
            Json jm;
            jm["role"] = m.role_name();
            jm["content"] = m.content;
            msgs.push_back(std::move(jm));
        }
        body["messages"] = std::move(msgs);
        Json rf;
        rf["type"] = "json_object";
        body["response_format"] = std::move(rf);

        auto [base, path] = split_endpoint(cfg_.endpoint);
        httplib::Client client(base);
        client.set_connection_timeout(cfg_.timeout_s, 0);
        client.set_read_timeout(cfg_.timeout_s, 0);
        httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            if (res.error() == httplib::Error::ConnectionTimeout ||
                res.error() == httplib::Error::Read) {
                fail(ErrorCode::Timeout, "provider request timed out");
            }
            fail(ErrorCode::ProviderUnreachable,
                 std::string("provider transport error: ") + httplib::to_string(res.error()));
        }
        if (res->status < 200 || res->status > 299) {
            fail(ErrorCode::ProviderUnreachable,
                 "provider returned HTTP " + std::to_string(res->status) + ": " +
                     res->body.substr(0, 512));
        }
        Json reply;
        try {
            reply = Json::parse(res->body);
        } catch (const Json::parse_error& e) {
            fail(ErrorCode::ProviderUnreachable, std::string("provider reply is not JSON: ") + e.what());
        }
        ProviderReply out;
        try {
            out.content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const Json::exception&) {
            fail(ErrorCode::ProviderUnreachable, "provider reply lacks choices[0].message.content");
        }
        if (reply.contains("usage") && reply["usage"].is_object()) {
            const Json& u = reply["usage"];
            if (u.contains("prompt_tokens")) out.usage.prompt_tokens = u["prompt_tokens"].get<long long>();
            if (u.contains("completion_tokens")) {
                out.usage.completion_tokens = u["completion_tokens"].get<long long>();
            }
        }
        return out;
    }

    std::string name() const override { return "openai-compatible"; }

private:
    // "https://host[:port][/prefix]" -> (scheme://host:port, /prefix/chat/completions)
    static std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
        std::string rest = endpoint;
        std::string scheme_host;
        size_t scheme = rest.find("://");
        size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
        size_t slash = rest.find('/', host_start);
        std::string prefix;
        if (slash == std::string::npos) {
            scheme_host = rest;
        } else {
            scheme_host = rest.substr(0, slash);
            prefix = rest.substr(slash);
        }
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        if (prefix.size() >= 17 && prefix.substr(prefix.size() - 17) == "/chat/completions") {
            return {scheme_host, prefix};
        }
        return {scheme_host, prefix + "/chat/completions"};
    }

    ProviderConfig cfg_;
    std::string api_key_;
};

// -------- Structured completion with validation and re-prompting --------

namespace detail {

// Minimal JSON-schema subset used for gateway output contracts:
// type / properties / required / items / enum.
inline std::optional<std::string> validate_json_schema(const Json& value, const Json& schema,
                                                       const std::string& at = "$") {
    if (schema.contains("type")) {
        const std::string type = schema["type"].get<std::string>();
        bool ok = (type == "object" && value.is_object()) || (type == "array" && value.is_array()) ||
                  (type == "string" && value.is_string()) ||
                  (type == "integer" && value.is_number_integer()) ||
                  (type == "number" && value.is_number()) ||
                  (type == "boolean" && value.is_boolean()) || (type == "null" && value.is_null());
        if (!ok) return at + " must be of type " + type;
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& allowed : schema["enum"]) {
            if (allowed == value) { found = true; break; }
        }
        if (!found) return at + " must be one of the allowed values";
    }
    if (value.is_object()) {
        if (schema.contains("required")) {
            for (const auto& r : schema["required"]) {
                if (!value.contains(r.get<std::string>())) {
                    return at + " is missing required field '" + r.get<std::string>() + "'";
                }
            }
        }
        if (schema.contains("properties")) {
            for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
                if (!value.contains(it.key())) continue;
                if (auto err = validate_json_schema(value[it.key()], it.value(), at + "." + it.key())) {
                    return err;
                }
            }
        }
    }
    if (value.is_array() && schema.contains("items")) {
        for (size_t i = 0; i < value.size(); ++i) {
            if (auto err = validate_json_schema(value[i], schema["items"],
                                                at + "[" + std::to_string(i) + "]")) {
                return err;
            }
        }
    }
    return std::nullopt;
}

// Models routinely wrap JSON replies in markdown fences.
inline std::string strip_code_fence(std::string_view text) {
    size_t begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return std::string(text);
    size_t end = text.find_last_not_of(" \t\r\n");
    std::string_view body = text.substr(begin, end - begin + 1);
    if (body.rfind("```", 0) == 0) {
        size_t nl = body.find('\n');
        if (nl != std::string_view::npos) {
            body.remove_prefix(nl + 1);
            size_t close = body.rfind("```");
            if (close != std::string_view::npos) body = body.substr(0, close);
        }
    }
    return std::string(body);
}

}  // namespace detail

class LlmGateway {
public:
    // Returns nullopt when the value is acceptable, else a correction the
    // model can act on; rejections trigger a bounded re-prompt.
    using SemanticValidator = std::function<std::optional<std::string>(const Json&)>;

    LlmGateway(ProviderConfig cfg, LlmProvider& provider)
        : cfg_(std::move(cfg)), provider_(provider) {
        cfg_.validate();
    }

    // Invokes the provider, parses the reply as JSON and validates it against
    // req.output_schema (and the optional semantic validator). Malformed or
    // rejected replies are re-prompted up to cfg.max_reprompts times; every
    // attempt is accounted in the ledger.
    std::pair<Json, TokenUsage> complete_structured(const StructuredRequest& req,
                                                    const SemanticValidator& semantic = {}) {
        if (!req.output_schema.is_object() ||
            (req.output_schema.contains("type") && req.output_schema["type"] != "object")) {
            fail(ErrorCode::ConfigError, "output schema must describe a single top-level object");
        }
        std::vector<ChatMessage> messages = req.messages;
        TokenUsage call_usage;
        std::string last_problem;
        for (int attempt = 0; attempt <= cfg_.max_reprompts; ++attempt) {
            ProviderReply reply = provider_.invoke(req.purpose, messages);
            ledger_.add(req.purpose, reply.usage);
            call_usage += reply.usage;

            std::string cleaned = detail::strip_code_fence(reply.content);
            Json parsed;
            bool parse_ok = true;
            try {
                parsed = Json::parse(cleaned);
            } catch (const Json::parse_error& e) {
                parse_ok = false;
                last_problem = std::string("reply is not valid JSON: ") + e.what();
            }
            if (parse_ok) {
                auto schema_err = detail::validate_json_schema(parsed, req.output_schema);
                if (!schema_err && semantic) schema_err = semantic(parsed);
                if (!schema_err) return {parsed, call_usage};
                last_problem = *schema_err;
            }
            if (attempt == cfg_.max_reprompts) break;
            messages.emplace_back(ChatMessage::Role::Assistant,
                                  reply.content.empty() ? "(empty reply)" : reply.content);
            messages.emplace_back(
                ChatMessage::Role::User,
                "Your previous reply was rejected: " + last_problem +
                    "\nReply again with ONLY a corrected JSON object matching the required schema.");
        }
        fail(ErrorCode::MalformedAfterRetries,
             "structured output still invalid after " + std::to_string(cfg_.max_reprompts + 1) +
                 " attempt(s): " + last_problem);
    }

    TokenLedger& ledger() { return ledger_; }
    const TokenLedger& ledger() const { return ledger_; }
    const ProviderConfig& config() const { return cfg_; }

private:
    ProviderConfig cfg_;
    LlmProvider& provider_;
    TokenLedger ledger_;
};

}  // namespace restsuite
