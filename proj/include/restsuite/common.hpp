#pragma once

#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace restsuite {

// Insertion-ordered JSON everywhere: workspace files, collection documents
// and request bodies must serialize to identical bytes across runs.
using Json = nlohmann::ordered_json;

enum class ErrorCode {
    // oas-model
    MalformedDocument,
    UnsupportedVersion,
    UnresolvableRef,
    ExternalRefNotSupported,
    // trace-store
    PayloadTooLarge,
    KeySyntax,
    DuplicateKey,
    MissingKey,
    DanglingReference,
    CycleDetected,
    KeySetMismatch,
    TraceFrozen,
    // llm-gateway
    ProviderUnreachable,
    MalformedAfterRetries,
    Timeout,
    NoTestCases,
    ReplayExhausted,
    // happy-path
    UnknownOperation,
    PlanInvalid,
    SequenceTooLong,
    AssignmentInvalid,
    // request-engine
    MissingRequiredValue,
    UnflattenConflict,
    UnsupportedBodyContent,
    TransportError,
    // negative-generator
    ConstraintNotViolated,
    UnknownKey,
    NoScenarios,
    // test-builder
    DanglingDependency,
    CollectionFormat,
    // reporting / cli
    IoError,
    WorkspaceCorrupt,
    ConfigError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::MalformedDocument: return "MalformedDocument";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::UnresolvableRef: return "UnresolvableRef";
        case ErrorCode::ExternalRefNotSupported: return "ExternalRefNotSupported";
        case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
        case ErrorCode::KeySyntax: return "KeySyntax";
        case ErrorCode::DuplicateKey: return "DuplicateKey";
        case ErrorCode::MissingKey: return "MissingKey";
        case ErrorCode::DanglingReference: return "DanglingReference";
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::KeySetMismatch: return "KeySetMismatch";
        case ErrorCode::TraceFrozen: return "TraceFrozen";
        case ErrorCode::ProviderUnreachable: return "ProviderUnreachable";
        case ErrorCode::MalformedAfterRetries: return "MalformedAfterRetries";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::NoTestCases: return "NoTestCases";
        case ErrorCode::ReplayExhausted: return "ReplayExhausted";
        case ErrorCode::UnknownOperation: return "UnknownOperation";
        case ErrorCode::PlanInvalid: return "PlanInvalid";
        case ErrorCode::SequenceTooLong: return "SequenceTooLong";
        case ErrorCode::AssignmentInvalid: return "AssignmentInvalid";
        case ErrorCode::MissingRequiredValue: return "MissingRequiredValue";
        case ErrorCode::UnflattenConflict: return "UnflattenConflict";
        case ErrorCode::UnsupportedBodyContent: return "UnsupportedBodyContent";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::ConstraintNotViolated: return "ConstraintNotViolated";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::NoScenarios: return "NoScenarios";
        case ErrorCode::DanglingDependency: return "DanglingDependency";
        case ErrorCode::CollectionFormat: return "CollectionFormat";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::WorkspaceCorrupt: return "WorkspaceCorrupt";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string message) {
    throw Error(code, std::move(message));
}

// Reserved literal meaning "omit this parameter/property entirely".
// Request rendering and collection emission drop entries carrying it.
inline constexpr std::string_view kAbsentValue = "<<ABSENT>>";

inline bool is_absent(const Json& v) {
    return v.is_string() && v.get_ref<const std::string&>() == kAbsentValue;
}

inline bool status_is_2xx(int status) { return status >= 200 && status <= 299; }
inline bool status_is_4xx(int status) { return status >= 400 && status <= 499; }
inline bool status_is_5xx(int status) { return status >= 500 && status <= 599; }

// RFC 3986 percent-encoding; keeps unreserved characters only.
inline std::string percent_encode(std::string_view raw) {
    static const char hex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(raw.size());
    for (unsigned char c : raw) {
        if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

// File-system and variable-name safe rendering of an operation id.
inline std::string sanitize_id(std::string_view id) {
    std::string out;
    out.reserve(id.size());
    for (char c : id) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
            out.push_back(c);
        } else {
            out.push_back('_');
        }
    }
    if (out.empty()) out = "_";
    return out;
}

// Scalar-to-text used for path/query/header values and variable extraction.
inline std::string literal_to_text(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

}  // namespace restsuite
