#pragma once

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "restsuite/common.hpp"
#include "restsuite/oas.hpp"

namespace restsuite {

struct SchemaViolation {
    ConstraintKind kind = ConstraintKind::Type;
    std::string detail;
};

namespace detail {

inline bool matches_kind(const Json& value, const std::string& kind) {
    if (kind.empty()) return true;
    if (kind == "string") return value.is_string();
    if (kind == "integer") return value.is_number_integer();
    if (kind == "number") return value.is_number();
    if (kind == "boolean") return value.is_boolean();
    if (kind == "object") return value.is_object();
    if (kind == "array") return value.is_array();
    if (kind == "null") return value.is_null();
    return true;  // unknown kinds are not checked
}

inline bool valid_date(const std::string& s) {
    static const std::regex re(R"(^(\d{4})-(\d{2})-(\d{2})$)");
    std::smatch m;
    if (!std::regex_match(s, m, re)) return false;
    int year = std::stoi(m[1]), month = std::stoi(m[2]), day = std::stoi(m[3]);
    if (month < 1 || month > 12 || day < 1) return false;
    static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int max_day = days[month - 1];
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && leap) max_day = 29;
    return day <= max_day;
}

inline bool valid_date_time(const std::string& s) {
    static const std::regex re(
        R"(^\d{4}-\d{2}-\d{2}[Tt]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$)");
    if (!std::regex_match(s, re)) return false;
    return valid_date(s.substr(0, 10));
}

inline bool valid_uuid(const std::string& s) {
    static const std::regex re(
        R"(^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$)");
    return std::regex_match(s, re);
}

inline bool valid_email(const std::string& s) {
    static const std::regex re(R"(^[^@\s]+@[^@\s]+\.[^@\s]+$)");
    return std::regex_match(s, re);
}

}  // namespace detail

// Formats this build can verify mechanically; structural Format scenarios
// are only accepted for these.
inline bool format_is_checkable(const std::string& format) {
    return format == "date" || format == "date-time" || format == "uuid" || format == "email";
}

inline bool format_matches(const std::string& format, const std::string& value) {
    if (format == "date") return detail::valid_date(value);
    if (format == "date-time") return detail::valid_date_time(value);
    if (format == "uuid") return detail::valid_uuid(value);
    if (format == "email") return detail::valid_email(value);
    return true;
}

// Checks a value against one schema node; recurses through objects/arrays.
// Returns every violated constraint, typed so callers can confirm that a
// specific cited constraint is the one being broken.
inline std::vector<SchemaViolation> schema_check(const Json& value, const SchemaNode& schema,
                                                 int depth = 0) {
    std::vector<SchemaViolation> out;
    if (depth > 16 || schema.recursion_marker) return out;
    if (value.is_null()) {
        if (!schema.nullable && !schema.kind.empty() && schema.kind != "null") {
            out.push_back({ConstraintKind::Type, "null where " + schema.kind + " expected"});
        }
        return out;
    }
    if (!detail::matches_kind(value, schema.kind)) {
        out.push_back({ConstraintKind::Type,
                       "value " + value.dump() + " is not of type " + schema.kind});
        // Remaining constraints presume the declared type.
        return out;
    }
    if (!schema.enum_values.empty()) {
        bool found = false;
        for (const auto& allowed : schema.enum_values) {
            if (allowed == value) { found = true; break; }
        }
        if (!found) out.push_back({ConstraintKind::Enum, "value " + value.dump() + " not in enum"});
    }
    if (value.is_number()) {
        const double v = value.get<double>();
        if (schema.minimum) {
            bool bad = schema.exclusive_minimum ? v <= *schema.minimum : v < *schema.minimum;
            if (bad) out.push_back({ConstraintKind::Range, value.dump() + " below minimum"});
        }
        if (schema.maximum) {
            bool bad = schema.exclusive_maximum ? v >= *schema.maximum : v > *schema.maximum;
            if (bad) out.push_back({ConstraintKind::Range, value.dump() + " above maximum"});
        }
    }
    if (value.is_string()) {
        const std::string& s = value.get_ref<const std::string&>();
        if (schema.min_length && s.size() < *schema.min_length) {
            out.push_back({ConstraintKind::Length, "shorter than minLength"});
        }
        if (schema.max_length && s.size() > *schema.max_length) {
            out.push_back({ConstraintKind::Length, "longer than maxLength"});
        }
        if (!schema.pattern.empty()) {
            try {
                std::regex re(schema.pattern, std::regex::ECMAScript);
                if (!std::regex_search(s, re)) {
                    out.push_back({ConstraintKind::Pattern, "does not match pattern"});
                }
            } catch (const std::regex_error&) {
                // Unsupported pattern syntax: not checkable, not a violation.
            }
        }
        if (!schema.format.empty() && format_is_checkable(schema.format) &&
            !format_matches(schema.format, s)) {
            out.push_back({ConstraintKind::Format, "does not match format " + schema.format});
        }
    }
    if (value.is_object()) {
        for (const auto& required : schema.required_properties) {
            if (!value.contains(required)) {
                out.push_back({ConstraintKind::Required, "missing required property '" + required + "'"});
            }
        }
        for (const auto& [name, child] : schema.properties) {
            if (!value.contains(name)) continue;
            for (auto& v : schema_check(value[name], child, depth + 1)) {
                v.detail = name + ": " + v.detail;
                out.push_back(std::move(v));
            }
        }
    }
    if (value.is_array() && schema.items) {
        for (size_t i = 0; i < value.size(); ++i) {
            for (auto& v : schema_check(value[i], *schema.items, depth + 1)) {
                v.detail = "[" + std::to_string(i) + "]: " + v.detail;
                out.push_back(std::move(v));
            }
        }
    }
    return out;
}

inline bool violates(const Json& value, const SchemaNode& schema, ConstraintKind kind) {
    for (const auto& v : schema_check(value, schema)) {
        if (v.kind == kind) return true;
    }
    return false;
}

inline bool satisfies(const Json& value, const SchemaNode& schema) {
    return schema_check(value, schema).empty();
}

// A constraint kind the negative generator can verify an override against.
inline bool constraint_is_checkable(const SchemaNode& schema, ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::Format:
            return format_is_checkable(schema.format);
        case ConstraintKind::Pattern: {
            try {
                std::regex re(schema.pattern, std::regex::ECMAScript);
                (void)re;
                return true;
            } catch (const std::regex_error&) {
                return false;
            }
        }
        default:
            return true;
    }
}

}  // namespace restsuite
