#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "restsuite/common.hpp"
#include "restsuite/trace.hpp"

namespace restsuite {

// -------- Resolved schema model --------

struct SchemaNode {
    // "string" | "number" | "integer" | "boolean" | "array" | "object" | "null";
    // empty when the document declares no type.
    std::string kind;
    std::string format;
    std::vector<Json> enum_values;
    std::optional<double> minimum;
    std::optional<double> maximum;
    bool exclusive_minimum = false;
    bool exclusive_maximum = false;
    std::optional<size_t> min_length;
    std::optional<size_t> max_length;
    std::string pattern;
    std::vector<std::string> required_properties;
    std::vector<std::pair<std::string, SchemaNode>> properties;  // document order
    std::shared_ptr<SchemaNode> items;
    // oneOf/anyOf alternatives, all retained; the node itself adopts the
    // first alternative for value generation.
    std::vector<SchemaNode> alternatives;
    bool nullable = false;
    // Reference chain hit the expansion depth limit here.
    bool recursion_marker = false;
    // Vendor extensions kept verbatim, never interpreted.
    Json extensions = Json::object();

    const SchemaNode* property(std::string_view name) const {
        for (const auto& [n, s] : properties) {
            if (n == name) return &s;
        }
        return nullptr;
    }

    bool property_required(std::string_view name) const {
        return std::find(required_properties.begin(), required_properties.end(), name) !=
               required_properties.end();
    }
};

struct ParameterSpec {
    std::string name;
    Location location = Location::Query;  // Path | Query | Header | Cookie (Body lives in request_body_schema)
    bool required = false;
    SchemaNode schema;
};

struct ApiOperation {
    std::string id;
    std::string method;  // upper-case GET/POST/PUT/PATCH/DELETE/HEAD/OPTIONS
    std::string path_template;
    std::vector<ParameterSpec> parameters;
    std::optional<SchemaNode> request_body_schema;
    bool body_required = false;
    std::string body_content_type;  // set when a requestBody is declared
    std::vector<std::pair<std::string, SchemaNode>> response_schemas;  // status pattern -> schema
    std::string description;
    Json extensions = Json::object();

    const ParameterSpec* find_parameter(std::string_view name, Location loc) const {
        for (const auto& p : parameters) {
            if (p.name == name && p.location == loc) return &p;
        }
        return nullptr;
    }
};

struct ApiSpec {
    std::string title;
    std::string version;
    std::vector<std::string> servers;
    std::vector<ApiOperation> operations;

    const ApiOperation* find(std::string_view operation_id) const {
        for (const auto& op : operations) {
            if (op.id == operation_id) return &op;
        }
        return nullptr;
    }
};

// -------- YAML -> JSON --------

namespace detail {

inline Json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
            return Json();
        case YAML::NodeType::Scalar: {
            const std::string& s = node.Scalar();
            // Quoted or explicitly tagged scalars stay strings.
            if (node.Tag() == "!") return Json(s);
            if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") return Json();
            if (s == "true" || s == "True" || s == "TRUE") return Json(true);
            if (s == "false" || s == "False" || s == "FALSE") return Json(false);
            try {
                size_t pos = 0;
                long long i = std::stoll(s, &pos);
                if (pos == s.size()) return Json(i);
            } catch (...) {}
            try {
                size_t pos = 0;
                double d = std::stod(s, &pos);
                if (pos == s.size()) return Json(d);
            } catch (...) {}
            return Json(s);
        }
        case YAML::NodeType::Sequence: {
            Json arr = Json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            Json obj = Json::object();
            for (const auto& kv : node) {
                if (!kv.first.IsScalar()) {
                    fail(ErrorCode::MalformedDocument, "non-scalar mapping key in YAML document");
                }
                obj[kv.first.Scalar()] = yaml_to_json(kv.second);
            }
            return obj;
        }
        default:
            fail(ErrorCode::MalformedDocument, "undefined YAML node");
    }
}

}  // namespace detail

enum class DocFormat { Auto, JsonText, YamlText };

inline Json load_document_text(std::string_view text, DocFormat hint = DocFormat::Auto) {
    size_t first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        fail(ErrorCode::MalformedDocument, "document is empty");
    }
    bool as_json = hint == DocFormat::JsonText ||
                   (hint == DocFormat::Auto && (text[first] == '{' || text[first] == '['));
    if (as_json) {
        try {
            return Json::parse(text);
        } catch (const Json::parse_error& e) {
            fail(ErrorCode::MalformedDocument, std::string("JSON syntax: ") + e.what());
        }
    }
    try {
        YAML::Node root = YAML::Load(std::string(text));
        return detail::yaml_to_json(root);
    } catch (const YAML::Exception& e) {
        fail(ErrorCode::MalformedDocument, std::string("YAML syntax: ") + e.what());
    }
}

// -------- $ref resolution --------

inline constexpr int kMaxRefExpansions = 3;

namespace detail {

inline std::string json_pointer_unescape(std::string token) {
    std::string out;
    out.reserve(token.size());
    for (size_t i = 0; i < token.size(); ++i) {
        if (token[i] == '~' && i + 1 < token.size()) {
            if (token[i + 1] == '0') { out.push_back('~'); ++i; continue; }
            if (token[i + 1] == '1') { out.push_back('/'); ++i; continue; }
        }
        out.push_back(token[i]);
    }
    return out;
}

inline const Json* lookup_pointer(const Json& root, std::string_view pointer) {
    // pointer looks like "#/components/schemas/Item"
    if (pointer.size() < 2 || pointer[0] != '#' || pointer[1] != '/') return nullptr;
    const Json* node = &root;
    std::string_view rest = pointer.substr(2);
    while (!rest.empty()) {
        size_t slash = rest.find('/');
        std::string token = json_pointer_unescape(std::string(rest.substr(0, slash)));
        if (node->is_object()) {
            auto it = node->find(token);
            if (it == node->end()) return nullptr;
            node = &*it;
        } else if (node->is_array()) {
            size_t idx = 0;
            try { idx = std::stoul(token); } catch (...) { return nullptr; }
            if (idx >= node->size()) return nullptr;
            node = &(*node)[idx];
        } else {
            return nullptr;
        }
        if (slash == std::string_view::npos) break;
        rest = rest.substr(slash + 1);
    }
    return node;
}

inline Json resolve_node(const Json& node, const Json& root,
                         std::map<std::string, int>& expansions) {
    if (node.is_array()) {
        Json out = Json::array();
        for (const auto& item : node) out.push_back(resolve_node(item, root, expansions));
        return out;
    }
    if (!node.is_object()) return node;
    if (node.contains("$ref")) {
        if (!node["$ref"].is_string()) {
            fail(ErrorCode::MalformedDocument, "$ref must be a string");
        }
        const std::string ref = node["$ref"].get<std::string>();
        if (ref.rfind("#/", 0) != 0) {
            fail(ErrorCode::ExternalRefNotSupported, "external reference '" + ref + "'");
        }
        const Json* target = lookup_pointer(root, ref);
        if (!target) fail(ErrorCode::UnresolvableRef, "no such reference target '" + ref + "'");
        int& count = expansions[ref];
        if (count >= kMaxRefExpansions) {
            Json marker = Json::object();
            marker["x-recursive-ref"] = ref;
            return marker;
        }
        ++count;
        Json out = resolve_node(*target, root, expansions);
        --count;
        return out;
    }
    Json out = Json::object();
    for (auto it = node.begin(); it != node.end(); ++it) {
        out[it.key()] = resolve_node(it.value(), root, expansions);
    }
    return out;
}

}  // namespace detail

// Inlines every internal "$ref" in the document. Reference chains expand at
// most kMaxRefExpansions times, then an opaque recursion marker object is
// substituted. Idempotent: a resolved document resolves to itself.
inline Json resolve_refs(const Json& document) {
    std::map<std::string, int> expansions;
    return detail::resolve_node(document, document, expansions);
}

// -------- Model construction --------

namespace detail {

inline SchemaNode build_schema(const Json& js);

inline void apply_numeric_bound(const Json& js, const char* plain, const char* exclusive,
                                std::optional<double>& bound, bool& is_exclusive) {
    if (js.contains(plain) && js[plain].is_number()) {
        bound = js[plain].get<double>();
    }
    if (js.contains(exclusive)) {
        const Json& ex = js[exclusive];
        if (ex.is_boolean()) {
            is_exclusive = ex.get<bool>();
        } else if (ex.is_number()) {
            // 3.1 style: the exclusive bound carries the value itself.
            bound = ex.get<double>();
            is_exclusive = true;
        }
    }
}

inline SchemaNode build_schema(const Json& js) {
    SchemaNode node;
    if (js.is_boolean()) {
        // JSON Schema boolean form; `true` means "anything".
        return node;
    }
    if (!js.is_object()) {
        fail(ErrorCode::MalformedDocument, "schema must be an object");
    }
    if (js.contains("x-recursive-ref")) {
        node.recursion_marker = true;
        node.kind = "object";
        return node;
    }
    if (js.contains("type")) {
        const Json& t = js["type"];
        if (t.is_string()) {
            node.kind = t.get<std::string>();
        } else if (t.is_array()) {
            // 3.1 type arrays: first non-null entry wins, "null" maps to nullable.
            for (const auto& alt : t) {
                if (!alt.is_string()) continue;
                if (alt.get<std::string>() == "null") {
                    node.nullable = true;
                } else if (node.kind.empty()) {
                    node.kind = alt.get<std::string>();
                }
            }
        }
    }
    if (js.contains("format") && js["format"].is_string()) node.format = js["format"].get<std::string>();
    if (js.contains("nullable") && js["nullable"].is_boolean()) node.nullable = js["nullable"].get<bool>();
    if (js.contains("enum") && js["enum"].is_array()) {
        for (const auto& v : js["enum"]) node.enum_values.push_back(v);
        if (node.kind.empty() && !node.enum_values.empty()) {
            if (node.enum_values.front().is_string()) node.kind = "string";
            else if (node.enum_values.front().is_number_integer()) node.kind = "integer";
            else if (node.enum_values.front().is_number()) node.kind = "number";
            else if (node.enum_values.front().is_boolean()) node.kind = "boolean";
        }
    }
    apply_numeric_bound(js, "minimum", "exclusiveMinimum", node.minimum, node.exclusive_minimum);
    apply_numeric_bound(js, "maximum", "exclusiveMaximum", node.maximum, node.exclusive_maximum);
    if (node.minimum && node.maximum && *node.minimum > *node.maximum) {
        fail(ErrorCode::MalformedDocument, "schema bounds violate minimum <= maximum");
    }
    if (js.contains("minLength") && js["minLength"].is_number_unsigned()) {
        node.min_length = js["minLength"].get<size_t>();
    }
    if (js.contains("maxLength") && js["maxLength"].is_number_unsigned()) {
        node.max_length = js["maxLength"].get<size_t>();
    }
    if (node.min_length && node.max_length && *node.min_length > *node.max_length) {
        fail(ErrorCode::MalformedDocument, "schema bounds violate minLength <= maxLength");
    }
    if (js.contains("pattern") && js["pattern"].is_string()) node.pattern = js["pattern"].get<std::string>();
    if (js.contains("required") && js["required"].is_array()) {
        for (const auto& r : js["required"]) {
            if (r.is_string()) node.required_properties.push_back(r.get<std::string>());
        }
    }
    if (js.contains("properties") && js["properties"].is_object()) {
        if (node.kind.empty()) node.kind = "object";
        for (auto it = js["properties"].begin(); it != js["properties"].end(); ++it) {
            node.properties.emplace_back(it.key(), build_schema(it.value()));
        }
    }
    if (js.contains("items")) {
        if (node.kind.empty()) node.kind = "array";
        node.items = std::make_shared<SchemaNode>(build_schema(js["items"]));
    }
    if (js.contains("allOf") && js["allOf"].is_array()) {
        // Folded conservatively: properties and required lists accumulate.
        for (const auto& part : js["allOf"]) {
            SchemaNode sub = build_schema(part);
            if (node.kind.empty()) node.kind = sub.kind;
            for (auto& p : sub.properties) {
                if (!node.property(p.first)) node.properties.push_back(std::move(p));
            }
            for (auto& r : sub.required_properties) {
                if (!node.property_required(r)) node.required_properties.push_back(std::move(r));
            }
            if (!sub.format.empty() && node.format.empty()) node.format = sub.format;
            if (sub.minimum && (!node.minimum || *sub.minimum > *node.minimum)) node.minimum = sub.minimum;
            if (sub.maximum && (!node.maximum || *sub.maximum < *node.maximum)) node.maximum = sub.maximum;
            if (!sub.pattern.empty() && node.pattern.empty()) node.pattern = sub.pattern;
            if (sub.items && !node.items) node.items = sub.items;
        }
        if (node.kind.empty()) node.kind = "object";
    }
    for (const char* alt_key : {"oneOf", "anyOf"}) {
        if (js.contains(alt_key) && js[alt_key].is_array()) {
            for (const auto& part : js[alt_key]) {
                node.alternatives.push_back(build_schema(part));
            }
        }
    }
    if (!node.alternatives.empty() && node.kind.empty() && node.properties.empty()) {
        // First alternative drives value generation.
        SchemaNode first = node.alternatives.front();
        first.alternatives = node.alternatives;
        first.extensions = node.extensions;
        return first;
    }
    for (auto it = js.begin(); it != js.end(); ++it) {
        if (it.key().rfind("x-", 0) == 0) node.extensions[it.key()] = it.value();
    }
    return node;
}

inline std::vector<std::string> path_placeholders(const std::string& path_template) {
    std::vector<std::string> names;
    size_t pos = 0;
    while (pos < path_template.size()) {
        size_t open = path_template.find('{', pos);
        if (open == std::string::npos) break;
        size_t close = path_template.find('}', open);
        if (close == std::string::npos) {
            fail(ErrorCode::MalformedDocument, "unterminated '{' in path '" + path_template + "'");
        }
        names.push_back(path_template.substr(open + 1, close - open - 1));
        pos = close + 1;
    }
    return names;
}

inline ParameterSpec build_parameter(const Json& js, const std::string& where) {
    if (!js.is_object() || !js.contains("name") || !js.contains("in")) {
        fail(ErrorCode::MalformedDocument, "parameter in " + where + " needs 'name' and 'in'");
    }
    ParameterSpec p;
    p.name = js["name"].get<std::string>();
    const std::string in = js["in"].get<std::string>();
    if (in == "path") p.location = Location::Path;
    else if (in == "query") p.location = Location::Query;
    else if (in == "header") p.location = Location::Header;
    else if (in == "cookie") p.location = Location::Cookie;
    else fail(ErrorCode::MalformedDocument, "parameter '" + p.name + "' has unknown location '" + in + "'");
    p.required = js.contains("required") && js["required"].is_boolean() && js["required"].get<bool>();
    if (p.location == Location::Path) p.required = true;  // forced by the format
    if (js.contains("schema")) {
        p.schema = build_schema(js["schema"]);
    } else if (js.contains("content") && js["content"].is_object() && !js["content"].empty()) {
        const Json& media = js["content"].begin().value();
        if (media.is_object() && media.contains("schema")) p.schema = build_schema(media["schema"]);
    }
    return p;
}

inline const Json* pick_json_media(const Json& content, std::string* content_type_out) {
    if (!content.is_object()) return nullptr;
    for (auto it = content.begin(); it != content.end(); ++it) {
        const std::string& ct = it.key();
        if (ct == "application/json" || ct.rfind("application/json;", 0) == 0 ||
            ct == "*/*") {
            *content_type_out = ct;
            return &it.value();
        }
    }
    if (!content.empty()) {
        *content_type_out = content.begin().key();
    }
    return nullptr;
}

}  // namespace detail

// Parses and fully resolves an OpenAPI 3.x document into the in-memory model.
inline ApiSpec parse_spec(std::string_view document, DocFormat hint = DocFormat::Auto) {
    if (document.empty()) fail(ErrorCode::MalformedDocument, "document is empty");
    Json raw = load_document_text(document, hint);
    if (!raw.is_object()) fail(ErrorCode::MalformedDocument, "top level must be an object");
    if (raw.contains("swagger")) {
        fail(ErrorCode::UnsupportedVersion,
             "OpenAPI 2.x (swagger) documents are not supported; supply a 3.x document");
    }
    if (!raw.contains("openapi") || !raw["openapi"].is_string()) {
        fail(ErrorCode::UnsupportedVersion, "missing 'openapi' version field");
    }
    const std::string version = raw["openapi"].get<std::string>();
    if (version.rfind("3.", 0) != 0) {
        fail(ErrorCode::UnsupportedVersion, "unsupported OpenAPI version '" + version + "'");
    }

    Json doc = resolve_refs(raw);

    ApiSpec spec;
    if (doc.contains("info") && doc["info"].is_object()) {
        const Json& info = doc["info"];
        if (info.contains("title") && info["title"].is_string()) spec.title = info["title"].get<std::string>();
        if (info.contains("version") && info["version"].is_string()) spec.version = info["version"].get<std::string>();
    }
    if (doc.contains("servers") && doc["servers"].is_array()) {
        for (const auto& server : doc["servers"]) {
            if (server.is_object() && server.contains("url") && server["url"].is_string()) {
                spec.servers.push_back(server["url"].get<std::string>());
            }
        }
    }

    std::map<std::string, int> used_ids;
    auto unique_id = [&](std::string base) {
        int& n = used_ids[base];
        ++n;
        if (n == 1) return base;
        return base + "_" + std::to_string(n);
    };

    if (doc.contains("paths") && doc["paths"].is_object()) {
        static const char* methods[] = {"get", "put", "post", "delete", "options", "head", "patch"};
        for (auto path_it = doc["paths"].begin(); path_it != doc["paths"].end(); ++path_it) {
            const std::string path_template = path_it.key();
            const Json& path_item = path_it.value();
            if (!path_item.is_object()) continue;

            std::vector<ParameterSpec> shared_params;
            if (path_item.contains("parameters") && path_item["parameters"].is_array()) {
                for (const auto& pj : path_item["parameters"]) {
                    shared_params.push_back(detail::build_parameter(pj, path_template));
                }
            }

            for (const char* method : methods) {
                if (!path_item.contains(method)) continue;
                const Json& opj = path_item[method];
                if (!opj.is_object()) continue;

                ApiOperation op;
                op.method = method;
                std::transform(op.method.begin(), op.method.end(), op.method.begin(),
                               [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
                op.path_template = path_template;

                std::string base_id;
                if (opj.contains("operationId") && opj["operationId"].is_string()) {
                    base_id = opj["operationId"].get<std::string>();
                } else {
                    base_id = op.method + " " + path_template;
                }
                op.id = unique_id(base_id);

                if (opj.contains("description") && opj["description"].is_string()) {
                    op.description = opj["description"].get<std::string>();
                } else if (opj.contains("summary") && opj["summary"].is_string()) {
                    op.description = opj["summary"].get<std::string>();
                }

                op.parameters = shared_params;
                if (opj.contains("parameters") && opj["parameters"].is_array()) {
                    for (const auto& pj : opj["parameters"]) {
                        ParameterSpec p = detail::build_parameter(pj, op.id);
                        // Operation-level declarations override shared ones.
                        auto dup = std::find_if(op.parameters.begin(), op.parameters.end(),
                                                [&](const ParameterSpec& q) {
                                                    return q.name == p.name && q.location == p.location;
                                                });
                        if (dup != op.parameters.end()) *dup = std::move(p);
                        else op.parameters.push_back(std::move(p));
                    }
                }

                if (opj.contains("requestBody") && opj["requestBody"].is_object()) {
                    const Json& rb = opj["requestBody"];
                    op.body_required = rb.contains("required") && rb["required"].is_boolean() &&
                                       rb["required"].get<bool>();
                    if (rb.contains("content")) {
                        const Json* media = detail::pick_json_media(rb["content"], &op.body_content_type);
                        if (media && media->is_object() && media->contains("schema")) {
                            op.request_body_schema = detail::build_schema((*media)["schema"]);
                        } else if (media) {
                            op.request_body_schema = SchemaNode{};
                        }
                    }
                }

                if (opj.contains("responses") && opj["responses"].is_object()) {
                    for (auto rit = opj["responses"].begin(); rit != opj["responses"].end(); ++rit) {
                        if (!rit.value().is_object()) continue;
                        std::string ct;
                        if (rit.value().contains("content")) {
                            const Json* media = detail::pick_json_media(rit.value()["content"], &ct);
                            if (media && media->is_object() && media->contains("schema")) {
                                op.response_schemas.emplace_back(rit.key(),
                                                                 detail::build_schema((*media)["schema"]));
                                continue;
                            }
                        }
                        op.response_schemas.emplace_back(rit.key(), SchemaNode{});
                    }
                }

                for (auto eit = opj.begin(); eit != opj.end(); ++eit) {
                    if (eit.key().rfind("x-", 0) == 0) op.extensions[eit.key()] = eit.value();
                }

                // Every {placeholder} needs exactly one required path parameter.
                for (const std::string& name : detail::path_placeholders(path_template)) {
                    int count = 0;
                    for (const auto& p : op.parameters) {
                        if (p.location == Location::Path && p.name == name) ++count;
                    }
                    if (count != 1) {
                        fail(ErrorCode::MalformedDocument,
                             "path placeholder '{" + name + "}' of " + op.id +
                                 (count == 0 ? " has no matching path parameter"
                                             : " is declared more than once"));
                    }
                }
                for (const auto& p : op.parameters) {
                    if (p.location != Location::Path) continue;
                    auto names = detail::path_placeholders(path_template);
                    if (std::find(names.begin(), names.end(), p.name) == names.end()) {
                        fail(ErrorCode::MalformedDocument,
                             "path parameter '" + p.name + "' of " + op.id + " has no placeholder");
                    }
                }

                spec.operations.push_back(std::move(op));
            }
        }
    }
    return spec;
}

// -------- Constraint catalog --------

enum class ConstraintKind { Type, Format, Enum, Range, Length, Pattern, Required };

inline const char* constraint_kind_name(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::Type: return "Type";
        case ConstraintKind::Format: return "Format";
        case ConstraintKind::Enum: return "Enum";
        case ConstraintKind::Range: return "Range";
        case ConstraintKind::Length: return "Length";
        case ConstraintKind::Pattern: return "Pattern";
        case ConstraintKind::Required: return "Required";
    }
    return "?";
}

inline std::optional<ConstraintKind> constraint_kind_from(std::string_view s) {
    if (s == "Type") return ConstraintKind::Type;
    if (s == "Format") return ConstraintKind::Format;
    if (s == "Enum") return ConstraintKind::Enum;
    if (s == "Range") return ConstraintKind::Range;
    if (s == "Length") return ConstraintKind::Length;
    if (s == "Pattern") return ConstraintKind::Pattern;
    if (s == "Required") return ConstraintKind::Required;
    return std::nullopt;
}

struct ConstraintEntry {
    // Parameter name for path/query/header/cookie parameters; "body" plus a
    // dotted property path for body positions ("[]" steps into array items).
    std::string locator;
    ConstraintKind kind = ConstraintKind::Type;
    Json payload;

    Json to_json() const {
        Json j;
        j["locator"] = locator;
        j["kind"] = constraint_kind_name(kind);
        if (!payload.is_null()) j["payload"] = payload;
        return j;
    }
};

struct ConstraintCatalog {
    std::string operation_id;
    std::vector<ConstraintEntry> entries;

    bool has(std::string_view locator, ConstraintKind kind) const {
        for (const auto& e : entries) {
            if (e.locator == locator && e.kind == kind) return true;
        }
        return false;
    }

    const ConstraintEntry* find(std::string_view locator, ConstraintKind kind) const {
        for (const auto& e : entries) {
            if (e.locator == locator && e.kind == kind) return &e;
        }
        return nullptr;
    }

    Json to_json() const {
        Json arr = Json::array();
        for (const auto& e : entries) arr.push_back(e.to_json());
        Json j;
        j["operation_id"] = operation_id;
        j["entries"] = std::move(arr);
        return j;
    }
};

namespace detail {

inline void collect_schema_constraints(const SchemaNode& schema, const std::string& locator,
                                       std::vector<ConstraintEntry>& out, int depth) {
    if (depth > 16 || schema.recursion_marker) return;
    if (!schema.kind.empty()) {
        out.push_back({locator, ConstraintKind::Type, Json(schema.kind)});
    }
    if (!schema.format.empty()) {
        out.push_back({locator, ConstraintKind::Format, Json(schema.format)});
    }
    if (!schema.enum_values.empty()) {
        Json values = Json::array();
        for (const auto& v : schema.enum_values) values.push_back(v);
        out.push_back({locator, ConstraintKind::Enum, std::move(values)});
    }
    if (schema.minimum || schema.maximum) {
        Json range;
        range["minimum"] = schema.minimum ? Json(*schema.minimum) : Json();
        range["maximum"] = schema.maximum ? Json(*schema.maximum) : Json();
        if (schema.exclusive_minimum) range["exclusive_minimum"] = true;
        if (schema.exclusive_maximum) range["exclusive_maximum"] = true;
        out.push_back({locator, ConstraintKind::Range, std::move(range)});
    }
    if (schema.min_length || schema.max_length) {
        Json len;
        len["min_length"] = schema.min_length ? Json(*schema.min_length) : Json();
        len["max_length"] = schema.max_length ? Json(*schema.max_length) : Json();
        out.push_back({locator, ConstraintKind::Length, std::move(len)});
    }
    if (!schema.pattern.empty()) {
        out.push_back({locator, ConstraintKind::Pattern, Json(schema.pattern)});
    }
    for (size_t i = 0; i < schema.alternatives.size(); ++i) {
        const SchemaNode& alt = schema.alternatives[i];
        if (!alt.kind.empty()) {
            Json payload;
            payload["alternative"] = i;
            payload["type"] = alt.kind;
            out.push_back({locator, ConstraintKind::Type, std::move(payload)});
        }
    }
    for (const auto& [name, child] : schema.properties) {
        const std::string child_locator = locator + "." + name;
        if (schema.property_required(name)) {
            out.push_back({child_locator, ConstraintKind::Required, Json()});
        }
        collect_schema_constraints(child, child_locator, out, depth + 1);
    }
    if (schema.items) {
        collect_schema_constraints(*schema.items, locator + "[]", out, depth + 1);
    }
}

}  // namespace detail

// One catalog entry per declared constraint of the operation; negative
// structural scenarios must cite one of these entries.
inline ConstraintCatalog constraint_catalog(const ApiOperation& op) {
    ConstraintCatalog catalog;
    catalog.operation_id = op.id;
    for (const auto& p : op.parameters) {
        if (p.required) {
            catalog.entries.push_back({p.name, ConstraintKind::Required, Json()});
        }
        detail::collect_schema_constraints(p.schema, p.name, catalog.entries, 0);
    }
    if (op.request_body_schema) {
        if (op.body_required) {
            catalog.entries.push_back({"body", ConstraintKind::Required, Json()});
        }
        detail::collect_schema_constraints(*op.request_body_schema, "body", catalog.entries, 0);
    }
    return catalog;
}

// Resolves a catalog locator back to the schema node it constrains.
inline const SchemaNode* locate_schema(const ApiOperation& op, std::string_view locator) {
    std::string_view rest = locator;
    const SchemaNode* node = nullptr;
    if (rest == "body" || rest.rfind("body.", 0) == 0 || rest.rfind("body[]", 0) == 0) {
        if (!op.request_body_schema) return nullptr;
        node = &*op.request_body_schema;
        rest.remove_prefix(4);
    } else {
        size_t end = rest.find_first_of(".[");
        std::string name(rest.substr(0, end));
        for (const auto& p : op.parameters) {
            if (p.name == name) { node = &p.schema; break; }
        }
        if (!node) return nullptr;
        rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
    }
    while (!rest.empty() && node) {
        if (rest.rfind("[]", 0) == 0) {
            node = node->items ? node->items.get() : nullptr;
            rest.remove_prefix(2);
        } else if (rest.front() == '.') {
            rest.remove_prefix(1);
            size_t end = rest.find_first_of(".[");
            std::string name(rest.substr(0, end));
            node = node->property(name);
            rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
        } else {
            return nullptr;
        }
    }
    return node;
}

// -------- Operation summary (prompt context) --------

namespace detail {

inline std::string schema_type_line(const SchemaNode& s) {
    if (s.recursion_marker) return "(recursive)";
    std::string out = s.kind.empty() ? "any" : s.kind;
    if (!s.format.empty()) out += "(" + s.format + ")";
    if (s.minimum || s.maximum) {
        out += " range[";
        out += s.minimum ? Json(*s.minimum).dump() : "-inf";
        out += "..";
        out += s.maximum ? Json(*s.maximum).dump() : "+inf";
        out += "]";
        if (s.exclusive_minimum || s.exclusive_maximum) out += " exclusive";
    }
    if (s.min_length || s.max_length) {
        out += " length[";
        out += s.min_length ? std::to_string(*s.min_length) : "0";
        out += "..";
        out += s.max_length ? std::to_string(*s.max_length) : "*";
        out += "]";
    }
    if (!s.pattern.empty()) out += " pattern=" + s.pattern;
    if (!s.enum_values.empty()) {
        out += " enum{";
        for (size_t i = 0; i < s.enum_values.size(); ++i) {
            if (i) out += ",";
            out += s.enum_values[i].dump();
        }
        out += "}";
    }
    if (s.nullable) out += " nullable";
    return out;
}

inline void render_schema_outline(const SchemaNode& s, const std::string& indent, int depth,
                                  std::string& out) {
    if (depth > 6) {
        out += indent + "...\n";
        return;
    }
    for (const auto& [name, child] : s.properties) {
        out += indent + "- " + name;
        if (s.property_required(name)) out += " (required)";
        out += ": " + schema_type_line(child) + "\n";
        render_schema_outline(child, indent + "  ", depth + 1, out);
    }
    if (s.items) {
        out += indent + "- items: " + schema_type_line(*s.items) + "\n";
        render_schema_outline(*s.items, indent + "  ", depth + 1, out);
    }
}

}  // namespace detail

inline constexpr std::string_view kSummaryTruncationMark = "\n...[truncated]";

// Deterministic, human-readable rendering of the operation, truncated to
// `budget` characters.
inline std::string operation_summary(const ApiOperation& op, size_t budget) {
    if (budget < 256) fail(ErrorCode::ConfigError, "summary budget must be at least 256");
    std::string out;
    out += op.method + " " + op.path_template + " (id: " + op.id + ")\n";
    if (!op.description.empty()) out += "Description: " + op.description + "\n";
    if (op.parameters.empty()) {
        out += "Parameters: no parameters\n";
    } else {
        out += "Parameters:\n";
        for (const auto& p : op.parameters) {
            out += "- " + p.name + " (" + location_name(p.location) + ")";
            if (p.required) out += " (required)";
            out += ": " + detail::schema_type_line(p.schema) + "\n";
            detail::render_schema_outline(p.schema, "  ", 0, out);
        }
    }
    if (op.request_body_schema) {
        out += "Request body (" +
               (op.body_content_type.empty() ? std::string("application/json") : op.body_content_type) +
               ")";
        out += op.body_required ? " (required):\n" : ":\n";
        out += "- " + detail::schema_type_line(*op.request_body_schema) + "\n";
        detail::render_schema_outline(*op.request_body_schema, "  ", 0, out);
    } else {
        out += "Request body: none\n";
    }
    if (!op.response_schemas.empty()) {
        out += "Responses: ";
        for (size_t i = 0; i < op.response_schemas.size(); ++i) {
            if (i) out += ", ";
            out += op.response_schemas[i].first;
        }
        out += "\n";
    }
    if (out.size() > budget) {
        out.resize(budget - kSummaryTruncationMark.size());
        out += kSummaryTruncationMark;
    }
    return out;
}

}  // namespace restsuite
