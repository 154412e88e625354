#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "restsuite/common.hpp"
#include "restsuite/schema_check.hpp"

namespace restsuite::testing {

// Small hotel-booking service used as the system under test in this repo:
// room types are pre-seeded, bookings are created/read/updated, a date-range
// rule ties `from` and `until`, and `room_type_id` must be a known string.
// Defects are switchable at runtime so suites can be re-run against the
// buggy and the corrected behavior.
struct FixtureOptions {
    // Seeded defects.
    bool accept_reversed_range = false;   // missed validation: until < from answers 2xx
    bool accept_any_room_type = false;    // missed validation: non-string room_type_id answers 2xx
    bool crash_on_room_type_type = false; // type confusion crashes with 500 instead of 400
    // Optional endpoints.
    bool with_crash_endpoint = false;     // GET /crash always answers 500
    bool with_restricted_endpoint = false;// GET /restricted is hard-wired to 400
};

class FixtureService {
public:
    explicit FixtureService(FixtureOptions options = {}) : options_(options) { install_routes(); }

    ~FixtureService() { stop(); }

    // Binds 127.0.0.1 on an ephemeral port (or `port` when nonzero) and
    // serves from a background thread until stop().
    int start(int port = 0) {
        if (port == 0) {
            port_ = server_.bind_to_any_port("127.0.0.1");
        } else {
            if (!server_.bind_to_port("127.0.0.1", port)) {
                fail(ErrorCode::IoError, "fixture cannot bind port " + std::to_string(port));
            }
            port_ = port;
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    int port() const { return port_; }

    // Instrumentation for tests.
    int reset_count() const { return reset_count_.load(); }
    int request_count(const std::string& method_and_path) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = request_counts_.find(method_and_path);
        return it == request_counts_.end() ? 0 : it->second;
    }
    int total_requests() const { return total_requests_.load(); }

    void set_options(const FixtureOptions& options) {
        std::lock_guard<std::mutex> lock(mutex_);
        options_ = options;
    }
    FixtureOptions options() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return options_;
    }

    void reset_state() {
        std::lock_guard<std::mutex> lock(mutex_);
        bookings_.clear();
        next_booking_ = 1;
        ++reset_count_;
    }

    // The OpenAPI document matching the served endpoints (including the
    // optional ones); also served at GET /openapi.json.
    Json openapi_document() const {
        FixtureOptions opts = options();
        Json doc;
        doc["openapi"] = "3.0.3";
        doc["info"]["title"] = "Room Booking Fixture";
        doc["info"]["version"] = "1.0.0";
        doc["servers"] = Json::array({Json::object({{"url", base_url()}})});

        Json paths = Json::object();

        paths["/ping"]["get"] = Json::parse(R"({
          "operationId": "ping",
          "description": "Liveness probe.",
          "responses": {"200": {"description": "ok", "content": {"application/json": {"schema": {
            "type": "object", "properties": {"status": {"type": "string"}}}}}}}
        })");

        paths["/room-types"]["get"] = Json::parse(R"({
          "operationId": "listRoomTypes",
          "description": "Lists the bookable room types.",
          "responses": {"200": {"description": "room types", "content": {"application/json": {"schema": {
            "type": "array", "items": {"$ref": "#/components/schemas/RoomType"}}}}}}
        })");

        paths["/bookings"]["post"] = Json::parse(R"({
          "operationId": "createBooking",
          "description": "Creates a booking for an existing room type; `until` must not precede `from`.",
          "requestBody": {"required": true, "content": {"application/json": {"schema": {
            "$ref": "#/components/schemas/BookingRequest"}}}},
          "responses": {
            "201": {"description": "created", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Booking"}}}},
            "400": {"description": "invalid booking"}
          }
        })");

        paths["/bookings/{bookingId}"]["get"] = Json::parse(R"({
          "operationId": "getBooking",
          "description": "Reads one booking.",
          "parameters": [{"name": "bookingId", "in": "path", "required": true, "schema": {"type": "string"}}],
          "responses": {
            "200": {"description": "booking", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Booking"}}}},
            "404": {"description": "unknown booking"}
          }
        })");

        paths["/bookings/{bookingId}"]["put"] = Json::parse(R"({
          "operationId": "updateBooking",
          "description": "Re-schedules a booking; the date-range rule applies.",
          "parameters": [{"name": "bookingId", "in": "path", "required": true, "schema": {"type": "string"}}],
          "requestBody": {"required": true, "content": {"application/json": {"schema": {
            "$ref": "#/components/schemas/BookingUpdate"}}}},
          "responses": {
            "200": {"description": "updated", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Booking"}}}},
            "400": {"description": "invalid update"},
            "404": {"description": "unknown booking"}
          }
        })");

        if (opts.with_crash_endpoint) {
            paths["/crash"]["get"] = Json::parse(R"({
              "operationId": "crash",
              "description": "Diagnostics endpoint.",
              "responses": {"200": {"description": "ok"}}
            })");
        }
        if (opts.with_restricted_endpoint) {
            paths["/restricted"]["get"] = Json::parse(R"({
              "operationId": "restricted",
              "description": "Feature behind a rollout flag.",
              "responses": {"200": {"description": "ok"}}
            })");
        }
        doc["paths"] = std::move(paths);

        doc["components"]["schemas"]["RoomType"] = Json::parse(R"({
          "type": "object",
          "required": ["id", "name"],
          "properties": {"id": {"type": "string"}, "name": {"type": "string"}}
        })");
        doc["components"]["schemas"]["BookingRequest"] = Json::parse(R"({
          "type": "object",
          "required": ["room_type_id", "guest_name", "from", "until"],
          "properties": {
            "room_type_id": {"type": "string", "minLength": 1},
            "guest_name": {"type": "string", "minLength": 1},
            "from": {"type": "string", "format": "date"},
            "until": {"type": "string", "format": "date"},
            "rooms": {"type": "integer", "minimum": 1, "maximum": 10}
          }
        })");
        doc["components"]["schemas"]["BookingUpdate"] = Json::parse(R"({
          "type": "object",
          "required": ["from", "until"],
          "properties": {
            "from": {"type": "string", "format": "date"},
            "until": {"type": "string", "format": "date"}
          }
        })");
        doc["components"]["schemas"]["Booking"] = Json::parse(R"({
          "type": "object",
          "required": ["id", "room_type_id", "guest_name", "from", "until", "status"],
          "properties": {
            "id": {"type": "string"},
            "room_type_id": {"type": "string"},
            "guest_name": {"type": "string"},
            "from": {"type": "string", "format": "date"},
            "until": {"type": "string", "format": "date"},
            "rooms": {"type": "integer"},
            "status": {"type": "string"}
          }
        })");
        return doc;
    }

private:
    static void reply(httplib::Response& res, int status, const Json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static Json error_body(const std::string& message) {
        Json j;
        j["error"] = message;
        return j;
    }

    void count(const httplib::Request& req) {
        if (req.path.rfind("/__fixture/", 0) == 0) return;
        std::lock_guard<std::mutex> lock(mutex_);
        std::string path = req.path;
        // Collapse booking ids so counters group by endpoint.
        if (path.rfind("/bookings/", 0) == 0) path = "/bookings/{bookingId}";
        ++request_counts_[req.method + " " + path];
        ++total_requests_;
    }

    // Returns an error message or empty when the payload passes. `creating`
    // demands the full required set; updates validate only dates.
    std::string validate_booking_payload(const Json& body, bool creating, int& crash_status) {
        FixtureOptions opts;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            opts = options_;
        }
        crash_status = 0;
        if (!body.is_object()) return "request body must be a JSON object";
        if (creating) {
            for (const char* field : {"room_type_id", "guest_name", "from", "until"}) {
                if (!body.contains(field)) return std::string("missing required field '") + field + "'";
            }
            const Json& room_type = body["room_type_id"];
            if (!room_type.is_string()) {
                if (opts.crash_on_room_type_type) {
                    crash_status = 500;
                    return "internal error";
                }
                if (!opts.accept_any_room_type) return "room_type_id must be a string";
            } else {
                bool known = false;
                for (const auto& rt : room_types_) {
                    if (rt["id"] == room_type) { known = true; break; }
                }
                if (!known && !opts.accept_any_room_type) {
                    return "unknown room_type_id '" + room_type.get<std::string>() + "'";
                }
            }
            if (!body["guest_name"].is_string() || body["guest_name"].get<std::string>().empty()) {
                return "guest_name must be a non-empty string";
            }
            if (body.contains("rooms")) {
                if (!body["rooms"].is_number_integer()) return "rooms must be an integer";
                long long rooms = body["rooms"].get<long long>();
                if (rooms < 1 || rooms > 10) return "rooms must be between 1 and 10";
            }
        } else {
            for (const char* field : {"from", "until"}) {
                if (!body.contains(field)) return std::string("missing required field '") + field + "'";
            }
        }
        for (const char* field : {"from", "until"}) {
            const Json& v = body[field];
            if (!v.is_string() || !restsuite::detail::valid_date(v.get<std::string>())) {
                return std::string("'") + field + "' must be a date formatted YYYY-MM-DD";
            }
        }
        // ISO dates compare correctly as text.
        if (!opts.accept_reversed_range &&
            body["until"].get<std::string>() < body["from"].get<std::string>()) {
            return "'until' must not precede 'from'";
        }
        return {};
    }

    void install_routes() {
        server_.Get("/ping", [this](const httplib::Request& req, httplib::Response& res) {
            count(req);
            Json j;
            j["status"] = "ok";
            reply(res, 200, j);
        });

        server_.Get("/room-types", [this](const httplib::Request& req, httplib::Response& res) {
            count(req);
            Json arr = Json::array();
            for (const auto& rt : room_types_) arr.push_back(rt);
            reply(res, 200, arr);
        });

        server_.Post("/bookings", [this](const httplib::Request& req, httplib::Response& res) {
            count(req);
            Json body;
            try {
                body = Json::parse(req.body);
            } catch (const Json::parse_error&) {
                reply(res, 400, error_body("request body is not valid JSON"));
                return;
            }
            int crash_status = 0;
            std::string problem = validate_booking_payload(body, /*creating=*/true, crash_status);
            if (crash_status != 0) {
                reply(res, crash_status, error_body(problem));
                return;
            }
            if (!problem.empty()) {
                reply(res, 400, error_body(problem));
                return;
            }
            std::lock_guard<std::mutex> lock(mutex_);
            Json booking;
            booking["id"] = "b-" + std::to_string(next_booking_++);
            booking["room_type_id"] = body["room_type_id"].is_string()
                                          ? body["room_type_id"]
                                          : Json(body["room_type_id"].dump());
            booking["guest_name"] = body["guest_name"];
            booking["from"] = body["from"];
            booking["until"] = body["until"];
            booking["rooms"] = body.contains("rooms") ? body["rooms"] : Json(1);
            booking["status"] = "confirmed";
            bookings_[booking["id"].get<std::string>()] = booking;
            reply(res, 201, booking);
        });

        server_.Get(R"(/bookings/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            count(req);
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = bookings_.find(req.matches[1].str());
            if (it == bookings_.end()) {
                reply(res, 404, error_body("no such booking"));
                return;
            }
            reply(res, 200, it->second);
        });

        server_.Put(R"(/bookings/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            count(req);
            Json body;
            try {
                body = Json::parse(req.body);
            } catch (const Json::parse_error&) {
                reply(res, 400, error_body("request body is not valid JSON"));
                return;
            }
            int crash_status = 0;
            std::string problem = validate_booking_payload(body, /*creating=*/false, crash_status);
            if (crash_status != 0) {
                reply(res, crash_status, error_body(problem));
                return;
            }
            if (!problem.empty()) {
                reply(res, 400, error_body(problem));
                return;
            }
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = bookings_.find(req.matches[1].str());
            if (it == bookings_.end()) {
                reply(res, 404, error_body("no such booking"));
                return;
            }
            it->second["from"] = body["from"];
            it->second["until"] = body["until"];
            reply(res, 200, it->second);
        });

        server_.Get("/crash", [this](const httplib::Request& req, httplib::Response& res) {
            count(req);
            if (!options().with_crash_endpoint) {
                reply(res, 404, error_body("not found"));
                return;
            }
            reply(res, 500, error_body("boom"));
        });

        server_.Get("/restricted", [this](const httplib::Request& req, httplib::Response& res) {
            count(req);
            if (!options().with_restricted_endpoint) {
                reply(res, 404, error_body("not found"));
                return;
            }
            reply(res, 400, error_body("restricted: request rejected"));
        });

        server_.Get("/openapi.json", [this](const httplib::Request& req, httplib::Response& res) {
            count(req);
            reply(res, 200, openapi_document());
        });

        // Admin surface; excluded from request counters.
        server_.Post("/__fixture/reset", [this](const httplib::Request&, httplib::Response& res) {
            reset_state();
            Json j;
            j["reset_count"] = reset_count();
            reply(res, 200, j);
        });

        server_.Get("/__fixture/stats", [this](const httplib::Request&, httplib::Response& res) {
            Json j;
            j["reset_count"] = reset_count();
            j["total_requests"] = total_requests();
            Json counts = Json::object();
            {
                std::lock_guard<std::mutex> lock(mutex_);
                for (const auto& [k, v] : request_counts_) counts[k] = v;
            }
            j["requests"] = std::move(counts);
            reply(res, 200, j);
        });

        server_.Post("/__fixture/config", [this](const httplib::Request& req, httplib::Response& res) {
            Json body;
            try {
                body = Json::parse(req.body);
            } catch (const Json::parse_error&) {
                reply(res, 400, error_body("config body is not valid JSON"));
                return;
            }
            FixtureOptions opts = options();
            auto apply = [&](const char* name, bool& slot) {
                if (body.contains(name) && body[name].is_boolean()) slot = body[name].get<bool>();
            };
            apply("accept_reversed_range", opts.accept_reversed_range);
            apply("accept_any_room_type", opts.accept_any_room_type);
            apply("crash_on_room_type_type", opts.crash_on_room_type_type);
            apply("with_crash_endpoint", opts.with_crash_endpoint);
            apply("with_restricted_endpoint", opts.with_restricted_endpoint);
            set_options(opts);
            Json j;
            j["accept_reversed_range"] = opts.accept_reversed_range;
            j["accept_any_room_type"] = opts.accept_any_room_type;
            j["crash_on_room_type_type"] = opts.crash_on_room_type_type;
            j["with_crash_endpoint"] = opts.with_crash_endpoint;
            j["with_restricted_endpoint"] = opts.with_restricted_endpoint;
            reply(res, 200, j);
        });
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;

    mutable std::mutex mutex_;
    FixtureOptions options_;
    std::map<std::string, Json> bookings_;
    int next_booking_ = 1;
    std::vector<Json> room_types_ = {
        Json{{"id", "rt-standard"}, {"name", "Standard"}},
        Json{{"id", "rt-deluxe"}, {"name", "Deluxe"}},
    };
    std::atomic<int> reset_count_{0};
    std::atomic<int> total_requests_{0};
    std::map<std::string, int> request_counts_;
};

}  // namespace restsuite::testing
