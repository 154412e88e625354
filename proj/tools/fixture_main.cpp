// Standalone launcher (and admin client) for the bundled booking fixture
// service, so the CLI can be exercised end to end without external services.

#include <csignal>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "restsuite/testing/fixture.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

int admin_post(const std::string& url, const std::string& path, const std::string& body) {
    httplib::Client client(url);
    client.set_connection_timeout(10, 0);
    auto res = body.empty() ? client.Post(path, "", "application/json")
                            : client.Post(path, body, "application/json");
    if (!res) {
        std::cerr << "error: cannot reach fixture at " << url << "\n";
        return 2;
    }
    std::cout << res->body << "\n";
    return res->status == 200 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Room-booking fixture service with switchable seeded defects"};
    app.require_subcommand(1);

    restsuite::testing::FixtureOptions options;
    int port = 0;
    std::string write_spec;
    CLI::App* serve = app.add_subcommand("serve", "Start the fixture service");
    serve->add_option("--port", port, "Port (0 picks an ephemeral one)");
    serve->add_option("--write-spec", write_spec, "Also write the OpenAPI document to this file");
    serve->add_flag("--accept-reversed-range", options.accept_reversed_range,
                    "Defect: accept until < from with 2xx");
    serve->add_flag("--accept-any-room-type", options.accept_any_room_type,
                    "Defect: accept non-string room_type_id with 2xx");
    serve->add_flag("--crash-on-room-type-type", options.crash_on_room_type_type,
                    "Defect: crash with 500 on non-string room_type_id");
    serve->add_flag("--with-crash-endpoint", options.with_crash_endpoint,
                    "Expose GET /crash (always 500)");
    serve->add_flag("--with-restricted-endpoint", options.with_restricted_endpoint,
                    "Expose GET /restricted (always 400)");

    std::string url;
    CLI::App* reset = app.add_subcommand("reset", "Reset fixture state (init-script hook)");
    reset->add_option("--url", url, "Fixture base URL")->required();
    CLI::App* stats = app.add_subcommand("stats", "Print fixture instrumentation counters");
    stats->add_option("--url", url, "Fixture base URL")->required();

    CLI11_PARSE(app, argc, argv);

    if (serve->parsed()) {
        restsuite::testing::FixtureService fixture(options);
        int bound = fixture.start(port);
        if (!write_spec.empty()) {
            std::ofstream out(write_spec, std::ios::trunc);
            out << fixture.openapi_document().dump(2) << "\n";
        }
        std::cout << "listening on http://127.0.0.1:" << bound << std::endl;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_stop) {
            struct timespec ts{0, 100 * 1000 * 1000};
            nanosleep(&ts, nullptr);
        }
        fixture.stop();
        return 0;
    }
    if (reset->parsed()) return admin_post(url, "/__fixture/reset", "");
    if (stats->parsed()) {
        httplib::Client client(url);
        client.set_connection_timeout(10, 0);
        auto res = client.Get("/__fixture/stats");
        if (!res) {
            std::cerr << "error: cannot reach fixture at " << url << "\n";
            return 2;
        }
        std::cout << res->body << "\n";
        return 0;
    }
    return 2;
}
