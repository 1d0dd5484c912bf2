#include <cstdlib>
#include <mutex>

#include "httplib.h"
#include "multidx/service.hpp"

namespace multidx::service {

ServerOptions ServerOptions::from_environment() {
    ServerOptions options;
    if (const char* port = std::getenv("MULTIDX_PORT"); port && *port) {
        char* end = nullptr;
        const long value = std::strtol(port, &end, 10);
        require(*end == '\0' && value >= 0 && value <= 65535, ErrorCode::InvalidArgument,
                std::string("MULTIDX_PORT is not a port number: ") + port);
        options.port = static_cast<int>(value);
    }
    if (const char* origin = std::getenv("MULTIDX_CORS_ORIGIN"); origin && *origin) options.cors_origin = origin;
    return options;
}

struct Server::Impl {
    const Registry& registry;
    ServerOptions options;
    httplib::Server http;
    bool bound = false;
    std::mutex state;
    bool stop_requested = false;
    bool listening = false;

    Impl(const Registry& r, ServerOptions o) : registry(r), options(std::move(o)) {
        http.set_payload_max_length(options.max_request_bytes);
        // No SO_REUSEPORT: a second server on the same port must fail to bind.
        http.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        http.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});

        auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
            const auto response = route(req.method, req.path, req.body, registry);
            res.status = response.status;
            res.set_content(response.body.dump(), "application/json");
        };
        http.Get(".*", dispatch);
        http.Post(".*", dispatch);
        http.Put(".*", dispatch);
        http.Delete(".*", dispatch);
        http.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        // Statuses produced by the transport itself (e.g. 413) still get the envelope.
        http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            const nlohmann::json body{{"ok", false}, {"result", nullptr}, {"error", httplib::status_message(res.status)}};
            res.set_content(body.dump(), "application/json");
        });
    }
};

Server::Server(const Registry& registry, ServerOptions options)
    : impl_(std::make_unique<Impl>(registry, std::move(options))) {}

Server::~Server() {
    if (impl_->http.is_running()) impl_->http.stop();
}

int Server::bind() {
    auto& o = impl_->options;
    if (o.port == 0) {
        const int port = impl_->http.bind_to_any_port(o.host);
        require(port > 0, ErrorCode::Io, "cannot bind " + o.host + " to a free port");
        o.port = port;
    } else {
        require(impl_->http.bind_to_port(o.host, o.port), ErrorCode::Io,
                "cannot bind " + o.host + ":" + std::to_string(o.port) + " (port busy?)");
    }
    impl_->bound = true;
    return o.port;
}

void Server::listen() {
    require(impl_->bound, ErrorCode::InvalidArgument, "listen before bind");
    {
        std::lock_guard lock(impl_->state);
        if (impl_->stop_requested) return;
        impl_->listening = true;
    }
    impl_->http.listen_after_bind();
}

void Server::stop() {
    {
        std::lock_guard lock(impl_->state);
        impl_->stop_requested = true;
        if (!impl_->listening) return;
    }
    // httplib ignores stop() until its accept loop is up.
    impl_->http.wait_until_ready();
    impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace multidx::service
