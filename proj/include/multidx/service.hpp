#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "multidx/modelstore.hpp"
#include "multidx/pipeline.hpp"

namespace multidx::service {

inline constexpr std::size_t kMaxRequestBytes = 20u << 20;

/// Standard alphabet, padding required, no whitespace.
std::vector<std::uint8_t> decode_base64(std::string_view text);
std::string encode_base64(std::span<const std::uint8_t> bytes);

/// Loaded artifacts by mode. Filled before serving, read-only afterwards.
class Registry {
public:
    /// Throws when the mode is already present.
    void add(modelstore::Artifact artifact);

    /// Every *.mdx file in `directory`.
    static Registry load_directory(const std::filesystem::path& directory);

    const modelstore::Artifact* find(modelstore::Mode mode) const noexcept;
    const std::map<modelstore::Mode, modelstore::Artifact>& artifacts() const noexcept { return artifacts_; }
    bool empty() const noexcept { return artifacts_.empty(); }

private:
    std::map<modelstore::Mode, modelstore::Artifact> artifacts_;
};

struct PredictionResult {
    modelstore::Mode mode = modelstore::Mode::Symptoms;
    double probability_positive = 0.0;
    std::string label;
    std::string model_version;
    double latency_ms = 0.0;
};

nlohmann::json to_json(const PredictionResult& result);

/// Carries the HTTP status the failure maps to.
class RequestError : public std::runtime_error {
public:
    RequestError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// Request body {"inputs": {...}} for the artifact's mode: feature name to
/// number (null for missing, booleans for binary flags, level names for
/// categorical features), {"wav_base64": ...} or {"png_base64": ...}.
/// Exactly the expected keys; anything else is a 400.
pipeline::PredictInput parse_inputs(const modelstore::Artifact& artifact, const nlohmann::json& body);

/// 400 for an unknown mode or bad input, 503 when the mode is not loaded.
PredictionResult handle_predict(std::string_view mode, const nlohmann::json& body, const Registry& registry);

nlohmann::json health(const Registry& registry);
nlohmann::json models(const Registry& registry);

struct Response {
    int status = 200;
    nlohmann::json body;  // {"ok", "result", "error"}
};

/// Transport-free dispatch of the HTTP API.
Response route(std::string_view method, std::string_view path, std::string_view body, const Registry& registry);

struct ServerOptions {
    std::string host = "0.0.0.0";
    int port = 8080;  // 0 picks a free port
    std::string cors_origin = "*";
    std::size_t max_request_bytes = kMaxRequestBytes;

    /// MULTIDX_PORT and MULTIDX_CORS_ORIGIN override the defaults.
    static ServerOptions from_environment();
};

class Server {
public:
    Server(const Registry& registry, ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds the socket; returns the port. Throws ErrorCode::Io when busy.
    int bind();
    /// Serves until stop(); requires bind().
    void listen();
    /// Finishes in-flight requests, then makes listen() return. Safe from any thread.
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace multidx::service
