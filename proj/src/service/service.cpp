#include <array>
#include <chrono>
#include <cmath>

#include "multidx/service.hpp"

namespace multidx::service {

namespace {

namespace fs = std::filesystem;
using modelstore::Artifact;
using modelstore::InputKind;
using nlohmann::json;

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<int, 256> decode_table() {
    std::array<int, 256> table{};
    for (auto& v : table) v = -1;
    for (std::size_t i = 0; i < kAlphabet.size(); ++i) table[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
    return table;
}

[[noreturn]] void bad_request(const std::string& message) { throw RequestError(400, message); }

json envelope_ok(json result) { return json{{"ok", true}, {"result", std::move(result)}, {"error", nullptr}}; }

json envelope_error(const std::string& message) { return json{{"ok", false}, {"result", nullptr}, {"error", message}}; }

/// The object under "inputs", checked for exactly `keys`.
const json& inputs_object(const json& body, std::string_view mode) {
    if (!body.is_object()) bad_request("request body must be a JSON object");
    for (const auto& [key, value] : body.items()) {
        if (key == "inputs") continue;
        if (key == "mode") {
            if (!value.is_string() || value.get<std::string>() != mode)
                bad_request("request mode does not match the endpoint '" + std::string(mode) + "'");
            continue;
        }
        bad_request("unexpected field '" + key + "'");
    }
    const auto it = body.find("inputs");
    if (it == body.end()) bad_request("missing field 'inputs'");
    if (!it->is_object()) bad_request("'inputs' must be an object");
    return *it;
}

void require_keys(const json& inputs, const std::vector<std::string>& keys) {
    for (const auto& key : keys)
        if (!inputs.contains(key)) bad_request("missing input '" + key + "'");
    for (const auto& [key, value] : inputs.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) bad_request("unexpected input '" + key + "'");
}

std::string base64_field(const json& inputs, const std::string& key) {
    require_keys(inputs, {key});
    const auto& value = inputs.at(key);
    if (!value.is_string()) bad_request("input '" + key + "' must be a base64 string");
    return value.get<std::string>();
}

double feature_value(const tabular::FeatureSchema& schema, std::size_t c, const json& value) {
    const std::string& name = schema.feature_names[c];
    if (value.is_null()) return tabular::kMissing;
    switch (schema.feature_kinds[c]) {
        case tabular::FeatureKind::Binary:
            if (value.is_boolean()) return value.get<bool>() ? 1.0 : 0.0;
            if (value.is_number()) {
                const double v = value.get<double>();
                if (v == 0.0 || v == 1.0) return v;
            }
            bad_request("input '" + name + "' must be 0, 1, true, false or null");
        case tabular::FeatureKind::Categorical:
            if (value.is_string()) {
                const auto& levels = schema.categories.empty() ? std::vector<std::string>{} : schema.categories[c];
                const auto it = std::find(levels.begin(), levels.end(), value.get<std::string>());
                // Unseen levels get a fresh code, which encodes as all zeros.
                return static_cast<double>(it - levels.begin());
            }
            if (value.is_number()) return value.get<double>();
            bad_request("input '" + name + "' must be a level name, a number or null");
        case tabular::FeatureKind::Numeric:
            if (value.is_number()) return value.get<double>();
            bad_request("input '" + name + "' must be a number or null");
    }
    bad_request("input '" + name + "' has an unknown kind");
}

int status_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::Data:
        case ErrorCode::Format: return 400;
        case ErrorCode::NotLoaded: return 503;
        default: return 500;
    }
}

}  // namespace

// --- base64 ------------------------------------------------------------------

std::vector<std::uint8_t> decode_base64(std::string_view text) {
    static constexpr auto table = decode_table();
    require(text.size() % 4 == 0, ErrorCode::Format, "invalid base64: length is not a multiple of 4");
    std::size_t padding = 0;
    while (padding < text.size() && padding < 3 && text[text.size() - 1 - padding] == '=') ++padding;
    require(padding <= 2, ErrorCode::Format, "invalid base64: too much padding");

    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        const bool last = i + 4 == text.size();
        std::uint32_t group = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            const char ch = text[i + j];
            int value = 0;
            if (ch == '=' && last && j >= 4 - padding) {
                value = 0;
            } else {
                value = table[static_cast<unsigned char>(ch)];
                require(value >= 0, ErrorCode::Format,
                        "invalid base64: unexpected character at offset " + std::to_string(i + j));
            }
            group = (group << 6) | static_cast<std::uint32_t>(value);
        }
        const std::size_t bytes = last ? 3 - padding : 3;
        const std::uint32_t dropped = padding == 2 ? 0xFFFFu : padding == 1 ? 0xFFu : 0u;
        require(!last || (group & dropped) == 0, ErrorCode::Format, "invalid base64: non-zero padding bits");
        for (std::size_t b = 0; b < bytes; ++b) out.push_back(static_cast<std::uint8_t>(group >> (16 - 8 * b)));
    }
    return out;
}

std::string encode_base64(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        const std::size_t n = std::min<std::size_t>(3, bytes.size() - i);
        std::uint32_t group = 0;
        for (std::size_t b = 0; b < 3; ++b) group = (group << 8) | (b < n ? bytes[i + b] : 0u);
        for (std::size_t j = 0; j < 4; ++j) out.push_back(j <= n ? kAlphabet[(group >> (18 - 6 * j)) & 0x3F] : '=');
    }
    return out;
}

// --- registry ------------------------------------------------------------------

void Registry::add(Artifact artifact) {
    artifact.validate();
    const auto mode = artifact.mode;
    const bool inserted = artifacts_.emplace(mode, std::move(artifact)).second;
    require(inserted, ErrorCode::InvalidArgument,
            "duplicate artifact for mode " + std::string(modelstore::to_string(mode)));
}

Registry Registry::load_directory(const fs::path& directory) {
    require(fs::is_directory(directory), ErrorCode::Io, "model directory '" + directory.string() + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().extension() == ".mdx") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    Registry registry;
    for (const auto& file : files) registry.add(modelstore::load(file));
    return registry;
}

const Artifact* Registry::find(modelstore::Mode mode) const noexcept {
    const auto it = artifacts_.find(mode);
    return it == artifacts_.end() ? nullptr : &it->second;
}

// --- handlers ------------------------------------------------------------------

json to_json(const PredictionResult& result) {
    return json{{"mode", modelstore::to_string(result.mode)},
                {"probability_positive", result.probability_positive},
                {"label", result.label},
                {"model_version", result.model_version},
                {"latency_ms", result.latency_ms}};
}

pipeline::PredictInput parse_inputs(const Artifact& artifact, const json& body) {
    const auto mode = modelstore::to_string(artifact.mode);
    const json& inputs = inputs_object(body, mode);
    switch (modelstore::input_kind(artifact.mode)) {
        case InputKind::Audio: return audio::decode_wav(decode_base64(base64_field(inputs, "wav_base64")));
        case InputKind::Image: return imaging::decode_png(decode_base64(base64_field(inputs, "png_base64")));
        case InputKind::Tabular: break;
    }
    const auto& schema = artifact.tabular->input_schema;
    require_keys(inputs, schema.feature_names);
    pipeline::FeatureInput row;
    for (std::size_t c = 0; c < schema.width(); ++c)
        row.values.push_back(feature_value(schema, c, inputs.at(schema.feature_names[c])));
    return row;
}

PredictionResult handle_predict(std::string_view mode_name, const json& body, const Registry& registry) {
    const auto start = std::chrono::steady_clock::now();
    const auto mode = modelstore::mode_from_string(mode_name);
    if (!mode) bad_request("unknown mode '" + std::string(mode_name) + "'");
    const Artifact* artifact = registry.find(*mode);
    if (artifact == nullptr) throw RequestError(503, "model not loaded for mode '" + std::string(mode_name) + "'");

    pipeline::Prediction prediction;
    try {
        prediction = pipeline::predict(*artifact, parse_inputs(*artifact, body));
    } catch (const Error& e) {
        throw RequestError(status_for(e), e.what());
    }
    PredictionResult result;
    result.mode = *mode;
    result.probability_positive = prediction.probability_positive;
    result.label = prediction.label;
    result.model_version = artifact->model_version;
    result.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
}

json health(const Registry& registry) {
    json modes = json::array();
    for (const auto& [mode, artifact] : registry.artifacts())
        modes.push_back({{"mode", modelstore::to_string(mode)}, {"model_version", artifact.model_version}});
    return json{{"status", registry.empty() ? "degraded" : "ok"}, {"modes", modes}};
}

json models(const Registry& registry) {
    json list = json::array();
    for (const auto& [mode, artifact] : registry.artifacts()) {
        json input;
        switch (modelstore::input_kind(mode)) {
            case InputKind::Audio: input = {{"kind", "audio"}, {"field", "wav_base64"}}; break;
            case InputKind::Image:
                input = {{"kind", "image"}, {"field", "png_base64"}, {"size", artifact.image->size}};
                break;
            case InputKind::Tabular: {
                const auto& schema = artifact.tabular->input_schema;
                json features = json::array();
                for (std::size_t c = 0; c < schema.width(); ++c)
                    features.push_back({{"name", schema.feature_names[c]},
                                        {"kind", tabular::to_string(schema.feature_kinds[c])}});
                input = {{"kind", "features"}, {"features", features}};
                break;
            }
        }
        list.push_back({{"mode", modelstore::to_string(mode)},
                        {"model_version", artifact.model_version},
                        {"input", input}});
    }
    return json{{"models", list}};
}

Response route(std::string_view method, std::string_view path, std::string_view body, const Registry& registry) {
    constexpr std::string_view kPredict = "/v1/predict/";
    try {
        if (path == "/v1/health" || path == "/v1/models") {
            if (method != "GET") return {405, envelope_error("method not allowed")};
            return {200, envelope_ok(path == "/v1/health" ? health(registry) : models(registry))};
        }
        if (path.starts_with(kPredict)) {
            if (method != "POST") return {405, envelope_error("method not allowed")};
            if (body.size() > kMaxRequestBytes) return {413, envelope_error("request body exceeds 20 MiB")};
            json parsed;
            try {
                parsed = json::parse(body);
            } catch (const json::exception& e) {
                return {400, envelope_error(std::string("invalid JSON: ") + e.what())};
            }
            const auto result = handle_predict(path.substr(kPredict.size()), parsed, registry);
            return {200, envelope_ok(to_json(result))};
        }
        return {404, envelope_error("not found")};
    } catch (const RequestError& e) {
        return {e.status(), envelope_error(e.what())};
    } catch (const Error& e) {
        return {status_for(e), envelope_error(e.what())};
    } catch (const std::exception& e) {
        return {500, envelope_error(std::string("internal error: ") + e.what())};
    }
}

}  // namespace multidx::service
