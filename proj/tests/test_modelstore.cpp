#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string_view>

#include "doctest.h"
#include "multidx/modelstore.hpp"
#include "multidx/pipeline.hpp"
#include "oracles/crc32.hpp"
#include "synthetic.hpp"

using namespace multidx;
using modelstore::Mode;

namespace {

namespace fs = std::filesystem;

const modelstore::Artifact& cached(Mode mode) {
    static std::map<Mode, modelstore::Artifact> cache;
    auto it = cache.find(mode);
    if (it == cache.end()) it = cache.emplace(mode, synthetic::fixture_artifact(mode)).first;
    return it->second;
}

std::uint64_t read_le(const std::vector<std::uint8_t>& bytes, std::size_t offset, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    return v;
}

void write_le(std::vector<std::uint8_t>& bytes, std::size_t offset, int width, std::uint64_t v) {
    for (int i = 0; i < width; ++i) bytes[offset + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void reseal(std::vector<std::uint8_t>& bytes) {
    write_le(bytes, 16, 8, bytes.size() - modelstore::kHeaderSize);
    const std::span<const std::uint8_t> payload(bytes.data() + modelstore::kHeaderSize,
                                                bytes.size() - modelstore::kHeaderSize);
    write_le(bytes, 24, 4, oracle::crc32_bitwise(payload));
}

std::string load_error(std::span<const std::uint8_t> bytes) {
    try {
        modelstore::deserialize(bytes);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Format);
        return e.what();
    }
    return "no error";
}

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "multidx_test_modelstore";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("CRC oracle agrees with the check value") {
    const std::string_view text = "123456789";
    CHECK(oracle::crc32_bitwise({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}) == 0xCBF43926u);
}

TEST_CASE("mode names") {
    for (Mode mode : modelstore::kAllModes) CHECK(modelstore::mode_from_string(modelstore::to_string(mode)) == mode);
    CHECK_FALSE(modelstore::mode_from_string("xray").has_value());
    CHECK(modelstore::input_kind(Mode::Cough) == modelstore::InputKind::Audio);
    CHECK(modelstore::input_kind(Mode::Ecg) == modelstore::InputKind::Image);
    CHECK(modelstore::input_kind(Mode::Mortality9) == modelstore::InputKind::Tabular);
}

TEST_CASE("round trip for every mode") {
    for (Mode mode : modelstore::kAllModes) {
        CAPTURE(modelstore::to_string(mode));
        const auto& artifact = cached(mode);
        const auto bytes = modelstore::serialize(artifact);

        SUBCASE("header layout") {
            REQUIRE(bytes.size() > modelstore::kHeaderSize);
            CHECK(std::memcmp(bytes.data(), "MDXMODEL", 8) == 0);
            CHECK(read_le(bytes, 8, 4) == modelstore::kFormatVersion);
            CHECK(read_le(bytes, 12, 4) == static_cast<std::uint32_t>(mode));
            CHECK(read_le(bytes, 16, 8) == bytes.size() - modelstore::kHeaderSize);
            const std::span<const std::uint8_t> payload(bytes.data() + modelstore::kHeaderSize,
                                                        bytes.size() - modelstore::kHeaderSize);
            CHECK(read_le(bytes, 24, 4) == oracle::crc32_bitwise(payload));
        }

        const auto loaded = modelstore::deserialize(bytes);
        CHECK(loaded.mode == mode);
        CHECK(loaded.model_version == artifact.model_version);
        CHECK(modelstore::serialize(loaded) == bytes);

        for (std::uint64_t probe = 0; probe < 5; ++probe) {
            const auto input = synthetic::fixture_input(mode, probe);
            const auto a = pipeline::predict(artifact, input);
            const auto b = pipeline::predict(loaded, input);
            CHECK(a.probabilities == b.probabilities);
            CHECK(a.label == b.label);
        }
    }
}

TEST_CASE("files are canonical") {
    const auto dir = temp_dir();
    const auto& artifact = cached(Mode::Blood5);
    modelstore::save(artifact, dir / "a.mdx");
    modelstore::save(artifact, dir / "b.mdx");
    auto read_all = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    CHECK(read_all(dir / "a.mdx") == read_all(dir / "b.mdx"));
    const auto loaded = modelstore::load(dir / "a.mdx");
    CHECK(modelstore::serialize(loaded) == modelstore::serialize(artifact));
    fs::remove_all(dir);
}

TEST_CASE("damaged files") {
    const auto good = modelstore::serialize(cached(Mode::Symptoms));

    SUBCASE("one corrupt payload byte") {
        for (std::size_t offset : {modelstore::kHeaderSize, good.size() / 2, good.size() - 1}) {
            auto bytes = good;
            bytes[offset] ^= 0x40;
            CHECK(load_error(bytes) == "checksum mismatch");
        }
    }
    SUBCASE("wrong magic") {
        auto bytes = good;
        bytes[0] = 'X';
        CHECK(load_error(bytes) == "not a model file");
        const std::string text = "hello, this is not a model";
        CHECK(load_error({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}) == "not a model file");
    }
    SUBCASE("newer format version") {
        auto bytes = good;
        write_le(bytes, 8, 4, modelstore::kFormatVersion + 1);
        CHECK(load_error(bytes).starts_with("unsupported version 2"));
        write_le(bytes, 8, 4, 0);
        CHECK(load_error(bytes).starts_with("unsupported version 0"));
    }
    SUBCASE("empty and truncated") {
        CHECK(load_error({}).starts_with("malformed"));
        CHECK(load_error(std::span(good).first(5)).starts_with("malformed"));
        CHECK(load_error(std::span(good).first(modelstore::kHeaderSize - 1)) == "malformed: truncated header");
        CHECK(load_error(std::span(good).first(good.size() - 3)) == "malformed: truncated payload");
    }
    SUBCASE("resealed but structurally broken payloads") {
        auto longer = good;
        longer.push_back(0);
        reseal(longer);
        CHECK(load_error(longer) == "malformed: trailing bytes after payload");

        auto shorter = good;
        shorter.resize(shorter.size() - 8);
        reseal(shorter);
        CHECK(load_error(shorter).starts_with("malformed"));

        auto wrong_mode = good;
        write_le(wrong_mode, 12, 4, static_cast<std::uint32_t>(Mode::Raman));
        CHECK(load_error(wrong_mode).starts_with("malformed: mode raman"));

        write_le(wrong_mode, 12, 4, 99);
        CHECK(load_error(wrong_mode) == "malformed: unknown mode 99");
    }
    SUBCASE("every truncation fails cleanly") {
        for (std::size_t n = 0; n < good.size(); n += 1 + good.size() / 97) {
            auto bytes = std::vector<std::uint8_t>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
            if (bytes.size() >= modelstore::kHeaderSize) reseal(bytes);
            CHECK_THROWS_AS(modelstore::deserialize(bytes), Error);
        }
    }
}

TEST_CASE("validation rejects inconsistent artifacts") {
    auto artifact = cached(Mode::Blood5);
    artifact.mode = Mode::Ecg;
    CHECK_THROWS_AS(modelstore::serialize(artifact), Error);

    auto image = cached(Mode::Raman);
    image.image->size += 1;
    CHECK_THROWS_WITH(modelstore::serialize(image), doctest::Contains("image size"));
}

TEST_CASE("missing file") {
    try {
        modelstore::load("/nonexistent/model.mdx");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
    }
}
