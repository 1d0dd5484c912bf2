#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "multidx/audio.hpp"
#include "multidx/error.hpp"

namespace multidx::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class Cursor {
public:
    explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    bool has(std::size_t n) const noexcept { return bytes_.size() - offset_ >= n; }
    std::size_t offset() const noexcept { return offset_; }
    std::size_t remaining() const noexcept { return bytes_.size() - offset_; }

    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>(bytes_[offset_] | bytes_[offset_ + 1] << 8);
        offset_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = v << 8 | bytes_[offset_ + static_cast<std::size_t>(i)];
        offset_ += 4;
        return v;
    }
    std::string tag() {
        need(4);
        std::string t(reinterpret_cast<const char*>(bytes_.data() + offset_), 4);
        offset_ += 4;
        return t;
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(offset_, n);
        offset_ += n;
        return s;
    }
    void skip(std::size_t n) { offset_ += std::min(n, remaining()); }

private:
    void need(std::size_t n) const {
        if (!has(n)) fail(ErrorCode::Format, "malformed wav: truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t offset_ = 0;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
    Cursor in(bytes);
    if (!in.has(12)) fail(ErrorCode::Format, "malformed wav: header too short");
    if (in.tag() != "RIFF") fail(ErrorCode::Format, "malformed wav: missing RIFF tag");
    in.u32();
    if (in.tag() != "WAVE") fail(ErrorCode::Format, "malformed wav: missing WAVE tag");

    bool have_format = false;
    std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
    std::uint32_t rate = 0;
    std::span<const std::uint8_t> data;
    bool have_data = false;

    while (in.has(8) && !have_data) {
        const std::string id = in.tag();
        const std::uint32_t size = in.u32();
        if (id == "fmt ") {
            if (size < 16 || !in.has(size)) fail(ErrorCode::Format, "malformed wav: short fmt chunk");
            Cursor fmt(in.take(size));
            format = fmt.u16();
            channels = fmt.u16();
            rate = fmt.u32();
            fmt.u32();
            block_align = fmt.u16();
            bits = fmt.u16();
            if (format == kFormatExtensible) {
                if (size < 40) fail(ErrorCode::Format, "malformed wav: short extensible fmt chunk");
                fmt.u16();
                fmt.u16();
                fmt.u32();
                format = fmt.u16();  // first two bytes of the subformat GUID
            }
            have_format = true;
        } else if (id == "data") {
            if (!have_format) fail(ErrorCode::Format, "malformed wav: data before fmt chunk");
            if (!in.has(size)) fail(ErrorCode::Format, "malformed wav: truncated data chunk");
            data = in.take(size);
            have_data = true;
        } else {
            in.skip(size);
        }
        if (size % 2 == 1) in.skip(1);
    }
    if (!have_format) fail(ErrorCode::Format, "malformed wav: no fmt chunk");
    if (!have_data) fail(ErrorCode::Format, "malformed wav: no data chunk");

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool float32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !float32)
        fail(ErrorCode::Format, "unsupported encoding: format " + std::to_string(format) + ", " +
                                    std::to_string(bits) + " bits");
    if (channels == 0 || rate == 0) fail(ErrorCode::Format, "malformed wav: zero channels or sample rate");
    const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
    if (block_align != frame_bytes) fail(ErrorCode::Format, "malformed wav: inconsistent block alignment");

    AudioClip clip;
    clip.sample_rate = rate;
    const std::size_t frames = data.size() / frame_bytes;
    clip.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double sum = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::uint8_t* p = data.data() + f * frame_bytes + c * (bits / 8);
            if (pcm16) {
                const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | p[1] << 8));
                sum += raw / 32768.0;
            } else {
                const std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                                          static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
                float value;
                std::memcpy(&value, &raw, sizeof value);
                sum += value;
            }
        }
        clip.samples[f] = sum / channels;
    }
    return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip) {
    require(clip.sample_rate > 0, ErrorCode::InvalidArgument, "wav: sample rate must be positive");
    const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
    const auto rate = static_cast<std::uint32_t>(clip.sample_rate);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);
    put_u32(out, rate);
    put_u32(out, rate * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_tag(out, "data");
    put_u32(out, data_bytes);
    for (double s : clip.samples) {
        const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
        const auto value = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put_u16(out, static_cast<std::uint16_t>(value));
    }
    return out;
}

}  // namespace multidx::audio
