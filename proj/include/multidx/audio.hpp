#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace multidx::audio {

inline constexpr std::size_t kMinimumSamples = 256;

struct AudioClip {
    std::vector<double> samples;  // mono, in [-1, 1]
    double sample_rate = 0.0;     // Hz
};

struct AudioFeatures {
    double minimum = 0.0;
    double maximum = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  // excess
    double dominant_frequency = 0.0;

    /// Values in the order of feature_names().
    std::vector<double> values() const;
    static const std::vector<std::string>& feature_names();
};

/// PCM 16-bit or IEEE float 32-bit (plain or WAVE_FORMAT_EXTENSIBLE); channels
/// are averaged to mono.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav(const std::filesystem::path& path);

/// 16-bit PCM mono container; samples are clamped to [-1, 1).
std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip);

/// Population moments of any non-empty sequence; a constant sequence has
/// skewness and kurtosis 0.
struct Moments {
    double minimum = 0.0;
    double maximum = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  // excess
};

Moments moments(std::span<const double> samples);

AudioFeatures extract_features(const AudioClip& clip);

/// Mean removed, Hann window, largest magnitude over bins 1..N/2 (lower bin on
/// ties), reported as the bin frequency k * rate / N.
double dominant_frequency(const AudioClip& clip);

/// |X_k| for k = 0..N/2 of a real signal.
std::vector<double> magnitude_spectrum(std::span<const double> signal);

/// Symmetric Hann window of length n.
std::vector<double> hann_window(std::size_t n);

}  // namespace multidx::audio
