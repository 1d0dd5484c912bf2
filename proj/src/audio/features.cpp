#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "multidx/audio.hpp"
#include "multidx/error.hpp"

namespace multidx::audio {

namespace {

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex mutex;
    return mutex;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

void check_clip(const AudioClip& clip) {
    require(clip.sample_rate > 0.0, ErrorCode::InvalidArgument, "audio: sample rate must be positive");
    require(clip.samples.size() >= kMinimumSamples, ErrorCode::InvalidArgument,
            "audio: clip too short (" + std::to_string(clip.samples.size()) + " samples, need " +
                std::to_string(kMinimumSamples) + ")");
}

}  // namespace

std::vector<double> AudioFeatures::values() const {
    return {minimum, maximum, mean, std_dev, skewness, kurtosis, dominant_frequency};
}

const std::vector<std::string>& AudioFeatures::feature_names() {
    static const std::vector<std::string> names{"Minimum",  "Maximum",  "Mean",
                                                "Standard deviation", "Skewness", "Kurtosis",
                                                "Dominant Frequency"};
    return names;
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

std::vector<double> magnitude_spectrum(std::span<const double> signal) {
    const std::size_t n = signal.size();
    require(n > 0, ErrorCode::InvalidArgument, "spectrum: empty signal");
    const std::size_t bins = n / 2 + 1;
    std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    std::unique_ptr<fftw_complex, FftwFree> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
    require(in && out, ErrorCode::Internal, "spectrum: allocation failed");

    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    }
    require(plan != nullptr, ErrorCode::Internal, "spectrum: fftw planning failed");
    std::copy(signal.begin(), signal.end(), in.get());
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }

    std::vector<double> magnitude(bins);
    for (std::size_t k = 0; k < bins; ++k) magnitude[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
    return magnitude;
}

double dominant_frequency(const AudioClip& clip) {
    check_clip(clip);
    const auto [lo, hi] = std::minmax_element(clip.samples.begin(), clip.samples.end());
    if (*lo == *hi) return 0.0;

    const std::size_t n = clip.samples.size();
    double mean = 0.0;
    for (double s : clip.samples) mean += s;
    mean /= static_cast<double>(n);
    const auto window = hann_window(n);
    std::vector<double> prepared(n);
    for (std::size_t i = 0; i < n; ++i) prepared[i] = (clip.samples[i] - mean) * window[i];

    const auto magnitude = magnitude_spectrum(prepared);
    std::size_t best = 1;
    for (std::size_t k = 2; k <= n / 2; ++k)
        if (magnitude[k] > magnitude[best]) best = k;
    return static_cast<double>(best) * clip.sample_rate / static_cast<double>(n);
}

Moments moments(std::span<const double> samples) {
    require(!samples.empty(), ErrorCode::InvalidArgument, "moments: empty sequence");
    const auto n = static_cast<double>(samples.size());
    Moments m;
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    m.minimum = *lo;
    m.maximum = *hi;
    if (m.minimum == m.maximum) {
        m.mean = m.minimum;
        return m;
    }
    for (double s : samples) m.mean += s;
    m.mean /= n;

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double s : samples) {
        const double d = s - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.std_dev = std::sqrt(m2);
    if (m2 > 0.0) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

AudioFeatures extract_features(const AudioClip& clip) {
    check_clip(clip);
    const Moments m = moments(clip.samples);
    return AudioFeatures{m.minimum, m.maximum, m.mean, m.std_dev, m.skewness, m.kurtosis, dominant_frequency(clip)};
}

}  // namespace multidx::audio
