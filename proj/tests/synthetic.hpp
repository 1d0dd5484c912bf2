#pragma once

// Small seeded datasets and quickly trained artifacts for every mode.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "multidx/pipeline.hpp"
#include "multidx/random.hpp"

namespace synthetic {

using multidx::Rng;
using multidx::modelstore::Mode;
namespace pipeline = multidx::pipeline;
namespace tabular = multidx::tabular;

/// Two overlapping classes: class-1 rows are shifted by `shift` in every
/// column. Binary features are thresholded; `missing_rate` blanks cells.
inline tabular::FeatureFrame labeled_frame(const tabular::FeatureSchema& schema, std::size_t n, std::uint64_t seed,
                                           double shift = 1.5, double missing_rate = 0.0) {
    Rng rng(seed);
    tabular::FeatureFrame frame;
    frame.schema = schema;
    frame.values = multidx::Matrix(n, schema.width());
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        labels[r] = static_cast<int>(r % 2);
        for (std::size_t c = 0; c < schema.width(); ++c) {
            double v = rng.normal() + shift * labels[r] + 0.1 * static_cast<double>(c);
            if (schema.feature_kinds[c] == tabular::FeatureKind::Binary) v = v > 0.75 ? 1.0 : 0.0;
            if (missing_rate > 0.0 && rng.uniform() < missing_rate && c > 0) v = tabular::kMissing;
            frame.values(r, c) = v;
        }
    }
    frame.labels = std::move(labels);
    return frame;
}

/// Decaying tone plus noise; the class sets the pitch.
inline multidx::audio::AudioClip cough_clip(int label, std::uint64_t seed, double rate = 8000.0,
                                            std::size_t samples = 2048) {
    Rng rng(seed);
    const double freq = (label == 0 ? 300.0 : 900.0) + 50.0 * rng.uniform();
    multidx::audio::AudioClip clip{std::vector<double>(samples), rate};
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / rate;
        clip.samples[i] = 0.6 * std::exp(-3.0 * t) * std::sin(2.0 * std::numbers::pi * freq * t) + 0.05 * rng.normal();
    }
    return clip;
}

inline multidx::audio::AudioClip tone(double freq, double rate, std::size_t samples, double amplitude = 0.5) {
    multidx::audio::AudioClip clip{std::vector<double>(samples), rate};
    for (std::size_t i = 0; i < samples; ++i)
        clip.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
    return clip;
}

inline tabular::FeatureFrame cough_frame(std::size_t n, std::uint64_t seed) {
    tabular::FeatureFrame frame;
    frame.schema = pipeline::default_schema(pipeline::experiment("exp2"));
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        frame.values.append_row(multidx::audio::extract_features(cough_clip(label, seed + i)).values());
        labels.push_back(label);
    }
    frame.labels = std::move(labels);
    return frame;
}

/// Gaussian peak whose position depends on the class.
inline std::vector<double> spectrum(int label, Rng& rng, std::size_t length) {
    const double centre = (label == 0 ? 0.3 : 0.7) * static_cast<double>(length) + 10.0 * rng.normal();
    std::vector<double> s(length);
    for (std::size_t i = 0; i < length; ++i) {
        const double d = (static_cast<double>(i) - centre) / (0.05 * static_cast<double>(length));
        s[i] = 100.0 * std::exp(-0.5 * d * d) + 2.0 * rng.normal();
    }
    return s;
}

inline pipeline::SpectraSet spectra(std::size_t n, std::uint64_t seed, std::size_t length = 900) {
    Rng rng(seed);
    pipeline::SpectraSet set;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        set.spectra.append_row(spectrum(label, rng, length));
        set.labels.push_back(label);
    }
    return set;
}

/// White page with a dark sinusoidal trace; class 1 oscillates faster.
inline multidx::imaging::GrayImage ecg_page(int label, Rng& rng, std::size_t width = 60, std::size_t height = 40) {
    multidx::imaging::GrayImage image(width, height, 0.95);
    const double cycles = (label == 0 ? 1.0 : 4.0) + 0.3 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    for (std::size_t x = 4; x + 4 < width; ++x) {
        const double t = static_cast<double>(x) / static_cast<double>(width);
        const double y = 0.5 * static_cast<double>(height) * (1.0 + 0.6 * std::sin(2.0 * std::numbers::pi * cycles * t + phase));
        const auto row = static_cast<std::size_t>(std::clamp(y, 0.0, static_cast<double>(height - 1)));
        image.at(x, row) = 0.1;
        if (row + 1 < height) image.at(x, row + 1) = 0.1;
    }
    return image;
}

inline pipeline::ImageSet ecg_pages(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    pipeline::ImageSet set;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        set.images.push_back(ecg_page(label, rng));
        set.labels.push_back(label);
    }
    return set;
}

/// The experiment's stack with fewer trees and rounds.
inline multidx::stacking::StackSpec small_stack(const std::string& id, std::uint64_t seed) {
    auto spec = multidx::stacking::preset(id, seed);
    auto shrink = [](multidx::learners::LearnerSpec& s) {
        if (auto* rf = std::get_if<multidx::learners::RandomForestParams>(&s.params)) rf->trees = 15;
        if (auto* gb = std::get_if<multidx::learners::BoostingParams>(&s.params)) {
            gb->rounds = 5;
            gb->max_depth = 4;
        }
    };
    for (auto& base : spec.base_specs) shrink(base);
    shrink(spec.meta_spec);
    return spec;
}

inline std::vector<multidx::cnn::LayerSpec> tiny_cnn() {
    using namespace multidx::cnn;
    return {Conv2D{4}, ReLU{}, MaxPool{}, Flatten{}, Dense{2}, Softmax{}};
}

inline pipeline::TrainOptions small_options(const std::string& id, std::uint64_t seed) {
    pipeline::TrainOptions options;
    options.seed = seed;
    options.folds = 3;
    const auto& e = pipeline::experiment(id);
    if (multidx::modelstore::input_kind(e.mode) == multidx::modelstore::InputKind::Image) {
        options.resolutions = {16};
        options.epochs = 3;
        options.architecture = tiny_cnn();
    } else {
        options.stack = small_stack(id, seed);
    }
    return options;
}

inline std::string experiment_for(Mode mode) {
    for (auto id : pipeline::experiment_ids())
        if (pipeline::experiment(id).mode == mode) return std::string(id);
    return {};
}

/// A trained artifact for `mode` on a small synthetic dataset.
inline pipeline::TrainOutcome train_fixture(Mode mode, std::uint64_t seed = 7) {
    const std::string id = experiment_for(mode);
    const auto& e = pipeline::experiment(id);
    const auto options = small_options(id, seed);
    switch (mode) {
        case Mode::Cough: return pipeline::train_tabular(e, cough_frame(40, seed), options);
        case Mode::Raman: return pipeline::train_raman(e, spectra(30, seed), options);
        case Mode::Ecg: return pipeline::train_ecg(e, ecg_pages(30, seed), options);
        default: return pipeline::train_tabular(e, labeled_frame(pipeline::default_schema(e), 60, seed, 1.5, 0.05), options);
    }
}

inline multidx::modelstore::Artifact fixture_artifact(Mode mode, std::uint64_t seed = 7) {
    return train_fixture(mode, seed).artifacts.at(0).artifact;
}

/// A representative input for `mode`.
inline pipeline::PredictInput fixture_input(Mode mode, std::uint64_t seed = 3) {
    Rng rng(seed);
    switch (mode) {
        case Mode::Cough: return tone(440.0, 8000.0, 8000);
        case Mode::Raman: return multidx::imaging::rasterize_spectrum(spectrum(1, rng, 900), 64);
        case Mode::Ecg: return ecg_page(1, rng);
        default: {
            const auto schema = pipeline::default_schema(pipeline::experiment(experiment_for(mode)));
            pipeline::FeatureInput input;
            for (std::size_t c = 0; c < schema.width(); ++c)
                input.values.push_back(schema.feature_kinds[c] == tabular::FeatureKind::Binary ? static_cast<double>(c % 2)
                                                                                               : rng.normal() + 0.7);
            return input;
        }
    }
}

}  // namespace synthetic
