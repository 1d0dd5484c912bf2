#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "multidx/pipeline.hpp"
#include "oracles/tabular_oracles.hpp"
#include "synthetic.hpp"

using namespace multidx;
using modelstore::Mode;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// CSV of `frame` with its feature columns shuffled among extra columns.
std::string to_csv(const tabular::FeatureFrame& frame) {
    std::string text = "id";
    for (std::size_t c = frame.cols(); c-- > 0;) text += "," + frame.schema.feature_names[c];
    text += ",unused," + frame.schema.label_name + "\n";
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        text += std::to_string(r);
        for (std::size_t c = frame.cols(); c-- > 0;) {
            text += ",";
            if (!frame.is_missing(r, c)) text += std::to_string(frame.values(r, c));
        }
        text += ",x," + frame.schema.class_names[static_cast<std::size_t>((*frame.labels)[r])] + "\n";
    }
    return text;
}

}  // namespace

TEST_CASE("experiment table") {
    CHECK(pipeline::experiment_ids().size() == 8);
    const auto& e32 = pipeline::experiment("exp32");
    CHECK(e32.mode == Mode::Blood5);
    CHECK(e32.features == std::vector<std::string>{"Age", "TWBC", "Eosinophils", "Monocytes", "Platelets"});
    CHECK(e32.train_fraction == 0.7);
    CHECK(pipeline::experiment("exp31").features.size() == 25);
    CHECK(pipeline::experiment("exp61").features.size() == 7);
    CHECK(pipeline::experiment("exp62").features.size() == 9);
    CHECK(pipeline::experiment("exp61").train_fraction == 0.8);
    CHECK(pipeline::experiment("exp1").features ==
          std::vector<std::string>{"Headache", "Fever", "Cough", "Sore throat", "Shortness of breath"});
    CHECK(pipeline::experiment("exp1").feature_kind == tabular::FeatureKind::Binary);
    CHECK(pipeline::experiment("exp2").features == audio::AudioFeatures::feature_names());
    const auto& e4 = pipeline::experiment("exp4");
    CHECK(e4.default_resolutions == std::vector<std::size_t>{32, 64, 128, 256, 512, 800});
    CHECK(e4.train_fraction == 0.7);
    CHECK(e4.validation_fraction == 0.2);
    CHECK(pipeline::experiment("exp5").default_resolutions == std::vector<std::size_t>{224});
    CHECK_THROWS_WITH(pipeline::experiment("exp7"), doctest::Contains("unknown experiment"));
    for (auto id : pipeline::experiment_ids())
        if (modelstore::input_kind(pipeline::experiment(id).mode) != modelstore::InputKind::Image)
            CHECK_NOTHROW(stacking::preset(id));
}

TEST_CASE("tabular CSV loading") {
    TempDir dir("multidx_test_pipeline_csv");
    const auto& e = pipeline::experiment("exp32");
    const auto frame = synthetic::labeled_frame(pipeline::default_schema(e), 20, 1, 1.5, 0.1);
    write_text(dir.path / "data.csv", to_csv(frame));

    const auto loaded = pipeline::load_tabular(e, dir.path / "data.csv", std::nullopt);
    CHECK(loaded.schema.feature_names == e.features);
    CHECK(loaded.labels == frame.labels);
    for (std::size_t r = 0; r < frame.rows(); ++r)
        for (std::size_t c = 0; c < frame.cols(); ++c) {
            CHECK(loaded.is_missing(r, c) == frame.is_missing(r, c));
            if (!frame.is_missing(r, c)) CHECK(loaded.values(r, c) == doctest::Approx(frame.values(r, c)).epsilon(1e-5));
        }

    SUBCASE("a missing feature column is named") {
        std::string text = to_csv(frame);
        text.replace(text.find("Platelets"), 9, "Plates");
        write_text(dir.path / "bad.csv", text);
        CHECK_THROWS_WITH(pipeline::load_tabular(e, dir.path / "bad.csv", std::nullopt),
                          doctest::Contains("missing column 'Platelets'"));
    }
    SUBCASE("schema sidecar sets the label column") {
        auto schema = tabular::FeatureSchema::numeric({"Platelets", "Extra", "Age", "TWBC", "Eosinophils", "Monocytes"},
                                                      "label", {"negative", "positive"});
        const auto custom = pipeline::load_tabular(e, dir.path / "data.csv", schema);
        CHECK(custom.schema.feature_names == e.features);
        schema.feature_names[0] = "PLT";
        CHECK_THROWS_WITH(pipeline::load_tabular(e, dir.path / "data.csv", schema),
                          doctest::Contains("no feature 'Platelets'"));
    }
}

TEST_CASE("tabular training") {
    const auto& e = pipeline::experiment("exp32");
    const auto frame = synthetic::labeled_frame(pipeline::default_schema(e), 80, 5, 2.0, 0.05);
    const auto options = synthetic::small_options("exp32", 11);
    const auto outcome = pipeline::train_tabular(e, frame, options);

    REQUIRE(outcome.artifacts.size() == 1);
    const auto& artifact = outcome.artifacts[0].artifact;
    CHECK(artifact.mode == Mode::Blood5);
    CHECK(artifact.model_version == "exp32-seed11");
    CHECK(artifact.tabular->input_schema.feature_names == e.features);
    CHECK(artifact.tabular->imputer_donors.rows() == 80);
    CHECK_NOTHROW(artifact.validate());

    REQUIRE(outcome.rows.size() == 4);
    CHECK(outcome.rows[0].model == "RFC");
    CHECK(outcome.rows[1].model == "XGBoost");
    CHECK(outcome.rows[2].model == "KNN");
    CHECK(outcome.rows[3].model == "Stacked (NB)");
    // 30% of 80 rows held out; well-separated classes.
    CHECK(*outcome.rows[3].report.accuracy > 0.8);

    SUBCASE("same seed, same artifact and table") {
        const auto again = pipeline::train_tabular(e, frame, options);
        CHECK(modelstore::serialize(again.artifacts[0].artifact) == modelstore::serialize(artifact));
        CHECK(pipeline::format_metrics_table(again.rows) == pipeline::format_metrics_table(outcome.rows));
    }
    SUBCASE("leaky order still trains") {
        auto leaky = options;
        leaky.leaky_smote = true;
        const auto result = pipeline::train_tabular(e, frame, leaky);
        CHECK(result.rows.size() == 4);
        CHECK_NOTHROW(result.artifacts[0].artifact.validate());
    }
    SUBCASE("features must match the experiment") {
        CHECK_THROWS_WITH(pipeline::train_tabular(pipeline::experiment("exp31"), frame, options),
                          doctest::Contains("schema mismatch"));
    }
}

TEST_CASE("serving path matches an independent recomputation") {
    const auto artifact = synthetic::fixture_artifact(Mode::Blood5);
    const auto& prep = *artifact.tabular;
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> raw(prep.input_schema.width());
        for (double& v : raw) v = rng.normal();
        const std::size_t blank = static_cast<std::size_t>(trial) % (raw.size() + 1);
        if (blank < raw.size()) raw[blank] = tabular::kMissing;

        // Donors plus the query row, so the oracle's self-exclusion matches serving.
        oracle::Rows rows;
        for (std::size_t r = 0; r < prep.imputer_donors.rows(); ++r) {
            std::vector<std::optional<double>> row;
            for (double v : prep.imputer_donors.row(r)) row.push_back(std::isnan(v) ? std::nullopt : std::optional(v));
            rows.push_back(row);
        }
        std::vector<std::optional<double>> query;
        for (double v : raw) query.push_back(std::isnan(v) ? std::nullopt : std::optional(v));
        rows.push_back(query);
        auto expected = oracle::impute(rows, prep.imputer_k).back();
        for (std::size_t c = 0; c < expected.size(); ++c) {
            const double sd = prep.scaler.std_dev()[c];
            expected[c] = (expected[c] - prep.scaler.mean()[c]) / (sd > 0.0 ? sd : 1.0);
        }
        const auto got = pipeline::prepare_tabular(prep, raw);
        REQUIRE(got.size() == expected.size());
        for (std::size_t c = 0; c < got.size(); ++c) CHECK(got[c] == doctest::Approx(expected[c]).epsilon(1e-12));

        const auto prediction = pipeline::predict(artifact, pipeline::FeatureInput{raw});
        const auto direct = stacking::predict_stack(std::get<stacking::StackedModel>(artifact.model),
                                                    Matrix(1, got.size(), got));
        CHECK(prediction.probabilities[1] == direct.probabilities(0, 1));
        CHECK(prediction.probability_positive == prediction.probabilities[1]);
        CHECK((prediction.label == "covid-positive") == (prediction.probability_positive >= 0.5));
    }
    CHECK_THROWS_WITH(pipeline::predict(artifact, pipeline::FeatureInput{{1.0, 2.0}}),
                      doctest::Contains("expected 5 features, got 2"));
    CHECK_THROWS_WITH(pipeline::predict(artifact, synthetic::tone(440.0, 8000.0, 8000)),
                      doctest::Contains("input kind mismatch"));
    std::vector<double> empty_row(5, tabular::kMissing);
    CHECK_THROWS_WITH(pipeline::predict(artifact, pipeline::FeatureInput{empty_row}), doctest::Contains("unimputable"));
}

TEST_CASE("mortality labels") {
    const auto artifact = synthetic::fixture_artifact(Mode::Mortality7);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = pipeline::predict(artifact, synthetic::fixture_input(Mode::Mortality7, seed));
        CHECK((p.label == "high-risk" || p.label == "low-risk"));
        CHECK((p.label == "high-risk") == (p.probability_positive >= 0.5));
    }
}

TEST_CASE("cough pipeline") {
    TempDir dir("multidx_test_pipeline_wav");
    fs::create_directories(dir.path / "negative");
    fs::create_directories(dir.path / "positive");
    std::vector<std::vector<double>> expected;
    for (int i = 0; i < 6; ++i) {
        const int label = i % 2;
        const auto clip = synthetic::cough_clip(label, static_cast<std::uint64_t>(i));
        const auto bytes = audio::encode_wav_pcm16(clip);
        write_bytes(dir.path / (label ? "positive" : "negative") / ("c" + std::to_string(i) + ".wav"), bytes);
    }
    write_text(dir.path / "negative" / "notes.txt", "ignored");
    const auto& e = pipeline::experiment("exp2");
    const auto frame = pipeline::load_cough(e, dir.path, std::nullopt);
    CHECK(frame.rows() == 6);
    CHECK(*frame.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
    const auto first = audio::extract_features(audio::read_wav(dir.path / "negative" / "c0.wav")).values();
    for (std::size_t c = 0; c < first.size(); ++c) CHECK(frame.values(0, c) == first[c]);

    fs::remove_all(dir.path / "positive");
    CHECK_THROWS_WITH(pipeline::load_cough(e, dir.path, std::nullopt), doctest::Contains("missing class directory"));

    const auto artifact = synthetic::fixture_artifact(Mode::Cough);
    const auto clip = synthetic::tone(440.0, 8000.0, 8000);
    const auto via_pipeline = pipeline::predict(artifact, clip);
    const auto features = audio::extract_features(clip).values();
    const auto row = pipeline::prepare_tabular(*artifact.tabular, features);
    const auto direct = stacking::predict_stack(std::get<stacking::StackedModel>(artifact.model), Matrix(1, row.size(), row));
    CHECK(via_pipeline.probabilities[1] == direct.probabilities(0, 1));
}

TEST_CASE("raman pipeline") {
    const auto& e = pipeline::experiment("exp4");
    auto options = synthetic::small_options("exp4", 2);
    options.resolutions = {16, 24};
    const auto outcome = pipeline::train_raman(e, synthetic::spectra(30, 4), options);
    REQUIRE(outcome.artifacts.size() == 2);
    REQUIRE(outcome.rows.size() == 2);
    CHECK(outcome.rows[0].model == "CNN 16x16");
    CHECK(outcome.rows[1].model == "CNN 24x24");
    CHECK(outcome.artifacts[1].artifact.image->size == 24);
    CHECK(outcome.artifacts[1].artifact.model_version == "exp4-seed2-24px");
    CHECK(outcome.artifacts[0].history.size() == 3);

    const auto& artifact = outcome.artifacts[0].artifact;
    Rng rng(9);
    const auto spectrum = synthetic::spectrum(0, rng, 900);
    const auto native = imaging::rasterize_spectrum(spectrum, 16);
    const auto p = pipeline::predict(artifact, native);
    const auto direct = cnn::predict_proba(std::get<cnn::CnnModel>(artifact.model), cnn::image_to_tensor(native));
    CHECK(p.probabilities == direct);
    // Other sizes are resampled to the model input.
    CHECK(pipeline::prepare_image(*artifact.image, imaging::rasterize_spectrum(spectrum, 64)).shape ==
          std::vector<std::size_t>{16, 16, 1});
    CHECK_THROWS_WITH(pipeline::predict(artifact, pipeline::FeatureInput{{1.0}}), doctest::Contains("expects an image"));

    SUBCASE("spectra CSV") {
        TempDir dir("multidx_test_pipeline_raman");
        std::string text = "label";
        for (int i = 0; i < 5; ++i) text += ",w" + std::to_string(i);
        text += "\npositive,1,2,3,4,5\nnegative,5,4,3,2,1\n0,1,1,1,1,2\n";
        write_text(dir.path / "r.csv", text);
        const auto set = pipeline::load_spectra(dir.path / "r.csv", std::nullopt);
        CHECK(set.labels == std::vector<int>{1, 0, 0});
        CHECK(set.spectra.cols() == 5);
        CHECK(set.spectra(1, 0) == 5.0);
        write_text(dir.path / "bad.csv", "label,a,b\npositive,1,\n");
        CHECK_THROWS_WITH(pipeline::load_spectra(dir.path / "bad.csv", std::nullopt),
                          doctest::Contains("missing intensity"));
    }
}

TEST_CASE("ecg pipeline") {
    TempDir dir("multidx_test_pipeline_ecg");
    const auto pages = synthetic::ecg_pages(4, 3);
    for (std::size_t i = 0; i < pages.images.size(); ++i) {
        const auto sub = dir.path / (pages.labels[i] ? "positive" : "negative");
        fs::create_directories(sub);
        imaging::write_png(pages.images[i], sub / ("p" + std::to_string(i) + ".png"));
    }
    const auto set = pipeline::load_images(dir.path);
    CHECK(set.labels == std::vector<int>{0, 0, 1, 1});
    CHECK(set.images[0] == imaging::decode_png(imaging::encode_png(pages.images[0])));

    const auto artifact = synthetic::fixture_artifact(Mode::Ecg);
    CHECK(artifact.image->kind == modelstore::ImageKind::EcgReport);
    const auto p = pipeline::predict(artifact, set.images[2]);
    const auto direct = cnn::predict_proba(std::get<cnn::CnnModel>(artifact.model),
                                           cnn::image_to_tensor(imaging::preprocess_ecg(set.images[2], 16)));
    CHECK(p.probabilities == direct);
}

TEST_CASE("metrics table layout") {
    std::vector<pipeline::MetricsRow> rows{{"RFC", metrics::compute_metrics({3, 5, 1, 1})},
                                           {"Stacked (NB)", metrics::compute_metrics({0, 4, 0, 0})}};
    CHECK(pipeline::format_metrics_table(rows) ==
          "model          accuracy  precision     recall         f1\n"
          "RFC               80.00      75.00      75.00      75.00\n"
          "Stacked (NB)     100.00          -          -          -\n");
}
