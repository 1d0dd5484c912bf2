// One line per acceptance criterion: PASS, FAIL or SKIP, with runtime against
// its budget. Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <thread>

#include "cnn_toys.hpp"
#include "multidx/cli.hpp"
#include "multidx/metrics.hpp"
#include "multidx/service.hpp"
#include "multidx/stacking.hpp"
#include "oracles/cnn_oracles.hpp"
#include "oracles/dft.hpp"
#include "oracles/image_oracles.hpp"
#include "oracles/tabular_oracles.hpp"
#include "httplib.h"
#include "requests.hpp"
#include "synthetic.hpp"

using namespace multidx;
using modelstore::Mode;

namespace {

namespace fs = std::filesystem;

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status = Status::Pass;
    std::string detail;
};

Outcome pass(std::string detail) { return {Status::Pass, std::move(detail)}; }
Outcome fail_with(std::string detail) { return {Status::Fail, std::move(detail)}; }

struct Criterion {
    std::string name;
    double budget_s;
    std::function<Outcome()> body;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
    char buffer[256];
    std::snprintf(buffer, sizeof buffer, format, a, b, c);
    return buffer;
}

// --- criteria ------------------------------------------------------------------

Outcome metrics_oracle() {
    const auto r = metrics::compute_metrics(metrics::ConfusionMatrix{3, 5, 1, 1});
    if (std::abs(*r.accuracy - 0.8) > 1e-15 || *r.precision != 0.75 || *r.recall != 0.75 || *r.f1 != 0.75)
        return fail_with("cm(3,5,1,1) gave " + metrics::to_json(r).dump());
    Rng rng(11);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        metrics::ConfusionMatrix cm{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
        if (cm.total() == 0) cm.tn = 1;
        const auto m = metrics::compute_metrics(cm);
        if (!m.f1) continue;
        ++checked;
        if (*m.f1 < std::min(*m.precision, *m.recall) - 1e-12 || *m.f1 > std::max(*m.precision, *m.recall) + 1e-12)
            return fail_with("F1 outside [min(P,R), max(P,R)] at matrix " + std::to_string(i));
    }
    return pass("accuracy 0.8, P=R=F1=0.75; F1 bounded on " + std::to_string(checked) + " matrices");
}

Outcome imputer_equivalence() {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t rows = 2 + rng.below(19);
        const std::size_t cols = 1 + rng.below(6);
        const std::size_t k = 1 + rng.below(6);
        std::vector<std::string> names;
        for (std::size_t c = 0; c < cols; ++c) names.push_back("f" + std::to_string(c));
        tabular::FeatureFrame frame{tabular::FeatureSchema::numeric(names), Matrix(rows, cols), std::nullopt};
        oracle::Rows raw(rows, std::vector<std::optional<double>>(cols));
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double v = std::floor(rng.uniform() * 5.0);
                if (rng.uniform() < 0.25) {
                    frame.values(r, c) = tabular::kMissing;
                } else {
                    frame.values(r, c) = v;
                    raw[r][c] = v;
                }
            }
            if (std::all_of(raw[r].begin(), raw[r].end(), [](auto& v) { return !v; })) {
                raw[r][0] = 1.0;
                frame.values(r, 0) = 1.0;
            }
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (std::none_of(raw.begin(), raw.end(), [&](auto& row) { return row[c].has_value(); })) {
                raw[0][c] = 2.0;
                frame.values(0, c) = 2.0;
            }
        }
        const auto expected = oracle::impute(raw, k);
        const auto got = tabular::impute_knn(frame, k);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) worst = std::max(worst, std::abs(got.values(r, c) - expected[r][c]));
        if (worst > 1e-9) return fail_with("frame " + std::to_string(trial) + " differs by " + fmt("%.3g", worst));
    }
    return pass("500 frames, max deviation " + fmt("%.3g", worst));
}

Outcome smote_geometry() {
    Rng rng(77);
    std::size_t synthetic_rows = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t classes = 2 + rng.below(2);
        const std::size_t cols = 1 + rng.below(5);
        std::vector<std::string> names;
        for (std::size_t c = 0; c < cols; ++c) names.push_back("f" + std::to_string(c));
        tabular::FeatureFrame frame{tabular::FeatureSchema::numeric(names), Matrix(0, cols), std::vector<int>{}};
        frame.schema.class_names.clear();
        for (std::size_t c = 0; c < classes; ++c) frame.schema.class_names.push_back("c" + std::to_string(c));
        const std::size_t rows = 12 + rng.below(30);
        for (std::size_t r = 0; r < rows + 2 * classes; ++r) {
            std::vector<double> row(cols);
            for (double& v : row) v = rng.uniform() * 10.0 - 5.0;
            frame.values.append_row(row);
            // The trailing rows give every class at least two members.
            frame.labels->push_back(static_cast<int>(r < rows ? rng.below(classes) : (r - rows) / 2));
        }
        const auto out = tabular::smote_balance(frame, {1 + rng.below(6), rng.next()});
        const auto counts = out.class_counts();
        if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) != counts.end())
            return fail_with("unequal class counts in frame " + std::to_string(trial));
        for (std::size_t r = 0; r < frame.rows(); ++r)
            for (std::size_t c = 0; c < cols; ++c)
                if (out.values(r, c) != frame.values(r, c)) return fail_with("original row changed");
        for (std::size_t r = frame.rows(); r < out.rows(); ++r) {
            ++synthetic_rows;
            const int cls = (*out.labels)[r];
            const std::vector<double> p(out.values.row(r).begin(), out.values.row(r).end());
            bool found = false;
            for (std::size_t i = 0; i < frame.rows() && !found; ++i) {
                if ((*frame.labels)[i] != cls) continue;
                const std::vector<double> a(frame.values.row(i).begin(), frame.values.row(i).end());
                for (std::size_t j = 0; j < frame.rows() && !found; ++j) {
                    if (j == i || (*frame.labels)[j] != cls) continue;
                    const std::vector<double> b(frame.values.row(j).begin(), frame.values.row(j).end());
                    found = oracle::on_segment(p, a, b, 1e-9);
                }
            }
            if (!found) return fail_with("frame " + std::to_string(trial) + " row " + std::to_string(r) + " off every segment");
        }
    }
    return pass("200 frames balanced, " + std::to_string(synthetic_rows) + " synthetic rows on minority segments");
}

Outcome gradient_check() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto inputs = toys::random_inputs(seed + 7, 3, {6, 6, 2});
        worst = std::max(worst, oracle::max_gradient_error(toys::gradient_net(seed), inputs, {0, 2, 1}));
    }
    if (worst >= 1e-4) return fail_with("max relative error " + fmt("%.3g", worst));
    return pass("conv+dense toy net, max relative error " + fmt("%.3g", worst));
}

Outcome cnn_convergence() {
    const auto data = toys::halves(20, 16, 1);
    cnn::TrainConfig config;
    config.seed = 11;
    config.epochs = 25;
    config.learning_rate = 1e-4;
    const auto result = cnn::train(cnn::build_model({16, 16, 1}, cnn::default_architecture(2), 2, config), data);
    std::size_t first = 0;
    for (std::size_t e = 0; e < result.history.size() && first == 0; ++e)
        if (result.history[e].train_accuracy == 1.0) first = e + 1;
    const double final_accuracy = cnn::evaluate(result.model, data).accuracy;
    if (final_accuracy != 1.0) return fail_with("train accuracy " + fmt("%.3f", final_accuracy) + " after 25 epochs");
    return pass("20 images, Adam lr 1e-4: 100% train accuracy from epoch " + std::to_string(first));
}

Outcome audio_criterion() {
    audio::AudioClip clip{std::vector<double>(8000), 8000.0};
    for (std::size_t i = 0; i < clip.samples.size(); ++i)
        clip.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 8000.0);
    const double hz = audio::dominant_frequency(clip);
    if (std::abs(hz - 440.0) > 1.0) return fail_with("dominant frequency " + fmt("%.3f", hz) + " Hz");
    Rng rng(5);
    double worst = 0.0;
    for (std::size_t n : {256u, 257u, 1000u, 1024u, 2048u, 4096u}) {
        std::vector<double> x(n);
        for (double& v : x) v = rng.normal();
        const auto fast = audio::magnitude_spectrum(x);
        const auto slow = oracle::naive_dft_magnitude(x);
        const double peak = *std::max_element(slow.begin(), slow.end());
        for (std::size_t k = 0; k < slow.size(); ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]) / peak);
    }
    if (worst > 1e-6) return fail_with("fast transform deviates by " + fmt("%.3g", worst));
    return pass("440 Hz sine -> " + fmt("%.2f", hz) + " Hz; FFT vs naive DFT " + fmt("%.3g", worst));
}

Outcome imaging_criterion() {
    Rng rng(3);
    int cropped = 0;
    for (int trial = 0; trial < 200; ++trial) {
        imaging::GrayImage img(5 + rng.below(40), 5 + rng.below(40), 1.0);
        const double density = 0.02 + 0.2 * rng.uniform();
        for (double& p : img.pixels) p = rng.uniform() < density ? 0.0 : 1.0;
        std::vector<imaging::Point> fg;
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                if (img.at(x, y) < 0.5) fg.push_back({long(x), long(y)});
        const auto hull = imaging::convex_hull(fg);
        if (hull.size() < 3) continue;
        ++cropped;
        for (auto p : fg)
            if (!oracle::inside_hull(hull, p)) return fail_with("foreground pixel outside the hull in image " + std::to_string(trial));
        const auto once = imaging::convex_hull_crop(img);
        if (!(imaging::convex_hull_crop(once) == once)) return fail_with("crop not idempotent in image " + std::to_string(trial));
    }
    Rng srng(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s(imaging::kRamanLength);
        double walk = 0.0;
        for (double& v : s) v = walk += srng.normal();
        auto t = s;
        const double a = 0.5 + 3.0 * srng.uniform();
        const double b = 10.0 * srng.normal();
        for (double& v : t) v = a * v + b;
        for (std::size_t res : {32u, 64u, 128u})
            if (!(imaging::rasterize_spectrum(s, res) == imaging::rasterize_spectrum(t, res)))
                return fail_with("rasterization changed under an affine intensity map");
    }
    return pass(std::to_string(cropped) + " hull crops idempotent with full membership; rasterization affine-invariant");
}

tabular::FeatureFrame overlapping_gaussians(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<std::string> names;
    for (int c = 0; c < 6; ++c) names.push_back("g" + std::to_string(c));
    tabular::FeatureFrame frame{tabular::FeatureSchema::numeric(names), Matrix(0, names.size()), std::vector<int>{}};
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 2);
        std::vector<double> row(names.size());
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = rng.normal() + (c < 3 ? (cls ? 0.5 : -0.5) : 0.0);
        frame.values.append_row(row);
        frame.labels->push_back(cls);
    }
    return frame;
}

Outcome stacking_gain() {
    double stacked = 0.0, best = 0.0;
    constexpr int kSeeds = 10;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const auto frame = overlapping_gaussians(1000 + seed, 600);
        const auto parts = tabular::split(frame, {0.7, 0.0, seed, true});
        const auto model = stacking::fit_stack(stacking::preset("exp31", seed), parts.train);
        const auto& truth = *parts.test.labels;
        auto accuracy = [&](const std::vector<int>& predicted) {
            double hit = 0.0;
            for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == truth[i];
            return hit / static_cast<double>(predicted.size());
        };
        stacked += accuracy(stacking::predict_stack(model, parts.test).labels);
        double best_base = 0.0;
        for (const auto& base : model.bases) best_base = std::max(best_base, accuracy(learners::predict_label(base, parts.test)));
        best += best_base;
    }
    stacked = 100.0 * stacked / kSeeds;
    best = 100.0 * best / kSeeds;
    const std::string detail = fmt("exp31 stack, n=600 x 10 seeds: stacked %.2f%%, best base %.2f%%", stacked, best);
    return stacked >= best - 2.0 ? pass(detail) : fail_with(detail);
}

Outcome service_equivalence() {
    service::Registry registry;
    std::vector<std::pair<Mode, pipeline::PredictInput>> inputs;
    for (const auto mode : modelstore::kAllModes) {
        registry.add(synthetic::fixture_artifact(mode));
        inputs.emplace_back(mode, synthetic::fixture_input(mode));
    }
    service::ServerOptions options;
    options.host = "127.0.0.1";
    options.port = 0;
    service::Server server(registry, options);
    const int port = server.bind();
    std::thread serving([&] { server.listen(); });
    Outcome outcome = pass("8 modes, HTTP probability bitwise equal to the library");
    httplib::Client client("127.0.0.1", port);
    for (const auto& [mode, input] : inputs) {
        const auto& artifact = *registry.find(mode);
        const auto direct = pipeline::predict(artifact, requests::as_received(input));
        const auto res = client.Post("/v1/predict/" + std::string(modelstore::to_string(mode)),
                                     requests::body_for(artifact, input).dump(), "application/json");
        if (!res || res->status != 200) {
            outcome = fail_with(std::string(modelstore::to_string(mode)) + ": request failed");
            break;
        }
        const double served = nlohmann::json::parse(res->body)["result"]["probability_positive"].get<double>();
        if (served != direct.probability_positive) {
            outcome = fail_with(std::string(modelstore::to_string(mode)) + fmt(": served %.17g, library %.17g", served,
                                                                                  direct.probability_positive));
            break;
        }
    }
    server.stop();
    serving.join();
    return outcome;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "multidx_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const auto frame = synthetic::labeled_frame(pipeline::default_schema(pipeline::experiment("exp32")), 150, 5, 1.2, 0.05);
    {
        std::ofstream csv(dir / "blood.csv");
        for (const auto& name : frame.schema.feature_names) csv << name << ",";
        csv << "label\n";
        for (std::size_t r = 0; r < frame.rows(); ++r) {
            for (std::size_t c = 0; c < frame.cols(); ++c) {
                if (!frame.is_missing(r, c)) csv << fmt("%.17g", frame.values(r, c));
                csv << ",";
            }
            csv << frame.schema.class_names[static_cast<std::size_t>((*frame.labels)[r])] << "\n";
        }
    }
    {
        const auto set = synthetic::spectra(16, 9, 120);
        std::ofstream csv(dir / "raman.csv");
        csv << "label";
        for (std::size_t c = 0; c < set.spectra.cols(); ++c) csv << ",s" << c;
        csv << "\n";
        for (std::size_t r = 0; r < set.spectra.rows(); ++r) {
            csv << (set.labels[r] ? "positive" : "negative");
            for (std::size_t c = 0; c < set.spectra.cols(); ++c) csv << "," << fmt("%.17g", set.spectra(r, c));
            csv << "\n";
        }
    }

    struct Job {
        std::string experiment, data;
        std::vector<std::size_t> resolutions;
        std::optional<std::size_t> epochs;
    };
    const std::vector<Job> jobs{{"exp32", "blood.csv", {}, std::nullopt}, {"exp4", "raman.csv", {32}, 2}};
    std::string detail;
    for (const auto& job : jobs) {
        std::string tables[2], files[2];
        for (int run = 0; run < 2; ++run) {
            cli::TrainArgs args;
            args.experiment = job.experiment;
            args.data = dir / job.data;
            args.out = dir / (job.experiment + "-" + std::to_string(run) + ".mdx");
            args.seed = 42;
            args.resolutions = job.resolutions;
            args.epochs = job.epochs;
            std::ostringstream out, err;
            if (cli::cmd_train(args, out, err) != cli::kOk) return fail_with(job.experiment + ": " + err.str());
            tables[run] = out.str().substr(0, out.str().find("wrote"));
            files[run] = slurp(args.out);
        }
        if (tables[0] != tables[1]) return fail_with(job.experiment + ": metrics tables differ");
        if (files[0] != files[1]) return fail_with(job.experiment + ": .mdx files differ");
        detail += (detail.empty() ? "" : ", ") + job.experiment + " (" + std::to_string(files[0].size()) + " bytes)";
    }
    fs::remove_all(dir);
    return pass("seed 42 twice: identical tables and .mdx for " + detail);
}

/// Mean metrics of the experiment's final row over seeds 0..4.
struct SweepResult {
    double accuracy = 0.0, recall = 0.0;
};

SweepResult sweep(const std::string& id, const fs::path& data, std::vector<std::size_t> resolutions = {}) {
    SweepResult mean;
    constexpr int kSeeds = 5;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        pipeline::TrainOptions options;
        options.seed = seed;
        options.resolutions = resolutions;
        const auto outcome = pipeline::train_experiment(pipeline::experiment(id), data, options, std::nullopt);
        const auto& report = outcome.rows.back().report;
        mean.accuracy += 100.0 * report.accuracy.value_or(0.0) / kSeeds;
        mean.recall += 100.0 * report.recall.value_or(0.0) / kSeeds;
    }
    return mean;
}

Outcome dataset_reproduction() {
    const char* root = std::getenv("MULTIDX_DATA_DIR");
    if (root == nullptr || *root == '\0') return {Status::Skip, "MULTIDX_DATA_DIR not set; public datasets not ingested"};
    const fs::path dir(root);
    std::vector<std::string> passed, failed, missing;
    auto record = [&](const std::string& what, bool ok, const std::string& numbers) {
        (ok ? passed : failed).push_back(what + " " + numbers);
    };
    auto first_existing = [&](std::initializer_list<const char*> names) -> std::optional<fs::path> {
        for (const auto* name : names)
            if (fs::exists(dir / name)) return dir / name;
        return std::nullopt;
    };

    if (const auto blood = first_existing({"blood.csv"})) {
        const auto e31 = sweep("exp31", *blood);
        record("exp31", e31.accuracy >= 97.0 && e31.recall == 100.0, fmt("acc %.2f%% recall %.2f%%", e31.accuracy, e31.recall));
        const auto e32 = sweep("exp32", *blood);
        record("exp32", std::abs(e32.accuracy - 95.24) <= 3.0, fmt("acc %.2f%%", e32.accuracy));
    } else {
        missing.push_back("blood.csv");
    }
    if (const auto cough = first_existing({"cough", "cough.csv"})) {
        const auto e2 = sweep("exp2", *cough);
        record("exp2", std::abs(e2.accuracy - 95.65) <= 5.0, fmt("acc %.2f%%", e2.accuracy));
    } else {
        missing.push_back("cough/");
    }
    if (const auto symptoms = first_existing({"symptoms.csv"})) {
        const auto e1 = sweep("exp1", *symptoms);
        record("exp1", std::abs(e1.accuracy - 77.59) <= 3.0, fmt("acc %.2f%%", e1.accuracy));
    } else {
        missing.push_back("symptoms.csv");
    }
    if (const auto raman = first_existing({"raman.csv"})) {
        const auto e4 = sweep("exp4", *raman, {64});
        record("exp4@64", e4.accuracy >= 97.0, fmt("acc %.2f%%", e4.accuracy));
    } else {
        missing.push_back("raman.csv");
    }

    auto join = [](const std::vector<std::string>& parts) {
        std::string s;
        for (const auto& p : parts) s += (s.empty() ? "" : "; ") + p;
        return s;
    };
    std::string detail;
    if (!failed.empty()) detail += "failed: " + join(failed) + ". ";
    if (!passed.empty()) detail += "passed: " + join(passed) + ". ";
    if (!missing.empty()) detail += "not found: " + join(missing);
    if (!failed.empty()) return fail_with(detail);
    if (passed.empty()) return {Status::Skip, detail};
    return pass(detail);
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"metrics oracle", 1, metrics_oracle},
        {"imputer equivalence", 10, imputer_equivalence},
        {"SMOTE geometry", 10, smote_geometry},
        {"CNN gradient check", 30, gradient_check},
        {"CNN convergence", 60, cnn_convergence},
        {"audio dominant frequency", 10, audio_criterion},
        {"imaging crop and raster", 10, imaging_criterion},
        {"stacking gain", 120, stacking_gain},
        {"library/service equivalence", 30, service_equivalence},
        {"determinism", 120, determinism},
        {"dataset reproduction", 0, dataset_reproduction},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.body();
        } catch (const std::exception& e) {
            outcome = fail_with(std::string("threw: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt("%.2f s", seconds);
        if (c.budget_s > 0) {
            timing += fmt(" / %g s", c.budget_s);
            if (outcome.status == Status::Pass && seconds > c.budget_s) outcome = fail_with("over budget; " + outcome.detail);
        }
        const char* tag = outcome.status == Status::Pass ? "PASS" : outcome.status == Status::Fail ? "FAIL" : "SKIP";
        failures += outcome.status == Status::Fail;
        std::printf("%s  %-28s %-18s %s\n", tag, c.name.c_str(), timing.c_str(), outcome.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
