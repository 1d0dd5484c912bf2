#include <algorithm>
#include <cmath>
#include <limits>

#include "detail.hpp"
#include "multidx/simd/kernels.hpp"

namespace multidx::learners::detail {

namespace {

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Largest eigenvalue of [X 1]^T [X 1] / n by power iteration.
double design_spectral_norm(const Matrix& x) {
    const std::size_t d = x.cols() + 1;
    const auto n = static_cast<double>(x.rows());
    std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    std::vector<double> next(d);
    double lambda = 0.0;
    for (int iteration = 0; iteration < 100; ++iteration) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const auto row = x.row(r);
            const double projection = simd::dot(row, std::span<const double>(v.data(), d - 1)) + v[d - 1];
            simd::axpy(projection, row, std::span<double>(next.data(), d - 1));
            next[d - 1] += projection;
        }
        double norm = 0.0;
        for (double& value : next) {
            value /= n;
            norm += value * value;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        const double previous = lambda;
        lambda = norm;
        for (std::size_t i = 0; i < d; ++i) v[i] = next[i] / norm;
        if (std::abs(lambda - previous) <= 1e-10 * lambda) break;
    }
    return lambda;
}

}  // namespace

LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, std::size_t classes,
                           const LogisticRegressionParams& params) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const std::size_t outputs = classes == 2 ? 1 : classes;
    const auto inv_n = 1.0 / static_cast<double>(n);
    // Gradient of the mean log-loss is 0.25*||X||^2/n-Lipschitz; the L2 term adds l2/n.
    const double lipschitz = 0.25 * design_spectral_norm(x) * (1.0 + 1e-6) + params.l2 * inv_n;
    const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

    LogisticModel model;
    model.weights = Matrix(outputs, d, 0.0);
    model.bias.assign(outputs, 0.0);
    model.iterations.assign(outputs, 0);

    std::vector<double> residual(n), grad_w(d);
    for (std::size_t k = 0; k < outputs; ++k) {
        const std::size_t positive = outputs == 1 ? 1 : k;
        auto w = model.weights.row(k);
        double& b = model.bias[k];
        std::size_t iteration = 0;
        for (; iteration < params.max_iterations; ++iteration) {
            double grad_b = 0.0;
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                const double target = static_cast<std::size_t>(y[r]) == positive ? 1.0 : 0.0;
                residual[r] = sigmoid(simd::dot(w, x.row(r)) + b) - target;
                simd::axpy(residual[r] * inv_n, x.row(r), grad_w);
                grad_b += residual[r] * inv_n;
            }
            double largest = std::abs(grad_b);
            for (std::size_t c = 0; c < d; ++c) {
                grad_w[c] += params.l2 * inv_n * w[c];
                largest = std::max(largest, std::abs(grad_w[c]));
            }
            if (largest < params.gradient_tolerance) break;
            simd::axpy(-step, grad_w, w);
            b -= step * grad_b;
        }
        model.iterations[k] = iteration;
    }
    return model;
}

Matrix logistic_proba(const LogisticModel& model, const Matrix& rows) {
    const std::size_t outputs = model.weights.rows();
    const std::size_t classes = outputs == 1 ? 2 : outputs;
    Matrix out(rows.rows(), classes);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        if (outputs == 1) {
            const double p = sigmoid(simd::dot(model.weights.row(0), rows.row(r)) + model.bias[0]);
            out(r, 0) = 1.0 - p;
            out(r, 1) = p;
            continue;
        }
        double total = 0.0;
        for (std::size_t k = 0; k < outputs; ++k) {
            out(r, k) = sigmoid(simd::dot(model.weights.row(k), rows.row(r)) + model.bias[k]);
            total += out(r, k);
        }
        for (std::size_t k = 0; k < outputs; ++k) out(r, k) = total > 0.0 ? out(r, k) / total : 1.0 / static_cast<double>(outputs);
    }
    return out;
}

KnnModel fit_knn(const Matrix& x, std::span<const int> y) { return KnnModel{x, std::vector<int>(y.begin(), y.end())}; }

Matrix knn_proba(const KnnModel& model, const KnnParams& params, std::size_t classes, const Matrix& rows) {
    require(params.neighbors >= 1, ErrorCode::InvalidArgument, "knn: neighbors must be at least 1");
    require(params.minkowski_p >= 1.0, ErrorCode::InvalidArgument, "knn: minkowski p must be >= 1");
    const std::size_t k = std::min(params.neighbors, model.points.rows());
    const bool euclidean = params.minkowski_p == 2.0;
    Matrix out(rows.rows(), classes, 0.0);
    std::vector<std::pair<double, std::size_t>> scored(model.points.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto query = rows.row(r);
        for (std::size_t j = 0; j < model.points.rows(); ++j) {
            double distance = 0.0;
            if (euclidean) {
                distance = simd::squared_distance(query, model.points.row(j));
            } else {
                const auto point = model.points.row(j);
                for (std::size_t c = 0; c < query.size(); ++c) distance += std::pow(std::abs(query[c] - point[c]), params.minkowski_p);
            }
            scored[j] = {distance, j};
        }
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
        for (std::size_t i = 0; i < k; ++i) out(r, static_cast<std::size_t>(model.labels[scored[i].second])) += 1.0;
        for (std::size_t c = 0; c < classes; ++c) out(r, c) /= static_cast<double>(k);
    }
    return out;
}

NaiveBayesModel fit_naive_bayes(const Matrix& x, std::span<const int> y, std::size_t classes,
                                const NaiveBayesParams& params) {
    const std::size_t d = x.cols();
    NaiveBayesModel model{Matrix(classes, d, 0.0), Matrix(classes, d, 1.0), std::vector<double>(classes)};
    std::vector<std::size_t> count(classes, 0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto cls = static_cast<std::size_t>(y[r]);
        ++count[cls];
        simd::axpy(1.0, x.row(r), model.means.row(cls));
    }
    for (std::size_t c = 0; c < classes; ++c) {
        if (count[c] == 0) continue;
        for (double& m : model.means.row(c)) m /= static_cast<double>(count[c]);
        for (double& v : model.variances.row(c)) v = 0.0;
    }
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto cls = static_cast<std::size_t>(y[r]);
        for (std::size_t f = 0; f < d; ++f) {
            const double diff = x(r, f) - model.means(cls, f);
            model.variances(cls, f) += diff * diff;
        }
    }
    for (std::size_t c = 0; c < classes; ++c) {
        model.log_priors[c] = count[c] == 0 ? -std::numeric_limits<double>::infinity()
                                            : std::log(static_cast<double>(count[c]) / static_cast<double>(x.rows()));
        if (count[c] == 0) continue;
        for (double& v : model.variances.row(c)) v = std::max(v / static_cast<double>(count[c]), params.variance_floor);
    }
    return model;
}

Matrix naive_bayes_proba(const NaiveBayesModel& model, const Matrix& rows) {
    constexpr double log_two_pi = 1.8378770664093454835606594728112;
    const std::size_t classes = model.log_priors.size();
    Matrix out(rows.rows(), classes);
    std::vector<double> joint(classes);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        for (std::size_t c = 0; c < classes; ++c) {
            if (std::isinf(model.log_priors[c])) {
                joint[c] = -std::numeric_limits<double>::infinity();
                continue;
            }
            double log_likelihood = 0.0;
            for (std::size_t f = 0; f < rows.cols(); ++f) {
                const double var = model.variances(c, f);
                const double diff = rows(r, f) - model.means(c, f);
                log_likelihood -= 0.5 * (log_two_pi + std::log(var) + diff * diff / var);
            }
            joint[c] = model.log_priors[c] + log_likelihood;
        }
        const double peak = *std::max_element(joint.begin(), joint.end());
        double total = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            out(r, c) = std::exp(joint[c] - peak);
            total += out(r, c);
        }
        for (std::size_t c = 0; c < classes; ++c) out(r, c) /= total;
    }
    return out;
}

}  // namespace multidx::learners::detail
