#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "multidx/cnn.hpp"

namespace oracle {

/// Quadruple loop over the convolution sum with explicit zero padding.
inline multidx::cnn::Tensor naive_conv(const multidx::cnn::Tensor& in, const multidx::cnn::Tensor& k,
                                       const std::vector<double>& bias) {
    const long h = long(in.shape[0]), w = long(in.shape[1]), cin = long(in.shape[2]), cout = long(k.shape[3]);
    multidx::cnn::Tensor out({in.shape[0], in.shape[1], k.shape[3]});
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j)
            for (long o = 0; o < cout; ++o) {
                double sum = bias[std::size_t(o)];
                for (long m = -1; m <= 1; ++m)
                    for (long n = -1; n <= 1; ++n)
                        for (long c = 0; c < cin; ++c) {
                            const long y = i + m, x = j + n;
                            const double v = (y < 0 || y >= h || x < 0 || x >= w) ? 0.0
                                                                                  : in.data[std::size_t((y * w + x) * cin + c)];
                            sum += v * k.data[std::size_t((((m + 1) * 3 + (n + 1)) * cin + c) * cout + o)];
                        }
                out.data[std::size_t((i * w + j) * cout + o)] = sum;
            }
    return out;
}

/// Sliding 2x2 window maxima, padding odd edges with -inf.
inline std::vector<double> naive_pool(const multidx::cnn::Tensor& in) {
    const std::size_t h = in.shape[0], w = in.shape[1], c = in.shape[2];
    std::vector<double> out;
    for (std::size_t y = 0; y < h; y += 2)
        for (std::size_t x = 0; x < w; x += 2)
            for (std::size_t ch = 0; ch < c; ++ch) {
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx)
                        if (y + dy < h && x + dx < w) best = std::max(best, in.data[((y + dy) * w + x + dx) * c + ch]);
                out.push_back(best);
            }
    return out;
}

/// Mean batch loss evaluated by forward passes only.
inline double batch_loss(const multidx::cnn::CnnModel& model, const std::vector<multidx::cnn::Tensor>& inputs,
                         const std::vector<int>& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        total += multidx::cnn::cross_entropy(multidx::cnn::predict_proba(model, inputs[i]), std::size_t(labels[i]));
    return total / double(inputs.size());
}

/// Largest relative error between analytic gradients and central differences
/// over every parameter; relative to max(|a|, |n|, floor).
inline double max_gradient_error(multidx::cnn::CnnModel model, const std::vector<multidx::cnn::Tensor>& inputs,
                                 const std::vector<int>& labels, double h = 1e-4, double floor = 1e-7) {
    const auto analytic = multidx::cnn::compute_gradients(model, inputs, labels);
    double worst = 0.0;
    auto probe = [&](double& param, double grad) {
        const double saved = param;
        param = saved + h;
        const double up = batch_loss(model, inputs, labels);
        param = saved - h;
        const double down = batch_loss(model, inputs, labels);
        param = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(grad), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(grad - numeric) / scale);
    };
    for (std::size_t l = 0; l < model.params.size(); ++l) {
        for (std::size_t i = 0; i < model.params[l].weights.data.size(); ++i)
            probe(model.params[l].weights.data[i], analytic.layers[l].weights.data[i]);
        for (std::size_t i = 0; i < model.params[l].bias.size(); ++i)
            probe(model.params[l].bias[i], analytic.layers[l].bias[i]);
    }
    return worst;
}

}  // namespace oracle
