#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "multidx/cnn.hpp"
#include "multidx/error.hpp"
#include "multidx/parallel.hpp"
#include "multidx/random.hpp"
#include "multidx/simd/kernels.hpp"

namespace multidx::cnn {

namespace {

/// Activations entering each layer plus pooling switches.
struct Trace {
    std::vector<Tensor> inputs;  // inputs[l] feeds layer l; back() is the softmax output
    std::vector<std::vector<std::size_t>> switches;
};

Tensor dense_forward(const Tensor& input, const LayerParams& p) {
    const std::size_t in = p.weights.shape[0], out = p.weights.shape[1];
    Tensor result({out});
    std::copy(p.bias.begin(), p.bias.end(), result.data.begin());
    for (std::size_t i = 0; i < in; ++i) {
        if (input.data[i] == 0.0) continue;
        simd::axpy(input.data[i], {p.weights.data.data() + i * out, out}, result.data);
    }
    return result;
}

void check_input(const CnnModel& model, const Tensor& input) {
    require(input.shape == model.input_shape, ErrorCode::InvalidArgument, "cnn: input shape does not match the model");
}

Trace forward(const CnnModel& model, const Tensor& input) {
    check_input(model, input);
    Trace trace;
    trace.inputs.reserve(model.layers.size() + 1);
    trace.switches.resize(model.layers.size());
    trace.inputs.push_back(input);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Tensor& x = trace.inputs.back();
        const auto& layer = model.layers[l];
        Tensor y;
        if (std::holds_alternative<Conv2D>(layer)) {
            y = conv2d_forward(x, model.params[l].weights, model.params[l].bias);
        } else if (std::holds_alternative<ReLU>(layer)) {
            y = relu(x);
        } else if (std::holds_alternative<MaxPool>(layer)) {
            auto pooled = maxpool(x);
            y = std::move(pooled.output);
            trace.switches[l] = std::move(pooled.argmax);
        } else if (std::holds_alternative<Flatten>(layer)) {
            y = Tensor({x.size()}, x.data);
        } else if (std::holds_alternative<Dense>(layer)) {
            y = dense_forward(x, model.params[l]);
        } else {
            y = Tensor({x.size()}, softmax(x.data));
        }
        trace.inputs.push_back(std::move(y));
    }
    return trace;
}

std::vector<LayerParams> zeros_like(const std::vector<LayerParams>& params) {
    std::vector<LayerParams> out(params.size());
    for (std::size_t l = 0; l < params.size(); ++l) {
        out[l].weights = Tensor(params[l].weights.shape);
        out[l].bias.assign(params[l].bias.size(), 0.0);
    }
    return out;
}

void clear(std::vector<LayerParams>& grads) {
    for (auto& g : grads) {
        std::fill(g.weights.data.begin(), g.weights.data.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
    }
}

/// Adds one sample's gradient into `grads`; returns its loss.
double backpropagate(const CnnModel& model, const Tensor& input, int label, std::vector<LayerParams>& grads) {
    const Trace trace = forward(model, input);
    const auto& probs = trace.inputs.back().data;
    const double loss = cross_entropy(probs, static_cast<std::size_t>(label));

    // Softmax and cross-entropy combine to p - onehot at the softmax input.
    std::vector<double> g = probs;
    g[static_cast<std::size_t>(label)] -= 1.0;

    for (std::size_t l = model.layers.size() - 1; l-- > 0;) {
        const Tensor& x = trace.inputs[l];
        const auto& layer = model.layers[l];
        std::vector<double> gin(x.size(), 0.0);
        if (std::holds_alternative<Conv2D>(layer)) {
            const auto& k = model.params[l].weights;
            auto& gk = grads[l].weights.data;
            auto& gb = grads[l].bias;
            const std::size_t h = x.shape[0], w = x.shape[1], cin = x.shape[2], cout = k.shape[3];
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t xx = 0; xx < w; ++xx) {
                    const double* go = g.data() + (y * w + xx) * cout;
                    const std::span<const double> go_span(go, cout);
                    for (std::size_t o = 0; o < cout; ++o) gb[o] += go[o];
                    for (std::size_t m = 0; m < 3; ++m) {
                        if (y + m < 1 || y + m - 1 >= h) continue;
                        for (std::size_t n = 0; n < 3; ++n) {
                            if (xx + n < 1 || xx + n - 1 >= w) continue;
                            const std::size_t base = ((y + m - 1) * w + (xx + n - 1)) * cin;
                            const std::size_t kbase = (m * 3 + n) * cin * cout;
                            for (std::size_t c = 0; c < cin; ++c) {
                                if (l > 0) gin[base + c] += simd::dot({k.data.data() + kbase + c * cout, cout}, go_span);
                                const double v = x.data[base + c];
                                if (v != 0.0) simd::axpy(v, go_span, {gk.data() + kbase + c * cout, cout});
                            }
                        }
                    }
                }
            }
        } else if (std::holds_alternative<ReLU>(layer)) {
            for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = x.data[i] > 0.0 ? g[i] : 0.0;
        } else if (std::holds_alternative<MaxPool>(layer)) {
            const auto& sw = trace.switches[l];
            for (std::size_t i = 0; i < sw.size(); ++i) gin[sw[i]] += g[i];
        } else if (std::holds_alternative<Flatten>(layer)) {
            gin = g;
        } else if (std::holds_alternative<Dense>(layer)) {
            const auto& wts = model.params[l].weights;
            auto& gw = grads[l].weights.data;
            const std::size_t in = wts.shape[0], out = wts.shape[1];
            for (std::size_t o = 0; o < out; ++o) grads[l].bias[o] += g[o];
            for (std::size_t i = 0; i < in; ++i) {
                gin[i] = simd::dot({wts.data.data() + i * out, out}, g);
                if (x.data[i] != 0.0) simd::axpy(x.data[i], g, {gw.data() + i * out, out});
            }
        } else {
            fail(ErrorCode::Internal, "cnn: softmax before the last layer");
        }
        g = std::move(gin);
    }
    return loss;
}

void accumulate(std::vector<LayerParams>& into, const std::vector<LayerParams>& from) {
    for (std::size_t l = 0; l < into.size(); ++l) {
        simd::axpy(1.0, from[l].weights.data, into[l].weights.data);
        simd::axpy(1.0, from[l].bias, into[l].bias);
    }
}

void check_labels(const CnnModel& model, std::span<const Tensor> inputs, std::span<const int> labels) {
    require(inputs.size() == labels.size(), ErrorCode::InvalidArgument, "cnn: one label per input required");
    for (int label : labels)
        require(label >= 0 && static_cast<std::size_t>(label) < model.class_count, ErrorCode::InvalidArgument,
                "cnn: label out of range");
}

template <class Fn>
void for_each_parameter(CnnModel& model, AdamState& state, const std::vector<LayerParams>& grads, Fn&& fn) {
    for (std::size_t l = 0; l < model.params.size(); ++l) {
        auto& p = model.params[l];
        for (std::size_t i = 0; i < p.weights.data.size(); ++i)
            fn(p.weights.data[i], state.first_moment[l].weights.data[i], state.second_moment[l].weights.data[i],
               grads[l].weights.data[i]);
        for (std::size_t i = 0; i < p.bias.size(); ++i)
            fn(p.bias[i], state.first_moment[l].bias[i], state.second_moment[l].bias[i], grads[l].bias[i]);
    }
}

}  // namespace

std::vector<double> predict_proba(const CnnModel& model, const Tensor& input) {
    return forward(model, input).inputs.back().data;
}

int predict_label(const CnnModel& model, const Tensor& input) {
    const auto p = predict_proba(model, input);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

Gradients compute_gradients(const CnnModel& model, std::span<const Tensor> batch, std::span<const int> labels) {
    check_labels(model, batch, labels);
    require(!batch.empty(), ErrorCode::InvalidArgument, "cnn: empty batch");

    Gradients result{zeros_like(model.params), 0.0};
    // Per-sample gradients are computed in parallel groups but always summed in
    // sample order, so the result does not depend on the worker count.
    const std::size_t group = std::min(worker_count(), batch.size());
    std::vector<std::vector<LayerParams>> scratch(group, zeros_like(model.params));
    std::vector<double> losses(group);
    for (std::size_t start = 0; start < batch.size(); start += group) {
        const std::size_t count = std::min(group, batch.size() - start);
        parallel_for(count, [&](std::size_t i) {
            clear(scratch[i]);
            losses[i] = backpropagate(model, batch[start + i], labels[start + i], scratch[i]);
        });
        for (std::size_t i = 0; i < count; ++i) {
            accumulate(result.layers, scratch[i]);
            result.loss += losses[i];
        }
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto& g : result.layers) {
        for (double& v : g.weights.data) v *= scale;
        for (double& v : g.bias) v *= scale;
    }
    result.loss *= scale;
    return result;
}

AdamState AdamState::for_model(const CnnModel& model) {
    return AdamState{zeros_like(model.params), zeros_like(model.params), 0};
}

double backward_and_step(CnnModel& model, AdamState& state, std::span<const Tensor> batch, std::span<const int> labels) {
    if (state.first_moment.size() != model.params.size()) state = AdamState::for_model(model);
    const Gradients grads = compute_gradients(model, batch, labels);
    const auto& c = model.config;
    ++state.step;
    const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for_each_parameter(model, state, grads.layers, [&](double& p, double& m, double& v, double g) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        p -= c.learning_rate * (m / correction1) / (std::sqrt(v / correction2) + c.epsilon);
    });
    return grads.loss;
}

Evaluation evaluate(const CnnModel& model, const LabeledTensors& data) {
    check_labels(model, data.inputs, data.labels);
    require(!data.inputs.empty(), ErrorCode::InvalidArgument, "cnn: empty evaluation set");
    std::vector<double> losses(data.inputs.size());
    std::vector<int> hits(data.inputs.size());
    parallel_for(data.inputs.size(), [&](std::size_t i) {
        const auto p = predict_proba(model, data.inputs[i]);
        losses[i] = cross_entropy(p, static_cast<std::size_t>(data.labels[i]));
        hits[i] = std::max_element(p.begin(), p.end()) - p.begin() == data.labels[i];
    });
    Evaluation e;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        e.loss += losses[i];
        e.accuracy += hits[i];
    }
    e.loss /= static_cast<double>(losses.size());
    e.accuracy /= static_cast<double>(losses.size());
    return e;
}

TrainResult train(const CnnModel& initial, const LabeledTensors& training, const std::optional<LabeledTensors>& validation) {
    check_labels(initial, training.inputs, training.labels);
    std::vector<std::size_t> counts(initial.class_count, 0);
    for (int label : training.labels) ++counts[static_cast<std::size_t>(label)];
    require(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) >= 2, ErrorCode::Data,
            "degenerate labels: fewer than two classes in the training images");
    require(initial.config.batch_size >= 1, ErrorCode::InvalidArgument, "cnn: batch size must be positive");
    if (validation) check_labels(initial, validation->inputs, validation->labels);

    TrainResult result{initial, {}, 0};
    CnnModel model = initial;
    AdamState state = AdamState::for_model(model);
    double best_accuracy = -1.0;
    const std::size_t n = training.inputs.size();
    std::vector<Tensor> batch;
    std::vector<int> batch_labels;

    for (std::size_t epoch = 1; epoch <= model.config.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(model.config.seed, 0xe90c, epoch));
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += model.config.batch_size) {
            const std::size_t end = std::min(n, start + model.config.batch_size);
            batch.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(training.inputs[order[i]]);
                batch_labels.push_back(training.labels[order[i]]);
            }
            backward_and_step(model, state, batch, batch_labels);
        }

        EpochRecord record;
        record.epoch = epoch;
        const auto train_eval = evaluate(model, training);
        record.train_loss = train_eval.loss;
        record.train_accuracy = train_eval.accuracy;
        if (validation) {
            const auto val_eval = evaluate(model, *validation);
            record.validation_loss = val_eval.loss;
            record.validation_accuracy = val_eval.accuracy;
            if (val_eval.accuracy > best_accuracy) {
                best_accuracy = val_eval.accuracy;
                result.model = model;
                result.best_epoch = epoch;
            }
        }
        result.history.push_back(record);
    }
    if (!validation && model.config.epochs > 0) {
        result.model = std::move(model);
        result.best_epoch = result.model.config.epochs;
    }
    return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << r.train_loss << ',' << r.train_accuracy << ',';
        if (r.validation_loss) out << *r.validation_loss;
        out << ',';
        if (r.validation_accuracy) out << *r.validation_accuracy;
        out << '\n';
    }
    return out.str();
}

}  // namespace multidx::cnn
