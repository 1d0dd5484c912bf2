#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "multidx/imaging.hpp"

namespace multidx::cnn {

/// Dense row-major array. Images are H x W x C; conv kernels 3 x 3 x Cin x Cout;
/// dense weights In x Out.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
    Tensor(std::vector<std::size_t> dims, std::vector<double> values);

    std::size_t size() const noexcept { return data.size(); }
    void validate() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(std::span<const std::size_t> shape) noexcept;

// Layer vocabulary. Kernel and pooling geometry are fixed: 3x3 stride-1 same
// convolution and 2x2 stride-2 max pooling.
struct Conv2D {
    std::size_t filters = 0;
    friend bool operator==(const Conv2D&, const Conv2D&) = default;
};
struct ReLU {
    friend bool operator==(const ReLU&, const ReLU&) = default;
};
struct MaxPool {
    friend bool operator==(const MaxPool&, const MaxPool&) = default;
};
struct Flatten {
    friend bool operator==(const Flatten&, const Flatten&) = default;
};
struct Dense {
    std::size_t units = 0;
    friend bool operator==(const Dense&, const Dense&) = default;
};
struct Softmax {
    friend bool operator==(const Softmax&, const Softmax&) = default;
};

using LayerSpec = std::variant<Conv2D, ReLU, MaxPool, Flatten, Dense, Softmax>;

std::string describe(const LayerSpec& layer);

/// Weights and biases of one layer; both empty for parameterless layers.
struct LayerParams {
    Tensor weights;
    std::vector<double> bias;

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 25;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct CnnModel {
    std::vector<std::size_t> input_shape;  // H, W, C
    std::vector<LayerSpec> layers;
    std::vector<LayerParams> params;  // one entry per layer
    std::size_t class_count = 0;
    TrainConfig config;

    friend bool operator==(const CnnModel&, const CnnModel&) = default;
};

/// Output shape after each layer. Throws when the stack is inconsistent.
std::vector<std::vector<std::size_t>> infer_shapes(const std::vector<std::size_t>& input_shape,
                                                   const std::vector<LayerSpec>& layers);

/// Conv16-ReLU-Pool, Conv32-ReLU-Pool, Conv64-ReLU-Pool, Flatten, Dense128-ReLU,
/// Dense(classes)-Softmax.
std::vector<LayerSpec> default_architecture(std::size_t classes);

/// VGG-16 topology (13 convolutions, 5 pools, 4096-4096-classes head).
std::vector<LayerSpec> vgg16_architecture(std::size_t classes);

/// He-initialized model (seeded by config.seed). The last layer must be
/// Softmax over `classes` outputs.
CnnModel build_model(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers, std::size_t classes,
                     const TrainConfig& config = {});

std::size_t parameter_count(const CnnModel& model) noexcept;

// --- primitive operations --------------------------------------------------

/// Same-padded cross-correlation: out[y][x][o] = b[o] + sum K[m][n][c][o] * in[y+m-1][x+n-1][c].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, std::span<const double> bias);

Tensor relu(const Tensor& t);

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index of each output element
};

/// 2x2 stride-2 windows (odd edges padded with -inf); ties keep the first
/// element in row-major order.
PoolResult maxpool(const Tensor& t);

std::vector<double> softmax(std::span<const double> z);

/// -ln(max(p[true_class], 1e-12))
double cross_entropy(std::span<const double> probs, std::size_t true_class);

// --- inference and training ------------------------------------------------

std::vector<double> predict_proba(const CnnModel& model, const Tensor& input);
int predict_label(const CnnModel& model, const Tensor& input);

/// Gradients of the mean cross-entropy over a batch, laid out like params.
struct Gradients {
    std::vector<LayerParams> layers;
    double loss = 0.0;
};

Gradients compute_gradients(const CnnModel& model, std::span<const Tensor> batch, std::span<const int> labels);

struct AdamState {
    std::vector<LayerParams> first_moment;
    std::vector<LayerParams> second_moment;
    std::size_t step = 0;

    static AdamState for_model(const CnnModel& model);
};

/// One Adam step on the batch; returns the batch loss before the update.
double backward_and_step(CnnModel& model, AdamState& state, std::span<const Tensor> batch, std::span<const int> labels);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> validation_loss;
    std::optional<double> validation_accuracy;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct LabeledTensors {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
};

struct TrainResult {
    CnnModel model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;  // 0: initial parameters kept
};

/// Seeded shuffling per epoch. With a validation set the parameters of the
/// epoch with the best validation accuracy (earliest on ties) are returned,
/// otherwise those after the last epoch.
TrainResult train(const CnnModel& initial, const LabeledTensors& training,
                  const std::optional<LabeledTensors>& validation = std::nullopt);

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(const CnnModel& model, const LabeledTensors& data);

/// Columns epoch, train_loss, train_acc, val_loss, val_acc.
std::string history_csv(const std::vector<EpochRecord>& history);

/// Ink intensity 1 - pixel as an H x W x 1 tensor.
Tensor image_to_tensor(const imaging::GrayImage& image);

}  // namespace multidx::cnn
