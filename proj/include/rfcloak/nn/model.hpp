#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rfcloak/grid.hpp"
#include "rfcloak/nn/tensor.hpp"

namespace rfcloak::nn {

enum class Padding { same, valid };

// Convolution (stride 1) + ReLU + max pooling. A 1x1 pool disables pooling.
struct ConvSpec {
    int out_channels = 8;
    int kernel_h = 3;
    int kernel_w = 2;
    int pool_h = 2;
    int pool_w = 1;
    Padding padding = Padding::same;
    bool operator==(const ConvSpec&) const = default;
};

struct Architecture {
    int in_channels = 2;
    int in_h = 40;
    int in_w = 12;
    std::vector<ConvSpec> convs;
    std::vector<int> hidden;  // dense widths before the output layer, each + ReLU
    int n_classes = 5;

    // Five conv stages for the 2 x 40 x 12 pilot tensor: three (3,2) kernels,
    // two (3,1) kernels, then Dense(128) -> Dense(64) -> Dense(n_classes).
    static Architecture fingerprint_cnn(int n_classes, int in_h = 40, int in_w = 12);

    // Throws ShapeError when some stage collapses to an empty feature map.
    void validate() const;
    std::vector<int> input_shape() const { return {in_channels, in_h, in_w}; }
    bool operator==(const Architecture&) const = default;
};

struct Conv2d {
    int in_c = 0, out_c = 0, kh = 0, kw = 0;
    int pad_top = 0, pad_left = 0;
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    Tensor weight;  // (out_c, in_c, kh, kw)
    Tensor bias;    // (out_c)
};

struct Relu {};

struct MaxPool {
    int ph = 1, pw = 1;
    int channels = 0, in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

struct Dense {
    int in = 0, out = 0;
    Tensor weight;  // (out, in)
    Tensor bias;    // (out)
};

using Layer = std::variant<Conv2d, Relu, MaxPool, Dense>;

struct TrainMeta {
    int epochs = 0;
    double lr = 1e-3;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double final_train_accuracy = 0.0;
    double final_test_accuracy = 0.0;
    std::vector<double> loss_history;  // mean training loss per epoch
};

struct ClassifierModel {
    Architecture arch;
    std::vector<Layer> layers;
    TrainMeta meta;

    // Layers built from `arch` with uniform fan-in initialization
    // U(-sqrt(6/fan_in), sqrt(6/fan_in)) and zero biases.
    static ClassifierModel create(const Architecture& arch, std::uint64_t seed);

    // Pointers to every weight and bias, in layer order (weight before bias).
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::size_t parameter_count() const;
    int n_classes() const { return arch.n_classes; }
};

// Activations recorded by a forward pass for the reverse sweep.
struct Tape {
    std::vector<Tensor> inputs;               // input to each layer
    std::vector<std::vector<double>> cols;    // im2col buffers (conv layers)
    std::vector<std::vector<int>> argmax;     // winning input index (pool layers)
};

// (batch, C, H, W) -> (batch, n_classes).
Tensor forward(const ClassifierModel& model, const Tensor& batch, Tape* tape = nullptr);

// Row-wise softmax of (batch, n) logits.
Tensor softmax(const Tensor& logits);

// Mean softmax cross-entropy.
double loss_ce(const Tensor& logits, std::span<const int> labels);

struct Gradients {
    std::vector<Tensor> params;  // aligned with ClassifierModel::parameters()
    Tensor input;                // d loss / d batch
    double loss = 0.0;
    Tensor logits;
};

// Exact reverse-mode gradients of loss_ce(forward(batch), labels).
Gradients backward(const ClassifierModel& model, const Tensor& batch, std::span<const int> labels);

// Lowest index of the maximum.
int argmax(std::span<const double> values);

Tensor as_batch(const PilotTensor& sample);
Tensor stack(std::span<const PilotTensor> samples);

int predict(const ClassifierModel& model, const PilotTensor& sample);
std::vector<int> predict_batch(const ClassifierModel& model, const Tensor& batch);

// Activations after the second-to-last dense layer (post-ReLU).
std::vector<double> penultimate_features(const ClassifierModel& model, const PilotTensor& sample);

std::string describe(const Architecture& arch);

}  // namespace rfcloak::nn
