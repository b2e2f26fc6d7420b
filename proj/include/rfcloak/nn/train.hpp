#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rfcloak/grid.hpp"
#include "rfcloak/nn/model.hpp"

namespace rfcloak::nn {

enum class Split : std::uint8_t { train = 0, test = 1 };

// Pilot tensors with provenance. sample_id identifies the frame realization
// so a sample can be re-synthesized exactly.
struct Dataset {
    int n_pilot_symbols = 40;
    int pilots_per_symbol = 12;
    int n_classes = 0;
    int n_conditions = 0;
    double test_fraction = 0.2;
    std::vector<double> values;  // n x (2 * n_pilot_symbols * pilots_per_symbol)
    std::vector<int> labels;
    std::vector<int> condition_ids;
    std::vector<std::uint64_t> sample_ids;
    std::vector<Split> split;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const {
        return 2 * static_cast<std::size_t>(n_pilot_symbols) * pilots_per_symbol;
    }
    void add(const PilotTensor& t, std::uint64_t sample_id);
    PilotTensor sample(std::size_t i) const;
    std::vector<std::size_t> indices(Split which) const;
    // Batch of the listed samples.
    Tensor gather(std::span<const std::size_t> idx) const;

    // Stratified split: round(test_fraction * n_c) samples of every class c
    // go to the test set, chosen by a seeded shuffle.
    void assign_split(double fraction, std::uint64_t seed);

    void validate() const;
    bool operator==(const Dataset&) const = default;
};

struct TrainHyper {
    double lr = 1e-3;
    int epochs = 60;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

struct Evaluation {
    double accuracy = 0.0;
    std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]
};

Evaluation evaluate(const ClassifierModel& model, const Dataset& data, Split which);

// Called after every epoch with (epoch index, mean training loss).
using EpochCallback = std::function<void(int, double)>;

// Plain minibatch SGD on mean cross-entropy, deterministic given hyper.seed.
ClassifierModel train(const Dataset& data, const Architecture& arch, const TrainHyper& hyper,
                      const EpochCallback& on_epoch = {});

}  // namespace rfcloak::nn
