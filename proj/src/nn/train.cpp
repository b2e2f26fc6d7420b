#include "rfcloak/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"

namespace rfcloak::nn {

void Dataset::add(const PilotTensor& t, std::uint64_t sample_id) {
    if (t.n_pilot_symbols != n_pilot_symbols || t.pilots_per_symbol != pilots_per_symbol ||
        t.values.size() != sample_size()) {
        throw ShapeError("dataset: sample shape differs from dataset shape");
    }
    values.insert(values.end(), t.values.begin(), t.values.end());
    labels.push_back(t.device_label);
    condition_ids.push_back(t.condition_id);
    sample_ids.push_back(sample_id);
    split.push_back(Split::train);
}

PilotTensor Dataset::sample(std::size_t i) const {
    PilotTensor t;
    t.n_pilot_symbols = n_pilot_symbols;
    t.pilots_per_symbol = pilots_per_symbol;
    const auto per = sample_size();
    t.values.assign(values.begin() + static_cast<std::ptrdiff_t>(i * per),
                    values.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    t.device_label = labels[i];
    t.condition_id = condition_ids[i];
    return t;
}

std::vector<std::size_t> Dataset::indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) {
        if (split[i] == which) out.push_back(i);
    }
    return out;
}

Tensor Dataset::gather(std::span<const std::size_t> idx) const {
    Tensor t({static_cast<int>(idx.size()), 2, n_pilot_symbols, pilots_per_symbol});
    const auto per = sample_size();
    for (std::size_t b = 0; b < idx.size(); ++b) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(idx[b] * per), per,
                    t.data.begin() + static_cast<std::ptrdiff_t>(b * per));
    }
    return t;
}

void Dataset::assign_split(double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("dataset: split fraction must lie in (0,1)");
    test_fraction = fraction;
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < size(); ++i) by_class[labels[i]].push_back(i);
    std::fill(split.begin(), split.end(), Split::train);
    for (auto& [label, members] : by_class) {
        auto rng = make_rng(seed, "split", {static_cast<std::uint64_t>(label)});
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::lround(fraction * double(members.size())));
        for (std::size_t j = 0; j < n_test; ++j) split[members[j]] = Split::test;
    }
}

void Dataset::validate() const {
    const auto n = labels.size();
    if (condition_ids.size() != n || sample_ids.size() != n || split.size() != n ||
        values.size() != n * sample_size()) {
        throw ShapeError("dataset: inconsistent array lengths");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes) throw ShapeError("dataset: label out of range");
    }
}

Evaluation evaluate(const ClassifierModel& model, const Dataset& data, Split which) {
    Evaluation ev;
    const int n = model.n_classes();
    ev.confusion.assign(static_cast<std::size_t>(n), std::vector<std::uint64_t>(static_cast<std::size_t>(n), 0));
    const auto idx = data.indices(which);
    if (idx.empty()) return ev;
    std::size_t correct = 0;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < idx.size(); start += kChunk) {
        const std::span<const std::size_t> part(idx.data() + start, std::min(kChunk, idx.size() - start));
        const auto pred = predict_batch(model, data.gather(part));
        for (std::size_t j = 0; j < part.size(); ++j) {
            const int y = data.labels[part[j]];
            ++ev.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(pred[j])];
            correct += pred[j] == y;
        }
    }
    ev.accuracy = double(correct) / double(idx.size());
    return ev;
}

ClassifierModel train(const Dataset& data, const Architecture& arch, const TrainHyper& hyper,
                      const EpochCallback& on_epoch) {
    data.validate();
    if (data.size() == 0) throw ConfigError("train: dataset is empty");
    if (data.n_classes < 2) throw ConfigError("train: at least two classes required");
    if (arch.n_classes != data.n_classes) throw ShapeError("train: architecture class count differs from dataset");
    if (arch.in_h != data.n_pilot_symbols || arch.in_w != data.pilots_per_symbol || arch.in_channels != 2) {
        throw ShapeError("train: architecture input shape differs from dataset samples");
    }
    if (hyper.epochs < 0 || hyper.batch_size < 1 || !(hyper.lr > 0.0)) {
        throw ConfigError("train: invalid hyperparameters");
    }

    ClassifierModel model = ClassifierModel::create(arch, hyper.seed);
    model.meta.lr = hyper.lr;
    model.meta.batch_size = hyper.batch_size;
    model.meta.epochs = hyper.epochs;

    auto order = data.indices(Split::train);
    if (order.empty()) throw ConfigError("train: no training samples");
    std::vector<int> labels;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        auto rng = make_rng(hyper.seed, "shuffle", {static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
            const std::span<const std::size_t> part(
                order.data() + start, std::min<std::size_t>(static_cast<std::size_t>(hyper.batch_size), order.size() - start));
            labels.resize(part.size());
            for (std::size_t j = 0; j < part.size(); ++j) labels[j] = data.labels[part[j]];
            const Gradients g = backward(model, data.gather(part), labels);
            if (!std::isfinite(g.loss)) {
                throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                      ", batch starting at " + std::to_string(start));
            }
            loss_sum += g.loss * double(part.size());
            seen += part.size();
            auto params = model.parameters();
            for (std::size_t p = 0; p < params.size(); ++p) {
                auto& w = params[p]->data;
                const auto& dw = g.params[p].data;
                for (std::size_t j = 0; j < w.size(); ++j) w[j] -= hyper.lr * dw[j];
            }
        }
        const double mean_loss = loss_sum / double(seen);
        model.meta.loss_history.push_back(mean_loss);
        if (on_epoch) on_epoch(epoch, mean_loss);
    }
    model.meta.final_train_accuracy = evaluate(model, data, Split::train).accuracy;
    model.meta.final_test_accuracy = evaluate(model, data, Split::test).accuracy;
    return model;
}

}  // namespace rfcloak::nn
