#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rfcloak/error.hpp"
#include "rfcloak/nn/model.hpp"
#include "rfcloak/nn/train.hpp"
#include "support/oracles.hpp"

using namespace rfcloak;
using namespace rfcloak::nn;

namespace {

Tensor logits_of(std::vector<std::vector<double>> rows) {
    Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
    std::size_t i = 0;
    for (const auto& r : rows) {
        for (double v : r) t.data[i++] = v;
    }
    return t;
}

// 1 x 2 x 2 input, one 1x1 conv, no pooling, straight into the output layer.
ClassifierModel one_by_one_model() {
    Architecture arch;
    arch.in_channels = 1;
    arch.in_h = 2;
    arch.in_w = 2;
    arch.convs = {ConvSpec{1, 1, 1, 1, 1, Padding::same}};
    arch.n_classes = 2;
    auto m = ClassifierModel::create(arch, 3);
    auto params = m.parameters();
    params[0]->data = {2.0};
    params[1]->data = {0.0};
    params[2]->data = {1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    params[3]->data = {0.0, 0.0};
    return m;
}

Architecture toy_arch() {
    Architecture arch;
    arch.in_channels = 2;
    arch.in_h = 4;
    arch.in_w = 4;
    arch.convs = {ConvSpec{4, 3, 3, 2, 2, Padding::same}};
    arch.hidden = {8};
    arch.n_classes = 2;
    return arch;
}

// Two Gaussian blobs centered at -1 and +1 in every coordinate.
Dataset toy_blobs(std::uint64_t seed) {
    Dataset d;
    d.n_pilot_symbols = 4;
    d.pilots_per_symbol = 4;
    d.n_classes = 2;
    d.n_conditions = 1;
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 0.4);
    for (int i = 0; i < 200; ++i) {
        PilotTensor t;
        t.n_pilot_symbols = 4;
        t.pilots_per_symbol = 4;
        t.device_label = i % 2;
        t.condition_id = 0;
        t.values.resize(32);
        for (auto& v : t.values) v = (t.device_label ? 1.0 : -1.0) + noise(rng);
        d.add(t, static_cast<std::uint64_t>(i));
    }
    d.assign_split(0.2, seed);
    return d;
}

}  // namespace

TEST(Loss, UniformLogitsGiveLogClasses) {
    const auto logits = logits_of({{0.3, 0.3, 0.3, 0.3, 0.3}});
    const std::vector<int> labels{2};
    EXPECT_NEAR(loss_ce(logits, labels), std::log(5.0), 1e-15);
}

TEST(Loss, SaturatesForHugeCorrectMargin) {
    const auto logits = logits_of({{800.0, 0.0, -5.0}});
    const std::vector<int> labels{0};
    EXPECT_LT(loss_ce(logits, labels), 1e-300 + 1e-12);
    EXPECT_TRUE(std::isfinite(loss_ce(logits_of({{-800.0, 800.0}}), labels)));
}

TEST(Loss, HandBatchOfTwo) {
    const auto logits = logits_of({{1.0, 2.0, 0.5}, {0.0, -1.0, 3.0}});
    const std::vector<int> labels{1, 0};
    const double l0 = -(2.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5)));
    const double l1 = -(0.0 - std::log(std::exp(0.0) + std::exp(-1.0) + std::exp(3.0)));
    EXPECT_NEAR(loss_ce(logits, labels), 0.5 * (l0 + l1), 1e-12);
}

TEST(Loss, RejectsBadLabels) {
    const auto logits = logits_of({{1.0, 2.0}});
    EXPECT_THROW(loss_ce(logits, std::vector<int>{2}), ShapeError);
    EXPECT_THROW(loss_ce(logits, std::vector<int>{0, 1}), ShapeError);
}

TEST(Softmax, RowsSumToOne) {
    const auto p = softmax(logits_of({{1.0, 2.0, 3.0}, {-700.0, 700.0, 0.0}, {0.0, 0.0, 0.0}}));
    for (int r = 0; r < 3; ++r) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += p.data[std::size_t(r * 3 + c)];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Predict, ArgmaxAndTieRule) {
    EXPECT_EQ(argmax(std::vector<double>{0.1, 0.9, 0.3}), 1);
    EXPECT_EQ(argmax(std::vector<double>{1.0, 1.0}), 0);
    EXPECT_EQ(argmax(std::vector<double>{-2.0, 4.0, 4.0}), 1);
}

TEST(Forward, ZeroWeightsGiveBiasOnlyLogits) {
    auto m = ClassifierModel::create(Architecture::fingerprint_cnn(5), 1);
    for (Tensor* p : m.parameters()) std::fill(p->data.begin(), p->data.end(), 0.0);
    Tensor x({2, 2, 40, 12});
    Rng rng(4);
    std::normal_distribution<double> g;
    for (auto& v : x.data) v = g(rng);
    const auto logits = forward(m, x);
    for (double v : logits.data) EXPECT_EQ(v, 0.0);
}

TEST(Forward, OneByOneConvByHand) {
    const auto m = one_by_one_model();
    Tensor x({1, 1, 2, 2});
    x.data = {0.5, -1.0, 2.0, 0.25};
    const auto logits = forward(m, x);
    // relu(2x) summed: 1 + 0 + 4 + 0.5.
    EXPECT_DOUBLE_EQ(logits.data[0], 5.5);
    EXPECT_DOUBLE_EQ(logits.data[1], 0.0);
}

TEST(Forward, DuplicatedSamplesGiveDuplicatedRows) {
    const auto m = ClassifierModel::create(Architecture::fingerprint_cnn(5), 2);
    Tensor x({3, 2, 40, 12});
    Rng rng(5);
    std::normal_distribution<double> g;
    const std::size_t per = 2 * 40 * 12;
    for (std::size_t i = 0; i < per; ++i) x.data[i] = x.data[per + i] = x.data[2 * per + i] = g(rng);
    const auto logits = forward(m, x);
    for (int c = 0; c < 5; ++c) {
        EXPECT_EQ(logits.data[std::size_t(c)], logits.data[std::size_t(5 + c)]);
        EXPECT_EQ(logits.data[std::size_t(c)], logits.data[std::size_t(10 + c)]);
    }
}

TEST(Forward, ShapeMismatchRejected) {
    const auto m = ClassifierModel::create(Architecture::fingerprint_cnn(5), 2);
    EXPECT_THROW(forward(m, Tensor({1, 2, 40, 11})), ShapeError);
    EXPECT_THROW(forward(m, Tensor({1, 1, 40, 12})), ShapeError);
}

TEST(Architecture, DefaultHasFiveConvStages) {
    const auto arch = Architecture::fingerprint_cnn(5);
    EXPECT_EQ(arch.convs.size(), 5u);
    EXPECT_EQ(arch.hidden, (std::vector<int>{128, 64}));
    EXPECT_NO_THROW(arch.validate());
    auto bad = arch;
    bad.in_h = 4;
    bad.convs[0].padding = Padding::valid;
    bad.convs[1].padding = Padding::valid;
    EXPECT_THROW(bad.validate(), ShapeError);
}

TEST(Architecture, PenultimateFeaturesWidth) {
    const auto m = ClassifierModel::create(Architecture::fingerprint_cnn(5), 2);
    PilotTensor s;
    s.n_pilot_symbols = 40;
    s.pilots_per_symbol = 12;
    s.values.assign(960, 0.1);
    const auto f = penultimate_features(m, s);
    EXPECT_EQ(f.size(), 64u);
    for (double v : f) EXPECT_GE(v, 0.0);
}

TEST(Backward, MatchesFiniteDifferencesOnRandomTinyModels) {
    Rng rng(2024);
    int checked_cases = 0;
    for (int trial = 0; trial < 200 && checked_cases < 40; ++trial) {
        auto t = oracle::random_tiny_case(rng);
        if (oracle::near_kink(t.model, t.batch, 1e-4)) continue;
        const auto g = backward(t.model, t.batch, t.labels);
        const auto r = oracle::finite_difference_check(t.model, t.batch, t.labels, g.params, g.input, 1e-5, 1e-4, 1e-8);
        EXPECT_EQ(r.failures, 0u) << "trial " << trial << " worst excess " << r.worst_excess;
        ++checked_cases;
    }
    EXPECT_EQ(checked_cases, 40);
}

TEST(Backward, LossAndLogitsMatchForward) {
    Rng rng(7);
    auto t = oracle::random_tiny_case(rng);
    const auto g = backward(t.model, t.batch, t.labels);
    const auto logits = forward(t.model, t.batch);
    EXPECT_EQ(g.logits, logits);
    EXPECT_DOUBLE_EQ(g.loss, loss_ce(logits, t.labels));
}

TEST(Backward, MirrorSymmetricModelHasMirrorSymmetricInputGradient) {
    // 1 x 1 x 3 input, symmetric 1x3 kernel with 'same' padding, uniform output
    // weights: the loss is invariant under reversing the input.
    Architecture arch;
    arch.in_channels = 1;
    arch.in_h = 1;
    arch.in_w = 3;
    arch.convs = {ConvSpec{1, 1, 3, 1, 1, Padding::same}};
    arch.n_classes = 2;
    auto m = ClassifierModel::create(arch, 1);
    auto params = m.parameters();
    params[0]->data = {0.5, 1.0, 0.5};
    params[1]->data = {0.1};
    params[2]->data = {1.0, 1.0, 1.0, -1.0, -1.0, -1.0};
    params[3]->data = {0.0, 0.0};
    Tensor x({1, 1, 1, 3});
    const auto g = backward(m, x, std::vector<int>{0});
    EXPECT_DOUBLE_EQ(g.input.data[0], g.input.data[2]);
    EXPECT_NE(g.input.data[0], 0.0);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
    const auto data = toy_blobs(1);
    TrainHyper h;
    h.epochs = 0;
    h.seed = 9;
    const auto m = train(data, toy_arch(), h);
    const auto init = ClassifierModel::create(toy_arch(), 9);
    const auto a = m.parameters();
    const auto b = init.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->data, b[i]->data);
}

TEST(Train, SeparableBlobsReachFullAccuracy) {
    const auto data = toy_blobs(2);
    TrainHyper h;
    h.epochs = 50;
    h.lr = 1e-2;
    h.seed = 3;
    const auto m = train(data, toy_arch(), h);
    EXPECT_EQ(evaluate(m, data, Split::test).accuracy, 1.0);
    EXPECT_EQ(m.meta.loss_history.size(), 50u);
    EXPECT_LT(m.meta.loss_history.back(), m.meta.loss_history.front());
}

TEST(Train, Deterministic) {
    const auto data = toy_blobs(3);
    TrainHyper h;
    h.epochs = 5;
    h.seed = 11;
    const auto a = train(data, toy_arch(), h);
    const auto b = train(data, toy_arch(), h);
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->data, pb[i]->data);
    h.seed = 12;
    const auto c = train(data, toy_arch(), h);
    EXPECT_NE(c.parameters()[0]->data, pa[0]->data);
}

TEST(Train, NonFiniteLossAborts) {
    auto data = toy_blobs(4);
    for (auto& v : data.values) v *= 1e300;
    TrainHyper h;
    h.epochs = 2;
    h.seed = 1;
    EXPECT_THROW(train(data, toy_arch(), h), DivergenceError);
}

TEST(Train, RejectsMismatchedArchitecture) {
    const auto data = toy_blobs(5);
    auto arch = toy_arch();
    arch.n_classes = 3;
    EXPECT_THROW(train(data, arch, TrainHyper{}), ShapeError);
    arch = toy_arch();
    arch.in_w = 5;
    EXPECT_THROW(train(data, arch, TrainHyper{}), ShapeError);
}

TEST(Dataset, StratifiedSplit) {
    const auto data = toy_blobs(6);
    const auto test = data.indices(Split::test);
    EXPECT_EQ(test.size(), 40u);
    int ones = 0;
    for (auto i : test) ones += data.labels[i];
    EXPECT_EQ(ones, 20);
    EXPECT_EQ(data.indices(Split::train).size(), 160u);
}
