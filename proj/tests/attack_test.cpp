#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rfcloak/attack.hpp"
#include "rfcloak/channel.hpp"
#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"
#include "support/oracles.hpp"

using namespace rfcloak;
using namespace rfcloak::nn;

namespace {

PilotTensor tensor_like(int symbols, int per_symbol, std::vector<double> values = {}) {
    PilotTensor t;
    t.n_pilot_symbols = symbols;
    t.pilots_per_symbol = per_symbol;
    t.values = values.empty() ? std::vector<double>(2 * std::size_t(symbols) * per_symbol, 0.0) : std::move(values);
    return t;
}

PilotTensor random_pilots(std::uint64_t seed) {
    auto t = tensor_like(40, 12);
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 0.7);
    for (auto& v : t.values) v = g(rng);
    return t;
}

std::vector<std::size_t> selected_res(const Perturbation& p) {
    std::vector<std::size_t> out;
    const auto n = p.delta.n_res();
    for (std::size_t r = 0; r < n; ++r) {
        if (p.delta.values[r] != 0.0 || p.delta.values[n + r] != 0.0) out.push_back(r);
    }
    return out;
}

// Input 2 x 1 x 2, identity 1x1 conv, dense output with the given weights.
ClassifierModel linear_surrogate(const std::vector<double>& w_out) {
    Architecture arch;
    arch.in_channels = 2;
    arch.in_h = 1;
    arch.in_w = 2;
    arch.convs = {ConvSpec{2, 1, 1, 1, 1, Padding::same}};
    arch.n_classes = 2;
    auto m = ClassifierModel::create(arch, 1);
    auto params = m.parameters();
    params[0]->data = {1.0, 0.0, 0.0, 1.0};
    params[1]->data = {0.0, 0.0};
    params[2]->data = w_out;
    params[3]->data = {0.0, 0.0};
    return m;
}

const ClassifierModel& default_model() {
    static const ClassifierModel m = ClassifierModel::create(Architecture::fingerprint_cnn(5), 77);
    return m;
}

double loss_at(const ClassifierModel& m, const PilotTensor& x, int label) {
    const int labels[1] = {label};
    return loss_ce(forward(m, as_batch(x)), labels);
}

}  // namespace

TEST(Fgsm, SignDefinition) {
    const auto like = tensor_like(1, 3, {1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
    const std::vector<double> g{0.3, -0.2, 0.0, 1e-300, -5.0, 0.0};
    const auto p = fgsm_from_gradient(like, g, 0.04);
    const std::vector<double> expected{0.04, -0.04, 0.0, 0.04, -0.04, 0.0};
    EXPECT_EQ(p.delta.values, expected);
}

TEST(Fgsm, ZeroEpsilonIsZeroAndKeepsPrediction) {
    const auto x = random_pilots(1);
    const auto p = fgsm(default_model(), x, 2, 0.0);
    for (double v : p.delta.values) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(predict(default_model(), apply(x, p)), predict(default_model(), x));
}

TEST(Fgsm, LinearSurrogateByHand) {
    // Positive inputs keep the ReLU in its linear region, so for label 0 the
    // input gradient is p1 * (W1 - W0), which has the sign of W1 - W0.
    const std::vector<double> w{0.5, -0.2, 0.1, 0.7, -0.3, 0.4, 0.25, -0.6};
    const auto m = linear_surrogate(w);
    const auto x = tensor_like(1, 2, {0.3, 0.8, 0.5, 0.2});
    const auto p = fgsm(m, x, 0, 0.01);
    for (std::size_t i = 0; i < 4; ++i) {
        const double diff = w[4 + i] - w[i];
        EXPECT_EQ(p.delta.values[i], diff > 0 ? 0.01 : -0.01) << i;
    }
}

TEST(Fgsm, AscendsTheLoss) {
    const auto x = random_pilots(2);
    const auto g = input_gradient(default_model(), x, 1);
    const auto p = fgsm_from_gradient(x, g, 1e-4);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * p.delta.values[i];
    EXPECT_GE(dot, 0.0);
    EXPECT_GT(loss_at(default_model(), apply(x, p), 1), loss_at(default_model(), x, 1));
}

TEST(Fgsm, TargetedDescendsTowardTarget) {
    const auto x = random_pilots(3);
    const auto p = fgsm(default_model(), x, 4, 1e-4, AttackMode::targeted);
    EXPECT_LT(loss_at(default_model(), apply(x, p), 4), loss_at(default_model(), x, 4));
}

TEST(Fgsm, ShapeMismatchRejected) {
    const auto like = tensor_like(1, 3);
    EXPECT_THROW(fgsm_from_gradient(like, std::vector<double>(5, 1.0), 0.1), ShapeError);
}

TEST(PowerControlled, TieBrokenByIndex) {
    const auto like = tensor_like(1, 4);
    const std::vector<double> g{0.9, 0.1, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0};
    const auto p = power_controlled_from_gradient(like, g, 0.04, 0.5);
    EXPECT_EQ(selected_res(p), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(p.perturbed_re_count, 2u);
}

TEST(PowerControlled, SelectionMatchesExhaustiveSearch) {
    Rng rng(5);
    // Coarse quantization makes ties common.
    std::uniform_int_distribution<int> level(-3, 3);
    const auto like = tensor_like(1, 6);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> g(12);
        for (auto& v : g) v = 0.25 * level(rng);
        std::vector<double> influence(6);
        for (std::size_t r = 0; r < 6; ++r) influence[r] = std::hypot(g[r], g[6 + r]);
        for (double ratio : {1.0 / 6.0, 0.5, 4.0 / 6.0}) {
            const auto k = selected_count(ratio, 6);
            const auto p = power_controlled_from_gradient(like, g, 0.1, ratio);
            const auto expected = oracle::best_subset(influence, k);
            for (std::size_t r = 0; r < 6; ++r) {
                // Selected REs carry the sign of the gradient, so a selected RE with a
                // zero gradient is indistinguishable from an unselected one.
                if (std::find(expected.begin(), expected.end(), r) != expected.end()) {
                    EXPECT_EQ(p.delta.values[r], 0.1 * ((g[r] > 0) - (g[r] < 0)));
                    EXPECT_EQ(p.delta.values[6 + r], 0.1 * ((g[6 + r] > 0) - (g[6 + r] < 0)));
                } else {
                    EXPECT_EQ(p.delta.values[r], 0.0);
                    EXPECT_EQ(p.delta.values[6 + r], 0.0);
                }
            }
        }
    }
}

TEST(PowerControlled, FullRatioEqualsFgsm) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto x = random_pilots(100 + s);
        const int label = int(s % 5);
        const auto a = power_controlled(default_model(), x, label, 0.04, 1.0, 0.0016);
        const auto b = fgsm(default_model(), x, label, 0.04);
        EXPECT_EQ(a.delta.values, b.delta.values);
        EXPECT_EQ(a.perturbed_re_count, b.perturbed_re_count);
    }
}

TEST(PowerControlled, CountAndPowerLaw) {
    const auto x = random_pilots(6);
    const auto g = input_gradient(default_model(), x, 0);
    std::size_t zeros = 0;
    for (double v : g) zeros += v == 0.0;
    for (int i = 1; i <= 10; ++i) {
        const double r = 0.1 * i;
        const auto p = power_controlled_from_gradient(x, g, 0.04, r);
        EXPECT_EQ(p.perturbed_re_count, static_cast<std::size_t>(std::floor(r * 480 + 1e-9)));
        EXPECT_EQ(selected_res(p).size(), p.perturbed_re_count);
        if (zeros == 0) EXPECT_NEAR(p.mean_power, r * 0.04 * 0.04, 1e-12);
    }
    EXPECT_EQ(selected_count(0.7, 480), 336u);
    EXPECT_EQ(selected_count(0.3, 10), 3u);
    EXPECT_EQ(selected_count(0.05, 10), 0u);
}

TEST(Budget, Examples) {
    EXPECT_TRUE(validate_budget(0.04, 1.0, 0.0016).ok);
    EXPECT_DOUBLE_EQ(validate_budget(0.04, 1.0, 0.0016).sigma2, 0.0016);
    EXPECT_FALSE(validate_budget(0.04, 1.0, 0.001).ok);
    EXPECT_TRUE(validate_budget(0.0, 1.0, 0.0).ok);
    EXPECT_TRUE(validate_budget(0.0, 0.3, 0.0).ok);
    EXPECT_TRUE(validate_budget(5.0, 1.0, std::numeric_limits<double>::infinity()).ok);
    EXPECT_FALSE(validate_budget(0.1, 0.2, 0.0016).ok);
}

TEST(Budget, ViolationRaisesPowerConstraintError) {
    const auto x = random_pilots(7);
    try {
        power_controlled(default_model(), x, 0, 0.05, 1.0, 0.0016);
        FAIL() << "expected BudgetError";
    } catch (const BudgetError& e) {
        EXPECT_NE(std::string(e.what()).find("noise power must be constrained"), std::string::npos);
    }
}

TEST(RandomPerturb, PowerCountAndSeeds) {
    const auto x = random_pilots(8);
    const auto a = random_perturb(x, 0.04, 0.2, 1);
    const auto b = random_perturb(x, 0.04, 0.2, 2);
    const auto a2 = random_perturb(x, 0.04, 0.2, 1);
    EXPECT_EQ(a.delta.values, a2.delta.values);
    EXPECT_NE(a.delta.values, b.delta.values);
    EXPECT_EQ(a.perturbed_re_count, 96u);
    EXPECT_EQ(selected_res(a).size(), 96u);
    EXPECT_NEAR(a.mean_power, 0.2 * 0.04 * 0.04, 0.01 * 0.2 * 0.04 * 0.04);
    const auto zero = random_perturb(x, 0.0, 1.0, 3);
    for (double v : zero.delta.values) EXPECT_EQ(v, 0.0);
    int positive = 0;
    const auto full = random_perturb(x, 0.04, 1.0, 4);
    for (double v : full.delta.values) positive += v > 0;
    EXPECT_NEAR(positive, 480, 80);
}

TEST(Apply, AdditiveInverse) {
    const auto x = random_pilots(9);
    const auto p = random_perturb(x, 0.04, 1.0, 5);
    auto neg = p;
    for (auto& v : neg.delta.values) v = -v;
    const auto back = apply(apply(x, p), neg);
    for (std::size_t i = 0; i < x.values.size(); ++i) EXPECT_NEAR(back.values[i], x.values[i], 1e-15);
    Perturbation zero = p;
    std::fill(zero.delta.values.begin(), zero.delta.values.end(), 0.0);
    EXPECT_EQ(apply(x, zero).values, x.values);
    EXPECT_THROW(apply(tensor_like(1, 2), p), ShapeError);
}

TEST(Injection, PreAndPostAgreeOnNoiselessUnitChannel) {
    GridConfig c;
    const auto positions = pilot_positions(c);
    const auto grid = build_frame(c, make_pilot_sequence(c, 1), random_bits(2 * std::size_t(c.data_count()), 2), 0);
    ChannelModel ch;
    ch.snr_db = std::numeric_limits<double>::infinity();
    const auto like = extract_pilots(grid, c, 0, 0);
    const auto p = random_perturb(like, 0.04, 0.5, 9);

    const auto pre = extract_pilots(propagate(inject_pre_channel(grid, p, positions), ch, 0).received, c, 0, 0);
    const auto post = extract_pilots(inject_post_channel(propagate(grid, ch, 0).received, p, positions), c, 0, 0);
    for (std::size_t i = 0; i < pre.values.size(); ++i) EXPECT_NEAR(pre.values[i], post.values[i], 1e-15);

    Perturbation zero = p;
    std::fill(zero.delta.values.begin(), zero.delta.values.end(), 0.0);
    EXPECT_EQ(inject_pre_channel(grid, zero, positions).cells, grid.cells);
}

TEST(Injection, ChannelGainScalesPreChannelPerturbation) {
    GridConfig c;
    const auto positions = pilot_positions(c);
    const auto grid = build_frame(c, make_pilot_sequence(c, 1), random_bits(2 * std::size_t(c.data_count()), 2), 0);
    const auto like = extract_pilots(grid, c, 0, 0);
    const auto p = random_perturb(like, 0.04, 1.0, 10);
    auto scaled = [](ResourceGrid g) {
        for (auto& v : g.cells) v *= 2.0;
        return g;
    };
    const auto clean = extract_pilots(scaled(grid), c, 0, 0);
    const auto pre = extract_pilots(scaled(inject_pre_channel(grid, p, positions)), c, 0, 0);
    const auto post = extract_pilots(inject_post_channel(scaled(grid), p, positions), c, 0, 0);
    for (std::size_t i = 0; i < clean.values.size(); ++i) {
        EXPECT_NEAR(pre.values[i] - clean.values[i], 2.0 * p.delta.values[i], 1e-14);
        EXPECT_NEAR(post.values[i] - clean.values[i], p.delta.values[i], 1e-14);
    }
}

TEST(Injection, PositionMismatchRejected) {
    GridConfig c;
    auto positions = pilot_positions(c);
    const auto grid = build_frame(c, make_pilot_sequence(c, 1), random_bits(2 * std::size_t(c.data_count()), 2), 0);
    const auto p = random_perturb(extract_pilots(grid, c, 0, 0), 0.04, 1.0, 1);
    positions.pop_back();
    EXPECT_THROW(inject_pre_channel(grid, p, positions), ShapeError);
    positions.push_back({1, 1});
    EXPECT_THROW(inject_pre_channel(grid, p, positions), ShapeError);
}

TEST(Config, EnumStringsRoundTrip) {
    for (auto m : {AttackMode::untargeted, AttackMode::targeted}) EXPECT_EQ(parse_attack_mode(to_string(m)), m);
    for (auto i : {Injection::pre_channel, Injection::post_channel}) EXPECT_EQ(parse_injection(to_string(i)), i);
    for (auto m : {AttackMethod::power_controlled, AttackMethod::fgsm, AttackMethod::random}) {
        EXPECT_EQ(parse_attack_method(to_string(m)), m);
    }
    EXPECT_THROW(parse_injection("sideways"), ConfigError);
    PerturbationConfig cfg;
    cfg.ratio = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = PerturbationConfig{};
    cfg.epsilon = -1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}
