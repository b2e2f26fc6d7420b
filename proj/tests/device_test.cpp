#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rfcloak/device.hpp"
#include "rfcloak/error.hpp"
#include "rfcloak/grid.hpp"

using namespace rfcloak;

namespace {

ResourceGrid sample_grid(std::uint64_t seed) {
    GridConfig c;
    return build_frame(c, make_pilot_sequence(c, 1), random_bits(2 * std::size_t(c.data_count()), seed), 0);
}

DeviceProfile identity_profile() {
    DeviceProfile p;
    p.device_id = 9;
    return p;
}

}  // namespace

TEST(IqImbalance, BalancedIsIdentity) {
    const cplx x{0.3, -0.7};
    EXPECT_EQ(apply_iq_imbalance(x, 0.0, 0.0), x);
}

TEST(IqImbalance, GainOnlyOnRealInput) {
    const cplx y = apply_iq_imbalance(cplx{1.0, 0.0}, 0.1, 0.0);
    EXPECT_NEAR(y.real(), 1.1, 1e-15);
    EXPECT_NEAR(y.imag(), 0.0, 1e-15);
}

TEST(IqImbalance, MatchesWidelyLinearFormula) {
    const double g = 0.07, phi = 0.05;
    const cplx mu{std::cos(phi / 2), g * std::sin(phi / 2)};
    const cplx nu{g * std::cos(phi / 2), -std::sin(phi / 2)};
    const cplx x{-0.4, 0.9};
    const cplx y = apply_iq_imbalance(x, g, phi);
    EXPECT_NEAR(std::abs(y - (mu * x + nu * std::conj(x))), 0.0, 1e-15);
}

TEST(PowerAmplifier, Identity) {
    const cplx x{0.2, 0.5};
    EXPECT_EQ(apply_pa(x, 1.0, 0.0, 0.0), x);
}

TEST(PowerAmplifier, CubicCompression) {
    EXPECT_NEAR(apply_pa(cplx{0.5, 0.0}, 1.0, -0.1, 0.0).real(), 0.4875, 1e-15);
    EXPECT_NEAR(apply_pa(cplx{0.5, 0.0}, 1.0, -0.1, 0.0).imag(), 0.0, 1e-15);
}

TEST(Cfo, ZeroIsIdentityAndQuarterTurnAtOneSubframe) {
    std::vector<cplx> x(15, cplx{1.0, 0.0});
    EXPECT_EQ(apply_cfo(x, 0.0), x);
    const auto y = apply_cfo(x, 0.25);
    EXPECT_NEAR(std::abs(y[14] - cplx{0.0, 1.0}), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(y[0] - cplx{1.0, 0.0}), 0.0, 1e-15);
    for (const auto& v : y) EXPECT_NEAR(std::abs(v), 1.0, 1e-15);
}

TEST(Impair, IdentityProfileLeavesGridUnchanged) {
    const auto g = sample_grid(3);
    const auto out = impair(g, identity_profile(), {2, 5});
    EXPECT_EQ(out.cells, g.cells);
}

TEST(Impair, ChainOrderIqPaCfoDc) {
    DeviceProfile p;
    p.iq_gain = 0.05;
    p.iq_phase = 0.03;
    p.pa_a3 = -0.2;
    p.pa_a5 = 0.01;
    p.cfo = 0.01;
    p.dc_offset = {0.01, -0.02};
    const auto g = sample_grid(4);
    const auto out = impair(g, p, {0, 0});
    for (int t : {0, 5, 77, 139}) {
        for (int k : {0, 13, 71}) {
            const cplx x = g.at(k, t);
            const cplx iq = apply_iq_imbalance(x, p.iq_gain, p.iq_phase);
            const cplx pa = apply_pa(iq, p.pa_a1, p.pa_a3, p.pa_a5);
            const cplx expected = pa * std::polar(1.0, 2.0 * std::numbers::pi * p.cfo * t / 14.0) + p.dc_offset;
            EXPECT_NEAR(std::abs(out.at(k, t) - expected), 0.0, 1e-14);
        }
    }
}

TEST(Impair, Deterministic) {
    const auto g = sample_grid(5);
    const auto p = default_device_profiles()[2];
    const auto a = impair(g, p, {3, 77});
    const auto b = impair(g, p, {3, 77});
    EXPECT_EQ(a.cells, b.cells);
}

TEST(Impair, DistinctDevicesDiffer) {
    const auto g = sample_grid(6);
    const auto profiles = default_device_profiles();
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        for (std::size_t j = i + 1; j < profiles.size(); ++j) {
            const auto a = impair(g, profiles[i], {0, 1});
            const auto b = impair(g, profiles[j], {0, 1});
            double worst = 0.0;
            for (std::size_t c = 0; c < a.cells.size(); ++c) worst = std::max(worst, std::abs(a.cells[c] - b.cells[c]));
            EXPECT_GT(worst, 1e-6) << i << " vs " << j;
        }
    }
}

TEST(Drift, ConditionsShiftParametersWithinSixSigma) {
    const auto base = default_device_profiles()[1];
    const double bound = 6.0 * base.jitter_std;
    bool any_change = false;
    for (int cond = 0; cond < 50; ++cond) {
        const auto d = drifted(base, {cond, 123});
        auto check = [&](double v, double ref) {
            if (ref == 0.0) {
                EXPECT_EQ(v, 0.0);
                return;
            }
            EXPECT_LE(std::abs(v / ref - 1.0), bound + 1e-12);
            any_change |= v != ref;
        };
        check(d.iq_gain, base.iq_gain);
        check(d.iq_phase, base.iq_phase);
        check(d.pa_a1, base.pa_a1);
        check(d.pa_a3, base.pa_a3);
        check(d.pa_a5, base.pa_a5);
        check(d.cfo, base.cfo);
        EXPECT_EQ(d.device_id, base.device_id);
    }
    EXPECT_TRUE(any_change);
}

TEST(Drift, DependsOnConditionAndSeed) {
    const auto base = default_device_profiles()[0];
    EXPECT_EQ(drifted(base, {1, 5}), drifted(base, {1, 5}));
    EXPECT_NE(drifted(base, {1, 5}), drifted(base, {2, 5}));
    EXPECT_NE(drifted(base, {1, 5}), drifted(base, {1, 6}));
}

TEST(Drift, ZeroJitterIsIdentity) {
    auto base = default_device_profiles()[3];
    base.jitter_std = 0.0;
    EXPECT_EQ(drifted(base, {4, 4}), base);
}

TEST(Profiles, DefaultTableValid) {
    const auto profiles = default_device_profiles();
    ASSERT_EQ(profiles.size(), 5u);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        EXPECT_EQ(profiles[i].device_id, static_cast<int>(i));
        EXPECT_NO_THROW(profiles[i].validate());
    }
}

TEST(Profiles, InvalidRejected) {
    auto p = default_device_profiles()[0];
    p.jitter_std = -0.1;
    EXPECT_THROW(p.validate(), ConfigError);
    p = default_device_profiles()[0];
    p.pa_a1 = std::nan("");
    EXPECT_THROW(p.validate(), ConfigError);
}
