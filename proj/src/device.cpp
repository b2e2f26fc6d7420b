#include "rfcloak/device.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"

namespace rfcloak {

void DeviceProfile::validate() const {
    auto fail = [this](const std::string& what) {
        throw ConfigError("device " + std::to_string(device_id) + ": " + what);
    };
    if (device_id < 0) fail("device_id must be non-negative");
    if (!(pa_a1 > 0.0)) fail("pa_a1 must be positive");
    if (!(std::abs(cfo) < 0.05)) fail("|cfo| must be below 0.05");
    if (!(std::abs(iq_gain) < 0.5)) fail("|iq_gain| must be below 0.5");
    if (!(std::abs(iq_phase) < 0.5)) fail("|iq_phase| must be below 0.5");
    if (!(jitter_std >= 0.0)) fail("jitter_std must be non-negative");
    if (!std::isfinite(pa_a3) || !std::isfinite(pa_a5) || !std::isfinite(dc_offset.real()) ||
        !std::isfinite(dc_offset.imag())) {
        fail("non-finite parameter");
    }
}

cplx apply_iq_imbalance(cplx x, double gain, double phase) {
    const double c = std::cos(phase / 2.0);
    const double s = std::sin(phase / 2.0);
    const cplx mu{c, gain * s};
    const cplx nu{gain * c, -s};
    return mu * x + nu * std::conj(x);
}

cplx apply_pa(cplx x, double a1, double a3, double a5) {
    const double p = std::norm(x);
    return x * (a1 + a3 * p + a5 * p * p);
}

namespace {

cplx cfo_rotation(int symbol, double cfo) {
    const double phase = 2.0 * std::numbers::pi * cfo * symbol / kSymbolsPerSubframe;
    return std::polar(1.0, phase);
}

}  // namespace

std::vector<cplx> apply_cfo(const std::vector<cplx>& x, double cfo) {
    std::vector<cplx> out(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) out[t] = x[t] * cfo_rotation(static_cast<int>(t), cfo);
    return out;
}

DeviceProfile drifted(const DeviceProfile& profile, const ConditionContext& ctx) {
    if (profile.jitter_std == 0.0) return profile;
    auto rng = make_rng(ctx.drift_seed, "device-drift",
                        {static_cast<std::uint64_t>(profile.device_id),
                         static_cast<std::uint64_t>(ctx.condition_id)});
    std::normal_distribution<double> unit(0.0, 1.0);
    auto factor = [&] {
        const double z = std::clamp(unit(rng), -6.0, 6.0);
        return 1.0 + profile.jitter_std * z;
    };
    DeviceProfile out = profile;
    out.iq_gain *= factor();
    out.iq_phase *= factor();
    out.pa_a1 *= factor();
    out.pa_a3 *= factor();
    out.pa_a5 *= factor();
    out.cfo *= factor();
    out.dc_offset *= factor();
    return out;
}

ResourceGrid impair(const ResourceGrid& grid, const DeviceProfile& profile,
                    const ConditionContext& ctx) {
    profile.validate();
    const DeviceProfile p = drifted(profile, ctx);
    ResourceGrid out = grid;
    for (int t = 0; t < grid.n_symbols; ++t) {
        const cplx rot = cfo_rotation(t, p.cfo);
        for (int k = 0; k < grid.n_subcarriers; ++k) {
            cplx& c = out.at(k, t);
            c = apply_pa(apply_iq_imbalance(c, p.iq_gain, p.iq_phase), p.pa_a1, p.pa_a3, p.pa_a5);
            c = c * rot + p.dc_offset;
        }
    }
    return out;
}

std::vector<DeviceProfile> default_device_profiles() {
    constexpr double jitter = 0.02;
    return {
        {0, 0.012, 0.016, 1.000, -0.050, 0.0030, 0.0016, {0.004, 0.002}, jitter},
        {1, 0.018, 0.008, 0.992, -0.042, 0.0030, 0.0022, {0.002, -0.004}, jitter},
        {2, -0.008, -0.012, 1.008, -0.062, 0.0070, -0.0012, {-0.004, 0.004}, jitter},
        {3, -0.014, -0.004, 0.988, -0.054, 0.0050, -0.0018, {0.000, -0.006}, jitter},
        {4, 0.004, -0.018, 1.004, -0.046, 0.0062, 0.0006, {-0.006, 0.000}, jitter},
    };
}

}  // namespace rfcloak
