#pragma once

#include <cstdint>
#include <vector>

#include "rfcloak/grid.hpp"

namespace rfcloak {

// Analog front-end of one transmitter. The parameters are the fingerprint.
struct DeviceProfile {
    int device_id = 0;
    double iq_gain = 0.0;   // amplitude mismatch, 0 = balanced
    double iq_phase = 0.0;  // quadrature skew [rad]
    double pa_a1 = 1.0;
    double pa_a3 = 0.0;
    double pa_a5 = 0.0;
    double cfo = 0.0;  // fraction of the subcarrier spacing
    cplx dc_offset{};
    double jitter_std = 0.0;  // relative drift per condition

    void validate() const;
    bool operator==(const DeviceProfile&) const = default;
};

struct ConditionContext {
    int condition_id = 0;
    std::uint64_t drift_seed = 0;
};

// mu*x + nu*conj(x), mu = cos(phi/2) + j g sin(phi/2), nu = g cos(phi/2) - j sin(phi/2).
cplx apply_iq_imbalance(cplx x, double gain, double phase);

// Memoryless odd-order polynomial: a1 x + a3 x|x|^2 + a5 x|x|^4.
cplx apply_pa(cplx x, double a1, double a3, double a5);

// Rotates x[t] by exp(j 2 pi cfo t / 14), t being the OFDM symbol index.
std::vector<cplx> apply_cfo(const std::vector<cplx>& x, double cfo);

// The parameter set actually in effect for one condition: every parameter is
// scaled by an independent draw from N(1, jitter_std^2) truncated at 6 sigma.
DeviceProfile drifted(const DeviceProfile& profile, const ConditionContext& ctx);

// Per-cell chain IQ imbalance -> PA -> CFO -> DC offset, using drifted parameters.
ResourceGrid impair(const ResourceGrid& grid, const DeviceProfile& profile,
                    const ConditionContext& ctx);

// Five devices in two vendor families (two USRP-like, three Lime-like).
std::vector<DeviceProfile> default_device_profiles();

}  // namespace rfcloak
