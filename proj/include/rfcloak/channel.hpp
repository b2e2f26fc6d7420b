#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "rfcloak/grid.hpp"

namespace rfcloak {

struct ChannelModel {
    std::vector<cplx> taps{cplx{1.0, 0.0}};
    double snr_db = 25.0;  // +inf disables noise
    bool block_fading = false;
    std::uint64_t seed = 0;

    bool noiseless() const { return std::isinf(snr_db) && snr_db > 0; }
    double noise_var() const { return noiseless() ? 0.0 : std::pow(10.0, -snr_db / 10.0); }
    void validate() const;
};

// Taps scaled to unit energy.
std::vector<cplx> normalized_taps(std::span<const cplx> taps);

// H[k] = sum_l h_l exp(-j 2 pi k l / K).
std::vector<cplx> frequency_response(std::span<const cplx> taps, int n_subcarriers);

struct Propagation {
    ResourceGrid received;
    std::vector<cplx> true_h;  // per subcarrier, constant over the frame
    std::vector<cplx> noise;   // per cell, same layout as the grid
    double noise_var = 0.0;
};

// Y = H X + n. Taps (when fading) and noise are drawn from (seed, frame_index,
// attempt), so a retransmission sees the same channel with fresh noise.
Propagation propagate(const ResourceGrid& grid, const ChannelModel& channel,
                      std::uint64_t frame_index, std::uint64_t attempt = 0);

struct LsEstimates {
    std::vector<PilotPosition> positions;
    std::vector<cplx> values;
};

LsEstimates estimate_ls(const ResourceGrid& received, std::span<const cplx> known_pilots,
                        std::span<const PilotPosition> positions);

enum class EstimateMethod { ls, mmse };

struct ChannelEstimate {
    int n_subcarriers = 0;
    int n_symbols = 0;
    std::vector<cplx> h_hat;  // grid layout
    EstimateMethod method = EstimateMethod::mmse;
    double noise_var_est = 0.0;

    const cplx& at(int subcarrier, int symbol) const {
        return h_hat[static_cast<std::size_t>(symbol) * n_subcarriers + subcarrier];
    }
};

struct CorrelationParams {
    double rho_f = 0.98;
    double rho_t = 0.999;
};

// Wiener interpolation of LS pilot estimates with the separable exponential
// prior R[(k,t),(k',t')] = rho_f^|k-k'| rho_t^|t-t'|. The channel mean is
// estimated by generalized least squares and removed before filtering, so a
// constant channel is reproduced exactly in the noiseless limit. The
// regularized pilot covariance is factored once per (lattice, SNR).
class MmseEstimator {
public:
    MmseEstimator(const GridConfig& config, double snr_linear, CorrelationParams corr = {});
    ~MmseEstimator();
    MmseEstimator(MmseEstimator&&) noexcept;
    MmseEstimator& operator=(MmseEstimator&&) noexcept;

    ChannelEstimate estimate(const LsEstimates& ls) const;
    double noise_var() const { return noise_var_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    double noise_var_ = 0.0;
};

// Noise variance below which the regularizer is clamped (noiseless runs).
inline constexpr double kNoiseFloor = 1e-12;

ChannelEstimate estimate_mmse(const LsEstimates& ls, const GridConfig& config, double snr_linear,
                              CorrelationParams corr = {});

struct Equalized {
    ResourceGrid grid;
    std::vector<std::uint8_t> erased;  // cells whose estimate was below kErasureThreshold
};

inline constexpr double kErasureThreshold = 1e-12;

// X = Y / H_hat; erased cells are zeroed and carry no information.
Equalized equalize(const ResourceGrid& received, const ChannelEstimate& est);

// White-box identity x' = (Y + delta - n) / H, with n and H known exactly.
ResourceGrid ideal_recover(const ResourceGrid& received, std::span<const cplx> noise,
                           std::span<const cplx> true_h);

struct LinkStats {
    std::uint64_t n_frames = 0;
    std::uint64_t n_blocks = 0;
    std::uint64_t errored_blocks = 0;
    std::uint64_t n_packets = 0;
    std::uint64_t lost_packets = 0;
    std::uint64_t bit_errors = 0;
    double delivered_bits = 0.0;
    double raw_bits_per_frame = 0.0;

    double bler() const { return n_blocks ? double(errored_blocks) / double(n_blocks) : 0.0; }
    double plr() const { return n_packets ? double(lost_packets) / double(n_packets) : 0.0; }
    // Mean delivered (first-attempt) data bits per frame.
    double throughput() const { return n_frames ? delivered_bits / double(n_frames) : 0.0; }
    void merge(const LinkStats& other);
};

// Re-runs propagation and reception for one retransmission attempt (>= 1).
using RetransmitFn = std::function<Equalized(int attempt)>;

// Hard-decision demodulation of the data cells split into `blocks_per_frame`
// contiguous blocks. A block errs on any bit mismatch; a packet (one block) is
// lost when all `max_retx` transmissions fail. Without `retransmit`, every
// errored block counts as lost.
LinkStats demodulate_and_score(const Equalized& equalized, std::span<const std::uint8_t> true_bits,
                               int blocks_per_frame, int max_retx,
                               const RetransmitFn& retransmit = {});

// LS at the pilots, MMSE interpolation, equalization.
Equalized receive(const ResourceGrid& received, std::span<const cplx> known_pilots,
                  std::span<const PilotPosition> positions, const MmseEstimator& estimator);

}  // namespace rfcloak
