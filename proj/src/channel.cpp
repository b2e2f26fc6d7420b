#include "rfcloak/channel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <numbers>
#include <random>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"

namespace rfcloak {

void ChannelModel::validate() const {
    if (taps.empty()) throw ConfigError("channel: at least one tap required");
    if (taps.size() > 8) throw ConfigError("channel: at most 8 taps supported");
    double energy = 0.0;
    for (const auto& t : taps) energy += std::norm(t);
    if (!(energy > 0.0) || !std::isfinite(energy)) throw ConfigError("channel: taps have no energy");
    if (std::isnan(snr_db) || (std::isinf(snr_db) && snr_db < 0)) {
        throw ConfigError("channel: snr_db must be finite or +inf");
    }
}

std::vector<cplx> normalized_taps(std::span<const cplx> taps) {
    double energy = 0.0;
    for (const auto& t : taps) energy += std::norm(t);
    if (!(energy > 0.0)) throw ConfigError("channel: taps have no energy");
    const double scale = 1.0 / std::sqrt(energy);
    std::vector<cplx> out(taps.begin(), taps.end());
    for (auto& t : out) t *= scale;
    return out;
}

std::vector<cplx> frequency_response(std::span<const cplx> taps, int n_subcarriers) {
    std::vector<cplx> h(static_cast<std::size_t>(n_subcarriers));
    for (int k = 0; k < n_subcarriers; ++k) {
        cplx acc{};
        for (std::size_t l = 0; l < taps.size(); ++l) {
            const double phase = -2.0 * std::numbers::pi * double(k) * double(l) / n_subcarriers;
            acc += taps[l] * std::polar(1.0, phase);
        }
        h[static_cast<std::size_t>(k)] = acc;
    }
    return h;
}

namespace {

std::vector<cplx> draw_taps(const ChannelModel& channel, std::uint64_t frame_index) {
    const auto profile = normalized_taps(channel.taps);
    if (!channel.block_fading) return profile;
    // Rayleigh taps following the configured power-delay profile.
    auto rng = make_rng(channel.seed, "fading", {frame_index});
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<cplx> taps(profile.size());
    for (std::size_t l = 0; l < profile.size(); ++l) {
        const double sigma = std::abs(profile[l]) / std::numbers::sqrt2;
        taps[l] = {sigma * unit(rng), sigma * unit(rng)};
    }
    return normalized_taps(taps);
}

}  // namespace

Propagation propagate(const ResourceGrid& grid, const ChannelModel& channel,
                      std::uint64_t frame_index, std::uint64_t attempt) {
    channel.validate();
    Propagation out;
    out.true_h = frequency_response(draw_taps(channel, frame_index), grid.n_subcarriers);
    out.noise_var = channel.noise_var();
    out.received = grid;
    out.noise.assign(grid.cells.size(), cplx{});
    if (!channel.noiseless()) {
        auto rng = make_rng(channel.seed, "noise", {frame_index, attempt});
        std::normal_distribution<double> unit(0.0, 1.0);
        const double sigma = std::sqrt(out.noise_var / 2.0);
        for (auto& n : out.noise) n = {sigma * unit(rng), sigma * unit(rng)};
    }
    for (int t = 0; t < grid.n_symbols; ++t) {
        for (int k = 0; k < grid.n_subcarriers; ++k) {
            const auto idx = grid.index(k, t);
            out.received.cells[idx] = out.true_h[static_cast<std::size_t>(k)] * grid.cells[idx] +
                                      out.noise[idx];
        }
    }
    return out;
}

LsEstimates estimate_ls(const ResourceGrid& received, std::span<const cplx> known_pilots,
                        std::span<const PilotPosition> positions) {
    if (known_pilots.size() != positions.size()) {
        throw SizeError("estimate_ls: pilot sequence and position list differ in length");
    }
    LsEstimates out;
    out.positions.assign(positions.begin(), positions.end());
    out.values.resize(positions.size());
    for (std::size_t p = 0; p < positions.size(); ++p) {
        if (known_pilots[p] == cplx{}) throw Error("estimate_ls: zero-valued reference pilot");
        out.values[p] = received.at(positions[p].subcarrier, positions[p].symbol) / known_pilots[p];
    }
    return out;
}

struct MmseEstimator::Impl {
    int n_subcarriers = 0;
    int n_symbols = 0;
    std::vector<PilotPosition> positions;
    // Pilot symbols in order, and for each the range [begin, end) of pilots on it.
    std::vector<int> pilot_symbols;
    std::vector<std::pair<std::size_t, std::size_t>> symbol_ranges;
    std::vector<double> pow_f;  // rho_f^d for d in [0, K)
    std::vector<double> pow_t;  // rho_t^d for d in [0, T)
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd ones_solved;  // A^-1 1
    double ones_quad = 0.0;       // 1' A^-1 1
};

MmseEstimator::MmseEstimator(const GridConfig& config, double snr_linear, CorrelationParams corr)
    : impl_(std::make_unique<Impl>()) {
    if (!(corr.rho_f > 0.0 && corr.rho_f < 1.0 && corr.rho_t > 0.0 && corr.rho_t < 1.0)) {
        throw ConfigError("mmse: correlation coefficients must lie in (0,1)");
    }
    if (!(snr_linear > 0.0)) throw ConfigError("mmse: snr must be positive");
    auto& s = *impl_;
    s.n_subcarriers = config.n_subcarriers;
    s.n_symbols = config.n_symbols();
    s.positions = pilot_positions(config);
    noise_var_ = std::max(1.0 / snr_linear, kNoiseFloor);

    for (std::size_t p = 0; p < s.positions.size(); ++p) {
        if (s.pilot_symbols.empty() || s.pilot_symbols.back() != s.positions[p].symbol) {
            s.pilot_symbols.push_back(s.positions[p].symbol);
            s.symbol_ranges.emplace_back(p, p);
        }
        s.symbol_ranges.back().second = p + 1;
    }
    s.pow_f.resize(static_cast<std::size_t>(s.n_subcarriers));
    s.pow_t.resize(static_cast<std::size_t>(s.n_symbols));
    for (std::size_t d = 0; d < s.pow_f.size(); ++d) s.pow_f[d] = std::pow(corr.rho_f, double(d));
    for (std::size_t d = 0; d < s.pow_t.size(); ++d) s.pow_t[d] = std::pow(corr.rho_t, double(d));

    const auto n = static_cast<Eigen::Index>(s.positions.size());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& pi = s.positions[static_cast<std::size_t>(i)];
            const auto& pj = s.positions[static_cast<std::size_t>(j)];
            a(i, j) = s.pow_f[static_cast<std::size_t>(std::abs(pi.subcarrier - pj.subcarrier))] *
                      s.pow_t[static_cast<std::size_t>(std::abs(pi.symbol - pj.symbol))];
        }
        a(i, i) += noise_var_;
    }
    s.llt.compute(a);
    if (s.llt.info() != Eigen::Success) throw Error("mmse: regularized pilot covariance is singular");
    s.ones_solved = s.llt.solve(Eigen::VectorXd::Ones(n));
    s.ones_quad = s.ones_solved.sum();
}

MmseEstimator::~MmseEstimator() = default;
MmseEstimator::MmseEstimator(MmseEstimator&&) noexcept = default;
MmseEstimator& MmseEstimator::operator=(MmseEstimator&&) noexcept = default;

ChannelEstimate MmseEstimator::estimate(const LsEstimates& ls) const {
    const auto& s = *impl_;
    if (ls.values.size() != s.positions.size() || ls.positions != s.positions) {
        throw ShapeError("mmse: LS estimates do not cover the configured pilot lattice");
    }
    const auto n = static_cast<Eigen::Index>(ls.values.size());
    Eigen::VectorXd re(n);
    Eigen::VectorXd im(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        re(i) = ls.values[static_cast<std::size_t>(i)].real();
        im(i) = ls.values[static_cast<std::size_t>(i)].imag();
    }
    const Eigen::VectorXd sre = s.llt.solve(re);
    const Eigen::VectorXd sim = s.llt.solve(im);
    const cplx mean{s.ones_solved.dot(re) / s.ones_quad, s.ones_solved.dot(im) / s.ones_quad};
    std::vector<cplx> weights(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        weights[static_cast<std::size_t>(i)] =
            cplx{sre(i), sim(i)} - mean * s.ones_solved(i);
    }

    // Separable evaluation: frequency smoothing per pilot symbol, then time.
    const auto k_count = static_cast<std::size_t>(s.n_subcarriers);
    std::vector<cplx> per_symbol(s.pilot_symbols.size() * k_count);
    for (std::size_t j = 0; j < s.pilot_symbols.size(); ++j) {
        const auto [begin, end] = s.symbol_ranges[j];
        for (std::size_t k = 0; k < k_count; ++k) {
            cplx acc{};
            for (std::size_t p = begin; p < end; ++p) {
                const auto dk = std::abs(static_cast<int>(k) - s.positions[p].subcarrier);
                acc += s.pow_f[static_cast<std::size_t>(dk)] * weights[p];
            }
            per_symbol[j * k_count + k] = acc;
        }
    }

    ChannelEstimate est;
    est.n_subcarriers = s.n_subcarriers;
    est.n_symbols = s.n_symbols;
    est.method = EstimateMethod::mmse;
    est.noise_var_est = noise_var_;
    est.h_hat.assign(k_count * static_cast<std::size_t>(s.n_symbols), mean);
    for (int t = 0; t < s.n_symbols; ++t) {
        cplx* row = est.h_hat.data() + static_cast<std::size_t>(t) * k_count;
        for (std::size_t j = 0; j < s.pilot_symbols.size(); ++j) {
            const double w = s.pow_t[static_cast<std::size_t>(std::abs(t - s.pilot_symbols[j]))];
            const cplx* src = per_symbol.data() + j * k_count;
            for (std::size_t k = 0; k < k_count; ++k) row[k] += w * src[k];
        }
    }
    return est;
}

ChannelEstimate estimate_mmse(const LsEstimates& ls, const GridConfig& config, double snr_linear,
                              CorrelationParams corr) {
    if (ls.values.empty()) throw SizeError("mmse: no pilot estimates");
    return MmseEstimator(config, snr_linear, corr).estimate(ls);
}

Equalized equalize(const ResourceGrid& received, const ChannelEstimate& est) {
    if (est.n_subcarriers != received.n_subcarriers || est.n_symbols != received.n_symbols) {
        throw ShapeError("equalize: estimate shape differs from grid");
    }
    Equalized out{received, std::vector<std::uint8_t>(received.cells.size(), 0)};
    for (std::size_t i = 0; i < received.cells.size(); ++i) {
        const cplx h = est.h_hat[i];
        if (std::abs(h) <= kErasureThreshold || !std::isfinite(std::abs(h))) {
            out.grid.cells[i] = cplx{};
            out.erased[i] = 1;
        } else {
            out.grid.cells[i] = received.cells[i] / h;
        }
    }
    return out;
}

ResourceGrid ideal_recover(const ResourceGrid& received, std::span<const cplx> noise,
                           std::span<const cplx> true_h) {
    if (noise.size() != received.cells.size() ||
        true_h.size() != static_cast<std::size_t>(received.n_subcarriers)) {
        throw SizeError("ideal_recover: noise or channel length mismatch");
    }
    ResourceGrid out = received;
    for (int t = 0; t < received.n_symbols; ++t) {
        for (int k = 0; k < received.n_subcarriers; ++k) {
            const auto idx = received.index(k, t);
            out.cells[idx] = (received.cells[idx] - noise[idx]) / true_h[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

void LinkStats::merge(const LinkStats& other) {
    n_frames += other.n_frames;
    n_blocks += other.n_blocks;
    errored_blocks += other.errored_blocks;
    n_packets += other.n_packets;
    lost_packets += other.lost_packets;
    bit_errors += other.bit_errors;
    delivered_bits += other.delivered_bits;
    raw_bits_per_frame = std::max(raw_bits_per_frame, other.raw_bits_per_frame);
}

namespace {

struct BlockLayout {
    std::size_t n_cells;
    std::size_t per_block;
    std::size_t count;
    std::size_t begin(std::size_t b) const { return b * per_block; }
    std::size_t end(std::size_t b) const { return std::min(n_cells, (b + 1) * per_block); }
};

BlockLayout make_layout(std::size_t n_cells, int blocks_per_frame) {
    if (blocks_per_frame <= 0) throw ConfigError("link: blocks_per_frame must be positive");
    const auto want = static_cast<std::size_t>(blocks_per_frame);
    const std::size_t per = (n_cells + want - 1) / want;
    const std::size_t count = per == 0 ? 0 : (n_cells + per - 1) / per;
    return {n_cells, per, count};
}

// Per-block bit error counts of the equalized data cells.
std::vector<std::uint64_t> block_errors(const Equalized& eq, std::span<const std::uint8_t> truth,
                                        const BlockLayout& layout) {
    const auto symbols = data_cells(eq.grid);
    if (truth.size() != 2 * symbols.size()) {
        throw SizeError("demodulate_and_score: true bit count does not match data cells");
    }
    const auto bits = demodulate_qpsk(symbols);
    std::vector<std::uint64_t> errors(layout.count, 0);
    for (std::size_t b = 0; b < layout.count; ++b) {
        for (std::size_t c = layout.begin(b); c < layout.end(b); ++c) {
            errors[b] += (bits[2 * c] != truth[2 * c]) + (bits[2 * c + 1] != truth[2 * c + 1]);
        }
    }
    return errors;
}

}  // namespace

LinkStats demodulate_and_score(const Equalized& equalized, std::span<const std::uint8_t> true_bits,
                               int blocks_per_frame, int max_retx,
                               const RetransmitFn& retransmit) {
    if (max_retx < 1) throw ConfigError("link: max_retx must be at least 1");
    const auto layout = make_layout(true_bits.size() / 2, blocks_per_frame);
    const auto first = block_errors(equalized, true_bits, layout);

    LinkStats stats;
    stats.n_frames = 1;
    stats.n_blocks = layout.count;
    stats.n_packets = layout.count;
    stats.raw_bits_per_frame = static_cast<double>(true_bits.size());
    std::vector<std::size_t> pending;
    for (std::size_t b = 0; b < layout.count; ++b) {
        stats.bit_errors += first[b];
        if (first[b] == 0) {
            stats.delivered_bits += 2.0 * double(layout.end(b) - layout.begin(b));
        } else {
            ++stats.errored_blocks;
            pending.push_back(b);
        }
    }
    for (int attempt = 1; attempt < max_retx && !pending.empty() && retransmit; ++attempt) {
        const auto errors = block_errors(retransmit(attempt), true_bits, layout);
        std::erase_if(pending, [&](std::size_t b) { return errors[b] == 0; });
    }
    stats.lost_packets = pending.size();
    return stats;
}

Equalized receive(const ResourceGrid& received, std::span<const cplx> known_pilots,
                  std::span<const PilotPosition> positions, const MmseEstimator& estimator) {
    return equalize(received, estimator.estimate(estimate_ls(received, known_pilots, positions)));
}

}  // namespace rfcloak
