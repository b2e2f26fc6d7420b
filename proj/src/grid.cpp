#include "rfcloak/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"

namespace rfcloak {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

}  // namespace

void GridConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("grid: " + what); };
    if (n_subcarriers <= 0) fail("n_subcarriers must be positive");
    if (n_subframes <= 0) fail("n_subframes must be positive");
    if (pilot_symbols.empty()) fail("pilot_symbols must not be empty");
    for (int s : pilot_symbols) {
        if (s < 0 || s >= kSymbolsPerSubframe) fail("pilot symbol index out of [0,14)");
    }
    if (!std::is_sorted(pilot_symbols.begin(), pilot_symbols.end()) ||
        std::adjacent_find(pilot_symbols.begin(), pilot_symbols.end()) != pilot_symbols.end()) {
        fail("pilot_symbols must be strictly increasing");
    }
    if (pilot_spacing <= 0) fail("pilot_spacing must be positive");
    if (n_subcarriers % pilot_spacing != 0) fail("pilot_spacing must divide n_subcarriers");
    if (pilot_stagger < 0 || pilot_stagger >= pilot_spacing) {
        fail("pilot_stagger must lie in [0, pilot_spacing)");
    }
}

double ResourceGrid::mean_power() const {
    if (cells.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& c : cells) acc += std::norm(c);
    return acc / static_cast<double>(cells.size());
}

std::vector<PilotPosition> pilot_positions(const GridConfig& config) {
    config.validate();
    std::vector<PilotPosition> out;
    out.reserve(static_cast<std::size_t>(config.pilot_count()));
    int ordinal = 0;
    for (int sf = 0; sf < config.n_subframes; ++sf) {
        for (int s : config.pilot_symbols) {
            const int symbol = sf * kSymbolsPerSubframe + s;
            const int offset = (ordinal % 2) * config.pilot_stagger;
            for (int k = offset; k < config.n_subcarriers; k += config.pilot_spacing) {
                out.push_back({k, symbol});
            }
            ++ordinal;
        }
    }
    return out;
}

std::vector<cplx> modulate_qpsk(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0) throw SizeError("modulate_qpsk: odd number of bits");
    std::vector<cplx> out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double re = bits[2 * i] ? -kInvSqrt2 : kInvSqrt2;
        const double im = bits[2 * i + 1] ? -kInvSqrt2 : kInvSqrt2;
        out[i] = {re, im};
    }
    return out;
}

Bits demodulate_qpsk(std::span<const cplx> symbols) {
    Bits out(symbols.size() * 2);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        out[2 * i] = symbols[i].real() < 0.0 ? 1 : 0;
        out[2 * i + 1] = symbols[i].imag() < 0.0 ? 1 : 0;
    }
    return out;
}

std::vector<cplx> make_pilot_sequence(const GridConfig& config, std::uint64_t pilot_seed) {
    const auto bits = random_bits(2 * static_cast<std::size_t>(config.pilot_count()), pilot_seed);
    return modulate_qpsk(bits);
}

Bits random_bits(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Bits out(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) word = rng();
        out[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
    }
    return out;
}

ResourceGrid build_frame(const GridConfig& config, std::span<const cplx> pilot_seq,
                         std::span<const std::uint8_t> data_bits, std::uint64_t seed) {
    const auto positions = pilot_positions(config);
    if (pilot_seq.size() != positions.size()) {
        std::ostringstream os;
        os << "build_frame: pilot sequence has " << pilot_seq.size() << " symbols, lattice needs "
           << positions.size();
        throw SizeError(os.str());
    }
    const auto n_data = static_cast<std::size_t>(config.data_count());
    if (data_bits.size() != 2 * n_data) {
        std::ostringstream os;
        os << "build_frame: " << data_bits.size() << " data bits supplied, frame needs "
           << 2 * n_data;
        throw SizeError(os.str());
    }

    ResourceGrid grid;
    grid.n_subcarriers = config.n_subcarriers;
    grid.n_symbols = config.n_symbols();
    grid.cells.assign(static_cast<std::size_t>(config.n_cells()), cplx{});
    grid.pilot_mask.assign(grid.cells.size(), 0);
    grid.frame_id = seed;

    for (std::size_t p = 0; p < positions.size(); ++p) {
        const auto idx = grid.index(positions[p].subcarrier, positions[p].symbol);
        grid.cells[idx] = pilot_seq[p];
        grid.pilot_mask[idx] = 1;
    }
    const auto symbols = modulate_qpsk(data_bits);
    std::size_t d = 0;
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        if (!grid.pilot_mask[i]) grid.cells[i] = symbols[d++];
    }

    // Unit-modulus pilots with QPSK data are already normalized; only rescale
    // when the supplied pilots carry a different energy.
    const double power = grid.mean_power();
    if (power > 0.0 && std::abs(power - 1.0) > 1e-12) {
        const double scale = 1.0 / std::sqrt(power);
        for (auto& c : grid.cells) c *= scale;
    }
    return grid;
}

std::vector<cplx> data_cells(const ResourceGrid& grid) {
    std::vector<cplx> out;
    out.reserve(grid.cells.size());
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        if (!grid.pilot_mask[i]) out.push_back(grid.cells[i]);
    }
    return out;
}

PilotTensor extract_pilots(const ResourceGrid& grid, const GridConfig& config, int label,
                           int condition) {
    if (grid.n_subcarriers != config.n_subcarriers || grid.n_symbols != config.n_symbols() ||
        grid.cells.size() != static_cast<std::size_t>(config.n_cells())) {
        throw ShapeError("extract_pilots: grid dimensions do not match config");
    }
    const auto positions = pilot_positions(config);
    const auto mask_count = std::count(grid.pilot_mask.begin(), grid.pilot_mask.end(), 1);
    if (static_cast<std::size_t>(mask_count) != positions.size()) {
        throw ShapeError("extract_pilots: grid pilot mask does not match config lattice");
    }

    PilotTensor t;
    t.n_pilot_symbols = config.pilot_symbol_count();
    t.pilots_per_symbol = config.pilots_per_symbol();
    t.values.assign(t.size(), 0.0);
    t.device_label = label;
    t.condition_id = condition;
    for (std::size_t p = 0; p < positions.size(); ++p) {
        if (!grid.is_pilot(positions[p].subcarrier, positions[p].symbol)) {
            throw ShapeError("extract_pilots: grid pilot mask does not match config lattice");
        }
        const cplx v = grid.at(positions[p].subcarrier, positions[p].symbol);
        t.re(p) = v.real();
        t.im(p) = v.imag();
    }
    return t;
}

}  // namespace rfcloak
