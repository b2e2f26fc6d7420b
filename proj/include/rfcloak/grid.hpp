#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rfcloak {

using cplx = std::complex<double>;
using Bits = std::vector<std::uint8_t>;

inline constexpr int kSymbolsPerSubframe = 14;

// LTE-style time-frequency lattice. Defaults: 6 resource blocks, one 10 ms
// frame, cell-specific reference symbols {0,4,7,11} with a diamond stagger.
struct GridConfig {
    int n_subcarriers = 72;
    int n_subframes = 10;
    std::vector<int> pilot_symbols{0, 4, 7, 11};
    int pilot_spacing = 6;
    int pilot_stagger = 3;

    int n_symbols() const { return n_subframes * kSymbolsPerSubframe; }
    int n_cells() const { return n_subcarriers * n_symbols(); }
    int pilots_per_symbol() const { return n_subcarriers / pilot_spacing; }
    int pilot_symbol_count() const {
        return n_subframes * static_cast<int>(pilot_symbols.size());
    }
    int pilot_count() const { return pilots_per_symbol() * pilot_symbol_count(); }
    int data_count() const { return n_cells() - pilot_count(); }

    // Throws ConfigError describing the first violated invariant.
    void validate() const;

    bool operator==(const GridConfig&) const = default;
};

struct PilotPosition {
    int subcarrier;
    int symbol;
    bool operator==(const PilotPosition&) const = default;
};

// Frequency-domain contents of one frame. Cells are stored symbol-major:
// index = symbol * n_subcarriers + subcarrier.
struct ResourceGrid {
    int n_subcarriers = 0;
    int n_symbols = 0;
    std::vector<cplx> cells;
    std::vector<std::uint8_t> pilot_mask;
    std::uint64_t frame_id = 0;

    std::size_t index(int subcarrier, int symbol) const {
        return static_cast<std::size_t>(symbol) * n_subcarriers + subcarrier;
    }
    cplx& at(int subcarrier, int symbol) { return cells[index(subcarrier, symbol)]; }
    const cplx& at(int subcarrier, int symbol) const { return cells[index(subcarrier, symbol)]; }
    bool is_pilot(int subcarrier, int symbol) const {
        return pilot_mask[index(subcarrier, symbol)] != 0;
    }
    double mean_power() const;
};

// Classifier input: channel 0 in-phase, channel 1 quadrature, laid out as
// (2, pilot symbols, pilots per symbol) in row-major order.
struct PilotTensor {
    int n_pilot_symbols = 0;
    int pilots_per_symbol = 0;
    std::vector<double> values;
    int device_label = -1;
    int condition_id = -1;

    std::size_t n_res() const {
        return static_cast<std::size_t>(n_pilot_symbols) * pilots_per_symbol;
    }
    std::size_t size() const { return 2 * n_res(); }
    double& re(std::size_t r) { return values[r]; }
    double& im(std::size_t r) { return values[n_res() + r]; }
    double re(std::size_t r) const { return values[r]; }
    double im(std::size_t r) const { return values[n_res() + r]; }
};

// Pilot coordinates sorted by (symbol, subcarrier). Consecutive pilot symbols
// alternate between offset 0 and pilot_stagger.
std::vector<PilotPosition> pilot_positions(const GridConfig& config);

// Gray-mapped QPSK with unit symbol energy; first bit drives I, second Q.
std::vector<cplx> modulate_qpsk(std::span<const std::uint8_t> bits);

// Hard-decision inverse of modulate_qpsk (ties resolve to bit 0).
Bits demodulate_qpsk(std::span<const cplx> symbols);

// Fixed pseudo-random unit-modulus QPSK reference sequence shared by every device.
std::vector<cplx> make_pilot_sequence(const GridConfig& config, std::uint64_t pilot_seed);

Bits random_bits(std::size_t n, std::uint64_t seed);

// Places pilot_seq on the lattice and QPSK data on every other cell, then
// scales to unit average power. `seed` becomes the frame id.
ResourceGrid build_frame(const GridConfig& config, std::span<const cplx> pilot_seq,
                         std::span<const std::uint8_t> data_bits, std::uint64_t seed);

// Data cell values in (symbol, subcarrier) order.
std::vector<cplx> data_cells(const ResourceGrid& grid);

PilotTensor extract_pilots(const ResourceGrid& grid, const GridConfig& config, int label,
                           int condition);

}  // namespace rfcloak
