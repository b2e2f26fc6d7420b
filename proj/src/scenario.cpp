#include "rfcloak/scenario.hpp"

#include <atomic>
#include <limits>
#include <mutex>
#include <thread>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"

namespace rfcloak {

std::vector<cplx> default_channel_taps() {
    return {cplx{0.90, 0.0}, cplx{0.30, 0.25}, cplx{-0.10, 0.12}};
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

Scenario::Scenario(GridConfig grid, std::vector<DeviceProfile> devices, ChannelModel channel,
                   LinkConfig link, std::uint64_t master_seed, std::uint64_t pilot_seed)
    : grid_(std::move(grid)),
      devices_(std::move(devices)),
      channel_(std::move(channel)),
      link_(link),
      master_seed_(master_seed) {
    grid_.validate();
    channel_.validate();
    if (devices_.size() < 2) throw ConfigError("scenario: at least two devices required");
    for (std::size_t i = 0; i < devices_.size(); ++i) {
        devices_[i].validate();
        if (devices_[i].device_id != static_cast<int>(i)) {
            throw ConfigError("scenario: device ids must be 0..n-1 in table order");
        }
    }
    channel_.seed = derive_seed(master_seed_, "channel", {channel_.seed});
    positions_ = pilot_positions(grid_);
    pilots_ = make_pilot_sequence(grid_, pilot_seed);
    const double snr_linear = channel_.noiseless() ? std::numeric_limits<double>::infinity()
                                                   : 1.0 / channel_.noise_var();
    estimator_ = std::make_shared<MmseEstimator>(grid_, snr_linear, link_.corr);
}

ConditionContext Scenario::condition(int condition_id) const {
    return {condition_id, derive_seed(master_seed_, "drift")};
}

const DeviceProfile& Scenario::device(int label) const {
    if (label < 0 || label >= n_devices()) throw ConfigError("scenario: unknown device label");
    return devices_[static_cast<std::size_t>(label)];
}

Scenario::Frame Scenario::realize(int label, int condition_id, std::uint64_t sample_id) const {
    Frame f;
    f.ctx = condition(condition_id);
    f.bits = random_bits(2 * static_cast<std::size_t>(grid_.data_count()),
                         derive_seed(master_seed_, "data", {sample_id}));
    f.tx = build_frame(grid_, pilots_, f.bits, sample_id);
    f.impaired = impair(f.tx, device(label), f.ctx);
    f.prop = transmit(f.impaired, sample_id);
    return f;
}

Propagation Scenario::transmit(const ResourceGrid& impaired, std::uint64_t sample_id,
                               std::uint64_t attempt) const {
    return propagate(impaired, channel_, sample_id, attempt);
}

PilotTensor Scenario::observe(const ResourceGrid& received, int label, int condition_id) const {
    return extract_pilots(received, grid_, label, condition_id);
}

PilotTensor Scenario::predicted_observation(const Frame& frame, int label) const {
    ResourceGrid expected = frame.prop.received;
    for (std::size_t i = 0; i < expected.cells.size(); ++i) expected.cells[i] -= frame.prop.noise[i];
    return observe(expected, label, frame.ctx.condition_id);
}

Equalized Scenario::receive(const ResourceGrid& received) const {
    return rfcloak::receive(received, pilots_, positions_, *estimator_);
}

std::uint64_t Scenario::sample_id(int label, int condition_id, int index, const DatasetSpec& spec) {
    return (static_cast<std::uint64_t>(label) * static_cast<std::uint64_t>(spec.n_conditions) +
            static_cast<std::uint64_t>(condition_id)) *
               static_cast<std::uint64_t>(spec.samples_per_condition) +
           static_cast<std::uint64_t>(index);
}

nn::Dataset Scenario::generate_dataset(const DatasetSpec& spec, int jobs) const {
    if (spec.n_conditions < 1 || spec.samples_per_condition < 1) {
        throw ConfigError("dataset: conditions and samples per condition must be positive");
    }
    nn::Dataset ds;
    ds.n_pilot_symbols = grid_.pilot_symbol_count();
    ds.pilots_per_symbol = grid_.pilots_per_symbol();
    ds.n_classes = n_devices();
    ds.n_conditions = spec.n_conditions;

    const std::size_t total = static_cast<std::size_t>(n_devices()) *
                              static_cast<std::size_t>(spec.n_conditions) *
                              static_cast<std::size_t>(spec.samples_per_condition);
    std::vector<PilotTensor> tensors(total);
    parallel_for(total, jobs, [&](std::size_t i) {
        const int index = static_cast<int>(i % static_cast<std::size_t>(spec.samples_per_condition));
        const std::size_t group = i / static_cast<std::size_t>(spec.samples_per_condition);
        const int cond = static_cast<int>(group % static_cast<std::size_t>(spec.n_conditions));
        const int label = static_cast<int>(group / static_cast<std::size_t>(spec.n_conditions));
        const auto frame = realize(label, cond, sample_id(label, cond, index, spec));
        tensors[i] = observe(frame.prop.received, label, cond);
    });
    for (std::size_t i = 0; i < total; ++i) ds.add(tensors[i], i);
    ds.assign_split(spec.test_fraction, derive_seed(master_seed_, "split"));
    return ds;
}

}  // namespace rfcloak
