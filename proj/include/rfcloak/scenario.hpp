#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rfcloak/channel.hpp"
#include "rfcloak/device.hpp"
#include "rfcloak/grid.hpp"
#include "rfcloak/nn/train.hpp"

namespace rfcloak {

struct LinkConfig {
    int blocks_per_frame = 10;
    int max_retx = 4;
    int frames_per_cell = 200;
    CorrelationParams corr{};
};

struct DatasetSpec {
    int n_conditions = 10;
    int samples_per_condition = 200;
    double test_fraction = 0.2;
};

// Everything needed to synthesize one observation of one device: the frame
// lattice, the shared pilot sequence, the device table, the channel and the
// receiver. All randomness is derived from master_seed and the sample id.
class Scenario {
public:
    Scenario(GridConfig grid, std::vector<DeviceProfile> devices, ChannelModel channel,
             LinkConfig link, std::uint64_t master_seed, std::uint64_t pilot_seed);

    struct Frame {
        Bits bits;
        ResourceGrid tx;
        ResourceGrid impaired;
        Propagation prop;
        ConditionContext ctx;
    };

    const GridConfig& grid() const { return grid_; }
    const std::vector<DeviceProfile>& devices() const { return devices_; }
    const ChannelModel& channel() const { return channel_; }
    const LinkConfig& link() const { return link_; }
    const std::vector<PilotPosition>& positions() const { return positions_; }
    const std::vector<cplx>& pilots() const { return pilots_; }
    const MmseEstimator& estimator() const { return *estimator_; }
    std::uint64_t master_seed() const { return master_seed_; }
    int n_devices() const { return static_cast<int>(devices_.size()); }

    ConditionContext condition(int condition_id) const;
    const DeviceProfile& device(int label) const;

    // Transmit frame, impaired frame and channel output for one sample.
    Frame realize(int label, int condition_id, std::uint64_t sample_id) const;

    // Channel output for an arbitrary transmit-side grid, reusing the sample's
    // channel and noise draw (attempt > 0 draws fresh noise).
    Propagation transmit(const ResourceGrid& impaired, std::uint64_t sample_id,
                         std::uint64_t attempt = 0) const;

    PilotTensor observe(const ResourceGrid& received, int label, int condition_id) const;

    // Pilot tensor of a noiseless channel output (the transmitter's own
    // prediction of what a receiver observes).
    PilotTensor predicted_observation(const Frame& frame, int label) const;

    Equalized receive(const ResourceGrid& received) const;

    // Pilot tensors for every (device, condition, index), split stratified by class.
    nn::Dataset generate_dataset(const DatasetSpec& spec, int jobs = 1) const;

    static std::uint64_t sample_id(int label, int condition_id, int index, const DatasetSpec& spec);

private:
    GridConfig grid_;
    std::vector<DeviceProfile> devices_;
    ChannelModel channel_;
    LinkConfig link_;
    std::uint64_t master_seed_;
    std::vector<PilotPosition> positions_;
    std::vector<cplx> pilots_;
    std::shared_ptr<const MmseEstimator> estimator_;
};

// Default multipath profile of the simulated link (three taps, mildly frequency selective).
std::vector<cplx> default_channel_taps();

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// to per-index slots so the outcome is independent of scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace rfcloak
