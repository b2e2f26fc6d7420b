#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfcloak/attack.hpp"
#include "rfcloak/channel.hpp"
#include "rfcloak/device.hpp"
#include "rfcloak/grid.hpp"
#include "rfcloak/nn/model.hpp"
#include "rfcloak/nn/train.hpp"
#include "rfcloak/scenario.hpp"

namespace rfcloak {

struct SweepSpec {
    std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> budgets{0.005, 0.01, 0.02, 0.03, 0.04};
    std::vector<double> degradation_budgets{0.0,  0.01, 0.02, 0.03, 0.04, 0.06, 0.08, 0.10, 0.12,
                                            0.14, 0.16, 0.18, 0.20, 0.22, 0.24, 0.26, 0.28};
    int ablation_seeds = 5;
    bool transfer = true;
};

struct TrainSettings {
    double lr = 1e-3;
    int epochs = 40;
    int batch_size = 32;
};

struct ExperimentConfig {
    std::string preset = "default";
    std::uint64_t master_seed = 1;
    std::uint64_t pilot_seed = 7;
    std::string output_dir = "out";
    GridConfig grid;
    std::vector<DeviceProfile> devices = default_device_profiles();
    ChannelModel channel = default_channel();
    LinkConfig link;
    DatasetSpec dataset;
    nn::Architecture architecture = nn::Architecture::fingerprint_cnn(5);
    TrainSettings train;
    PerturbationConfig attack;
    SweepSpec sweep;

    static ChannelModel default_channel();
    static ExperimentConfig from_preset(const std::string& name);

    // Collects every violated constraint and throws one ConfigError listing them.
    void validate() const;

    Scenario scenario() const;
    nn::TrainHyper train_hyper(std::uint64_t seed) const;
};

// Per-stage seeds, all derived from the master seed by label.
struct StageSeeds {
    std::uint64_t train = 0;
    std::uint64_t substitute = 0;
    std::uint64_t attack = 0;
    std::uint64_t ablation = 0;

    static StageSeeds derive(std::uint64_t master_seed);
};

void to_json(nlohmann::json& j, const SweepSpec& s);
void from_json(const nlohmann::json& j, SweepSpec& s);
void to_json(nlohmann::json& j, const TrainSettings& t);
void from_json(const nlohmann::json& j, TrainSettings& t);

// Keys absent from the document keep the values of the named preset.
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace rfcloak
