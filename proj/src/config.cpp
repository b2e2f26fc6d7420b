#include "rfcloak/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"
#include "rfcloak/serialization.hpp"

namespace rfcloak {

ChannelModel ExperimentConfig::default_channel() {
    ChannelModel c;
    c.taps = default_channel_taps();
    c.snr_db = 25.0;
    return c;
}

ExperimentConfig ExperimentConfig::from_preset(const std::string& name) {
    ExperimentConfig c;
    c.preset = name;
    if (name == "default") return c;
    if (name == "paper_scale") {
        c.dataset.samples_per_condition = 1000;
        return c;
    }
    throw ConfigError("preset: unknown preset '" + name + "' (expected default or paper_scale)");
}

void ExperimentConfig::validate() const {
    std::vector<std::string> problems;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            problems.emplace_back(e.what());
        }
    };
    auto require = [&](bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
    };

    check([&] { grid.validate(); });
    check([&] { channel.validate(); });
    require(devices.size() >= 2, "devices: at least two devices required");
    for (std::size_t i = 0; i < devices.size(); ++i) {
        check([&] { devices[i].validate(); });
        require(devices[i].device_id == static_cast<int>(i),
                "devices: device_id of entry " + std::to_string(i) + " must equal its position");
    }

    require(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0, "dataset.test_fraction must lie in (0,1)");
    require(dataset.n_conditions >= 1, "dataset.n_conditions must be >= 1");
    require(dataset.samples_per_condition >= 1, "dataset.samples_per_condition must be >= 1");
    if (dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0 && dataset.n_conditions >= 1 &&
        dataset.samples_per_condition >= 1) {
        const double per_class = double(dataset.n_conditions) * double(dataset.samples_per_condition);
        const double n_test = std::round(dataset.test_fraction * per_class);
        require(n_test >= 1.0 && n_test < per_class,
                "dataset: split leaves an empty train or test set for some class");
    }

    check([&] { architecture.validate(); });
    require(architecture.n_classes == static_cast<int>(devices.size()),
            "architecture.n_classes must equal the number of devices");
    bool grid_ok = true;
    try {
        grid.validate();
    } catch (const Error&) {
        grid_ok = false;
    }
    if (grid_ok) {
        require(architecture.in_channels == 2 && architecture.in_h == grid.pilot_symbol_count() &&
                    architecture.in_w == grid.pilots_per_symbol(),
                "architecture.input must be [2, pilot symbols, pilots per symbol] = [2, " +
                    std::to_string(grid.pilot_symbol_count()) + ", " + std::to_string(grid.pilots_per_symbol()) +
                    "]");
        require(link.blocks_per_frame >= 1 && link.blocks_per_frame <= grid.data_count(),
                "link.blocks_per_frame must lie in [1, data cells per frame]");
    }

    require(train.lr > 0.0 && std::isfinite(train.lr), "train.lr must be positive and finite");
    require(train.epochs >= 0, "train.epochs must be >= 0");
    require(train.batch_size >= 1, "train.batch_size must be >= 1");

    require(link.max_retx >= 1, "link.max_retx must be >= 1");
    require(link.frames_per_cell >= 1, "link.frames_per_cell must be >= 1");
    require(link.corr.rho_f > 0.0 && link.corr.rho_f < 1.0, "link.rho_f must lie in (0,1)");
    require(link.corr.rho_t > 0.0 && link.corr.rho_t < 1.0, "link.rho_t must lie in (0,1)");

    check([&] { attack.validate(); });
    require(attack.target_label < static_cast<int>(devices.size()), "attack.target_label out of range");
    if (attack.method != AttackMethod::random) {
        require(validate_budget(attack.epsilon, attack.ratio, attack.power_cap).ok,
                "attack: the noise power must be constrained: ratio * epsilon^2 exceeds power_cap");
    }

    require(!sweep.ratios.empty() && !sweep.budgets.empty(), "sweep: ratios and budgets must be non-empty");
    for (double r : sweep.ratios) require(r > 0.0 && r <= 1.0, "sweep.ratios must lie in (0,1]");
    for (double b : sweep.budgets) require(b >= 0.0 && std::isfinite(b), "sweep.budgets must be finite and >= 0");
    for (double r : sweep.ratios) {
        for (double b : sweep.budgets) {
            if (!validate_budget(b, r, attack.power_cap).ok) {
                std::ostringstream os;
                os << "sweep: cell (ratio " << r << ", budget " << b << ") exceeds power_cap " << attack.power_cap;
                problems.push_back(os.str());
            }
        }
    }
    require(!sweep.degradation_budgets.empty() &&
                std::is_sorted(sweep.degradation_budgets.begin(), sweep.degradation_budgets.end()),
            "sweep.degradation_budgets must be non-empty and ascending");
    for (double b : sweep.degradation_budgets) {
        require(b >= 0.0 && std::isfinite(b), "sweep.degradation_budgets must be finite and >= 0");
    }
    require(sweep.ablation_seeds >= 5, "sweep.ablation_seeds must be >= 5");

    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

Scenario ExperimentConfig::scenario() const {
    return Scenario(grid, devices, channel, link, master_seed, pilot_seed);
}

nn::TrainHyper ExperimentConfig::train_hyper(std::uint64_t seed) const {
    nn::TrainHyper h;
    h.lr = train.lr;
    h.epochs = train.epochs;
    h.batch_size = train.batch_size;
    h.seed = seed;
    return h;
}

StageSeeds StageSeeds::derive(std::uint64_t master_seed) {
    StageSeeds s;
    s.train = derive_seed(master_seed, "train");
    s.substitute = derive_seed(master_seed, "substitute");
    s.attack = derive_seed(master_seed, "attack");
    s.ablation = derive_seed(master_seed, "ablation");
    return s;
}

namespace {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const char* where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
}

}  // namespace

void to_json(nlohmann::json& j, const SweepSpec& s) {
    j = nlohmann::json{{"ratios", s.ratios},
                       {"budgets", s.budgets},
                       {"degradation_budgets", s.degradation_budgets},
                       {"ablation_seeds", s.ablation_seeds},
                       {"transfer", s.transfer}};
}

void from_json(const nlohmann::json& j, SweepSpec& s) {
    require_known_keys(j, {"ratios", "budgets", "degradation_budgets", "ablation_seeds", "transfer"}, "sweep");
    read(j, "ratios", s.ratios, "sweep");
    read(j, "budgets", s.budgets, "sweep");
    read(j, "degradation_budgets", s.degradation_budgets, "sweep");
    read(j, "ablation_seeds", s.ablation_seeds, "sweep");
    read(j, "transfer", s.transfer, "sweep");
}

void to_json(nlohmann::json& j, const TrainSettings& t) {
    j = nlohmann::json{{"lr", t.lr}, {"epochs", t.epochs}, {"batch_size", t.batch_size}};
}

void from_json(const nlohmann::json& j, TrainSettings& t) {
    require_known_keys(j, {"lr", "epochs", "batch_size"}, "train");
    read(j, "lr", t.lr, "train");
    read(j, "epochs", t.epochs, "train");
    read(j, "batch_size", t.batch_size, "train");
}

nlohmann::json to_json(const ExperimentConfig& c) {
    return nlohmann::json{{"preset", c.preset},
                          {"master_seed", c.master_seed},
                          {"pilot_seed", c.pilot_seed},
                          {"output_dir", c.output_dir},
                          {"grid", c.grid},
                          {"devices", c.devices},
                          {"channel", c.channel},
                          {"link", c.link},
                          {"dataset", c.dataset},
                          {"architecture", c.architecture},
                          {"train", c.train},
                          {"attack", c.attack},
                          {"sweep", c.sweep}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    require_known_keys(j,
                       {"preset", "master_seed", "pilot_seed", "output_dir", "grid", "devices", "channel", "link",
                        "dataset", "architecture", "train", "attack", "sweep"},
                       "config");
    std::string preset = "default";
    read(j, "preset", preset, "config");
    ExperimentConfig c = ExperimentConfig::from_preset(preset);
    try {
        read(j, "master_seed", c.master_seed, "config");
        read(j, "pilot_seed", c.pilot_seed, "config");
        read(j, "output_dir", c.output_dir, "config");
        if (j.contains("grid")) from_json(j.at("grid"), c.grid);
        if (j.contains("devices")) {
            if (!j.at("devices").is_array()) throw ConfigError("devices: expected an array");
            c.devices.clear();
            for (const auto& d : j.at("devices")) {
                DeviceProfile p;
                from_json(d, p);
                c.devices.push_back(p);
            }
        }
        if (j.contains("channel")) from_json(j.at("channel"), c.channel);
        if (j.contains("link")) from_json(j.at("link"), c.link);
        if (j.contains("dataset")) from_json(j.at("dataset"), c.dataset);
        if (j.contains("architecture")) {
            nn::from_json(j.at("architecture"), c.architecture);
        } else {
            GridConfig g = c.grid;
            bool grid_ok = true;
            try {
                g.validate();
            } catch (const Error&) {
                grid_ok = false;
            }
            if (grid_ok) {
                c.architecture = nn::Architecture::fingerprint_cnn(static_cast<int>(c.devices.size()),
                                                                  g.pilot_symbol_count(), g.pilots_per_symbol());
            }
        }
        if (j.contains("train")) from_json(j.at("train"), c.train);
        if (j.contains("attack")) from_json(j.at("attack"), c.attack);
        if (j.contains("sweep")) from_json(j.at("sweep"), c.sweep);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace rfcloak
