#include "rfcloak/serialization.hpp"

#include <cmath>
#include <limits>

#include "rfcloak/error.hpp"

namespace rfcloak {

void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

double number_or_inf(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError("expected a number or \"inf\", got " + j.dump());
}

json inf_or_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("key '") + key + "': " + e.what());
        }
    }
}

json complex_to_json(cplx c) { return json::array({c.real(), c.imag()}); }

cplx complex_from_json(const json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
    throw ConfigError("expected a complex number as [re, im], got " + j.dump());
}

}  // namespace

void to_json(json& j, const GridConfig& c) {
    j = json{{"n_subcarriers", c.n_subcarriers},
             {"n_subframes", c.n_subframes},
             {"pilot_symbols", c.pilot_symbols},
             {"pilot_spacing", c.pilot_spacing},
             {"pilot_stagger", c.pilot_stagger}};
}

void from_json(const json& j, GridConfig& c) {
    require_known_keys(j, {"n_subcarriers", "n_subframes", "pilot_symbols", "pilot_spacing", "pilot_stagger"},
                       "grid");
    read(j, "n_subcarriers", c.n_subcarriers);
    read(j, "n_subframes", c.n_subframes);
    read(j, "pilot_symbols", c.pilot_symbols);
    read(j, "pilot_spacing", c.pilot_spacing);
    read(j, "pilot_stagger", c.pilot_stagger);
}

void to_json(json& j, const DeviceProfile& p) {
    j = json{{"device_id", p.device_id}, {"iq_gain", p.iq_gain},   {"iq_phase", p.iq_phase},
             {"pa_a1", p.pa_a1},         {"pa_a3", p.pa_a3},       {"pa_a5", p.pa_a5},
             {"cfo", p.cfo},             {"dc_offset", complex_to_json(p.dc_offset)},
             {"jitter_std", p.jitter_std}};
}

void from_json(const json& j, DeviceProfile& p) {
    require_known_keys(j, {"device_id", "iq_gain", "iq_phase", "pa_a1", "pa_a3", "pa_a5", "cfo", "dc_offset",
                           "jitter_std"},
                       "device");
    if (!j.contains("device_id")) throw ConfigError("device: device_id is required");
    read(j, "device_id", p.device_id);
    read(j, "iq_gain", p.iq_gain);
    read(j, "iq_phase", p.iq_phase);
    read(j, "pa_a1", p.pa_a1);
    read(j, "pa_a3", p.pa_a3);
    read(j, "pa_a5", p.pa_a5);
    read(j, "cfo", p.cfo);
    if (j.contains("dc_offset")) p.dc_offset = complex_from_json(j.at("dc_offset"));
    read(j, "jitter_std", p.jitter_std);
}

void to_json(json& j, const ChannelModel& c) {
    json taps = json::array();
    for (const auto& t : c.taps) taps.push_back(complex_to_json(t));
    j = json{{"taps", taps},
             {"snr_db", inf_or_number(c.snr_db)},
             {"block_fading", c.block_fading},
             {"seed", c.seed}};
}

void from_json(const json& j, ChannelModel& c) {
    require_known_keys(j, {"taps", "snr_db", "block_fading", "seed"}, "channel");
    if (j.contains("taps")) {
        c.taps.clear();
        for (const auto& t : j.at("taps")) c.taps.push_back(complex_from_json(t));
    }
    if (j.contains("snr_db")) c.snr_db = number_or_inf(j.at("snr_db"));
    read(j, "block_fading", c.block_fading);
    read(j, "seed", c.seed);
}

void to_json(json& j, const LinkConfig& c) {
    j = json{{"blocks_per_frame", c.blocks_per_frame},
             {"max_retx", c.max_retx},
             {"frames_per_cell", c.frames_per_cell},
             {"rho_f", c.corr.rho_f},
             {"rho_t", c.corr.rho_t}};
}

void from_json(const json& j, LinkConfig& c) {
    require_known_keys(j, {"blocks_per_frame", "max_retx", "frames_per_cell", "rho_f", "rho_t"}, "link");
    read(j, "blocks_per_frame", c.blocks_per_frame);
    read(j, "max_retx", c.max_retx);
    read(j, "frames_per_cell", c.frames_per_cell);
    read(j, "rho_f", c.corr.rho_f);
    read(j, "rho_t", c.corr.rho_t);
}

void to_json(json& j, const DatasetSpec& s) {
    j = json{{"n_conditions", s.n_conditions},
             {"samples_per_condition", s.samples_per_condition},
             {"test_fraction", s.test_fraction}};
}

void from_json(const json& j, DatasetSpec& s) {
    require_known_keys(j, {"n_conditions", "samples_per_condition", "test_fraction"}, "dataset");
    read(j, "n_conditions", s.n_conditions);
    read(j, "samples_per_condition", s.samples_per_condition);
    read(j, "test_fraction", s.test_fraction);
}

void to_json(json& j, const PerturbationConfig& c) {
    j = json{{"epsilon", c.epsilon},
             {"ratio", c.ratio},
             {"power_cap", inf_or_number(c.power_cap)},
             {"mode", to_string(c.mode)},
             {"target_label", c.target_label},
             {"injection", to_string(c.injection)},
             {"method", to_string(c.method)},
             {"seed", c.seed}};
}

void from_json(const json& j, PerturbationConfig& c) {
    require_known_keys(j, {"epsilon", "ratio", "power_cap", "mode", "target_label", "injection", "method", "seed"},
                       "attack");
    read(j, "epsilon", c.epsilon);
    read(j, "ratio", c.ratio);
    if (j.contains("power_cap")) c.power_cap = number_or_inf(j.at("power_cap"));
    if (j.contains("mode")) c.mode = parse_attack_mode(j.at("mode").get<std::string>());
    read(j, "target_label", c.target_label);
    if (j.contains("injection")) c.injection = parse_injection(j.at("injection").get<std::string>());
    if (j.contains("method")) c.method = parse_attack_method(j.at("method").get<std::string>());
    read(j, "seed", c.seed);
}

}  // namespace rfcloak

namespace rfcloak::nn {

void to_json(nlohmann::json& j, const ConvSpec& c) {
    j = nlohmann::json{{"out_channels", c.out_channels},
                       {"kernel", {c.kernel_h, c.kernel_w}},
                       {"pool", {c.pool_h, c.pool_w}},
                       {"padding", c.padding == Padding::same ? "same" : "valid"}};
}

void from_json(const nlohmann::json& j, ConvSpec& c) {
    require_known_keys(j, {"out_channels", "kernel", "pool", "padding"}, "architecture.convs[]");
    c.out_channels = j.at("out_channels").get<int>();
    const auto k = j.at("kernel").get<std::vector<int>>();
    const auto p = j.value("pool", std::vector<int>{1, 1});
    if (k.size() != 2 || p.size() != 2) throw ConfigError("architecture: kernel and pool must be [h, w]");
    c.kernel_h = k[0];
    c.kernel_w = k[1];
    c.pool_h = p[0];
    c.pool_w = p[1];
    const auto pad = j.value("padding", std::string("same"));
    if (pad != "same" && pad != "valid") throw ConfigError("architecture: padding must be same or valid");
    c.padding = pad == "same" ? Padding::same : Padding::valid;
}

void to_json(nlohmann::json& j, const Architecture& a) {
    j = nlohmann::json{{"input", {a.in_channels, a.in_h, a.in_w}},
                       {"convs", a.convs},
                       {"hidden", a.hidden},
                       {"n_classes", a.n_classes}};
}

void from_json(const nlohmann::json& j, Architecture& a) {
    require_known_keys(j, {"input", "convs", "hidden", "n_classes"}, "architecture");
    if (j.contains("input")) {
        const auto in = j.at("input").get<std::vector<int>>();
        if (in.size() != 3) throw ConfigError("architecture: input must be [channels, h, w]");
        a.in_channels = in[0];
        a.in_h = in[1];
        a.in_w = in[2];
    }
    if (j.contains("convs")) a.convs = j.at("convs").get<std::vector<ConvSpec>>();
    if (j.contains("hidden")) a.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("n_classes")) a.n_classes = j.at("n_classes").get<int>();
}

void to_json(nlohmann::json& j, const TrainMeta& m) {
    j = nlohmann::json{{"epochs", m.epochs},
                       {"lr", m.lr},
                       {"batch_size", m.batch_size},
                       {"seed", m.seed},
                       {"final_train_accuracy", m.final_train_accuracy},
                       {"final_test_accuracy", m.final_test_accuracy},
                       {"loss_history", m.loss_history}};
}

void from_json(const nlohmann::json& j, TrainMeta& m) {
    m.epochs = j.at("epochs").get<int>();
    m.lr = j.at("lr").get<double>();
    m.batch_size = j.at("batch_size").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.final_train_accuracy = j.at("final_train_accuracy").get<double>();
    m.final_test_accuracy = j.at("final_test_accuracy").get<double>();
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
}

}  // namespace rfcloak::nn
