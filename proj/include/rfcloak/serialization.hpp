#pragma once

// JSON mappings for the configuration value types. Unknown keys are
// rejected so that typos in experiment files surface as config errors.

#include <json.hpp>

#include "rfcloak/attack.hpp"
#include "rfcloak/channel.hpp"
#include "rfcloak/device.hpp"
#include "rfcloak/grid.hpp"
#include "rfcloak/nn/model.hpp"
#include "rfcloak/scenario.hpp"

namespace rfcloak {

using json = nlohmann::json;

void to_json(json& j, const GridConfig& c);
void from_json(const json& j, GridConfig& c);
void to_json(json& j, const DeviceProfile& p);
void from_json(const json& j, DeviceProfile& p);
void to_json(json& j, const ChannelModel& c);
void from_json(const json& j, ChannelModel& c);
void to_json(json& j, const LinkConfig& c);
void from_json(const json& j, LinkConfig& c);
void to_json(json& j, const DatasetSpec& s);
void from_json(const json& j, DatasetSpec& s);
void to_json(json& j, const PerturbationConfig& c);
void from_json(const json& j, PerturbationConfig& c);

// Throws ConfigError naming `where` if `j` holds a key outside `allowed`.
void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& where);

// Numbers, or the strings "inf"/"-inf" for infinities.
double number_or_inf(const json& j);
json inf_or_number(double v);

}  // namespace rfcloak

namespace rfcloak::nn {

void to_json(nlohmann::json& j, const ConvSpec& c);
void from_json(const nlohmann::json& j, ConvSpec& c);
void to_json(nlohmann::json& j, const Architecture& a);
void from_json(const nlohmann::json& j, Architecture& a);
void to_json(nlohmann::json& j, const TrainMeta& m);
void from_json(const nlohmann::json& j, TrainMeta& m);

}  // namespace rfcloak::nn
