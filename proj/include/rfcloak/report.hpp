#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfcloak/eval.hpp"
#include "rfcloak/nn/model.hpp"
#include "rfcloak/nn/train.hpp"

namespace rfcloak {

// Shortest round-trip decimal form; "nan" / "inf" for non-finite values.
std::string format_number(double v);

std::string heatmap_csv(const SweepGrid& grid);
std::string degradation_csv(const DegradationCurve& curve);
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string transfer_csv(const std::vector<TransferRow>& rows);
std::string samples_csv(const EvalReport& report);
// One row per dataset sample: provenance columns then penultimate activations.
std::string features_csv(const nn::ClassifierModel& model, const nn::Dataset& data);

// Dense pilot tensor dump: sample_id, label, then the 2 x symbols x pilots values.
std::string tensors_csv(const std::vector<std::uint64_t>& sample_ids, const std::vector<int>& labels,
                        const std::vector<PilotTensor>& tensors);

nlohmann::json summary_json(const EvalReport& report);
nlohmann::json link_json(const LinkStats& link);
nlohmann::json sweep_json(const SweepGrid& grid);
nlohmann::json degradation_json(const DegradationCurve& curve);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);
nlohmann::json transfer_json(const std::vector<TransferRow>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace rfcloak
