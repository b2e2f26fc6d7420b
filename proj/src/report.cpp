#include "rfcloak/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "rfcloak/attack.hpp"
#include "rfcloak/error.hpp"
#include "rfcloak/serialization.hpp"

namespace rfcloak {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

nlohmann::json number(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

void row(std::string& out, std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += ',';
        out += c;
        first = false;
    }
    out += '\n';
}

}  // namespace

std::string heatmap_csv(const SweepGrid& grid) {
    std::string out = "ratio,budget,psr,bler\n";
    for (std::size_t a = 0; a < grid.ratios.size(); ++a) {
        for (std::size_t b = 0; b < grid.budgets.size(); ++b) {
            row(out, {format_number(grid.ratios[a]), format_number(grid.budgets[b]), format_number(grid.psr[a][b]),
                      format_number(grid.bler[a][b])});
        }
    }
    return out;
}

std::string degradation_csv(const DegradationCurve& curve) {
    std::string out = "budget,bler,plr,throughput\n";
    for (const auto& p : curve.points) {
        row(out, {format_number(p.budget), format_number(p.link.bler()), format_number(p.link.plr()),
                  format_number(p.link.throughput())});
    }
    return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "budget,power_controlled_r0.2,power_controlled_r1.0,random_mean,random_std";
    const std::size_t seeds = rows.empty() ? 0 : rows.front().random_psr.size();
    for (std::size_t s = 0; s < seeds; ++s) out += ",random_seed_" + std::to_string(s);
    out += '\n';
    for (const auto& r : rows) {
        out += format_number(r.budget) + ',' + format_number(r.sparse_psr) + ',' + format_number(r.full_psr) + ',' +
               format_number(r.random_mean) + ',' + format_number(r.random_std);
        for (double v : r.random_psr) out += ',' + format_number(v);
        out += '\n';
    }
    return out;
}

std::string transfer_csv(const std::vector<TransferRow>& rows) {
    std::string out = "budget,ratio,transfer_psr,whitebox_psr,target_clean_error\n";
    for (const auto& r : rows) {
        row(out, {format_number(r.budget), format_number(r.ratio), format_number(r.transfer_psr),
                  format_number(r.whitebox_psr), format_number(r.target_clean_error)});
    }
    return out;
}

std::string samples_csv(const EvalReport& report) {
    std::string out = "sample_id,label,clean_prediction,perturbed_prediction,sigma2,perturbed_res\n";
    for (const auto& r : report.records) {
        row(out, {std::to_string(r.sample_id), std::to_string(r.label), std::to_string(r.clean_prediction),
                  std::to_string(r.perturbed_prediction), format_number(r.sigma2), std::to_string(r.perturbed_res)});
    }
    return out;
}

std::string features_csv(const nn::ClassifierModel& model, const nn::Dataset& data) {
    std::string out = "sample_id,label,condition,split";
    const std::size_t width = model.arch.hidden.empty() ? 0 : static_cast<std::size_t>(model.arch.hidden.back());
    for (std::size_t f = 0; f < width; ++f) out += ",f" + std::to_string(f);
    out += '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto features = nn::penultimate_features(model, data.sample(i));
        out += std::to_string(data.sample_ids[i]) + ',' + std::to_string(data.labels[i]) + ',' +
               std::to_string(data.condition_ids[i]) + ',' +
               (data.split[i] == nn::Split::test ? "test" : "train");
        for (double v : features) out += ',' + format_number(v);
        out += '\n';
    }
    return out;
}

std::string tensors_csv(const std::vector<std::uint64_t>& sample_ids, const std::vector<int>& labels,
                        const std::vector<PilotTensor>& tensors) {
    std::string out = "sample_id,label";
    const std::size_t width = tensors.empty() ? 0 : tensors.front().size();
    for (std::size_t v = 0; v < width; ++v) out += ",v" + std::to_string(v);
    out += '\n';
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        out += std::to_string(sample_ids[i]) + ',' + std::to_string(labels[i]);
        for (double v : tensors[i].values) out += ',' + format_number(v);
        out += '\n';
    }
    return out;
}

nlohmann::json link_json(const LinkStats& link) {
    return {{"frames", link.n_frames},
            {"blocks", link.n_blocks},
            {"errored_blocks", link.errored_blocks},
            {"lost_packets", link.lost_packets},
            {"bit_errors", link.bit_errors},
            {"bler", link.bler()},
            {"plr", link.plr()},
            {"throughput_bits_per_frame", link.throughput()},
            {"raw_bits_per_frame", link.raw_bits_per_frame}};
}

nlohmann::json summary_json(const EvalReport& report) {
    double sigma2 = 0.0;
    for (const auto& r : report.records) sigma2 += r.sigma2;
    nlohmann::json j{{"attack", report.attack},
                     {"samples", report.n_samples},
                     {"psr", number(report.psr)},
                     {"psr_clean_correct", number(report.psr_clean_correct)},
                     {"clean_accuracy", number(report.clean_accuracy)},
                     {"confusion", report.confusion},
                     {"link", link_json(report.link)}};
    if (!report.records.empty()) j["mean_sigma2"] = sigma2 / double(report.records.size());
    return j;
}

nlohmann::json sweep_json(const SweepGrid& grid) {
    nlohmann::json psr = nlohmann::json::array(), bler = nlohmann::json::array();
    for (std::size_t a = 0; a < grid.ratios.size(); ++a) {
        nlohmann::json pr = nlohmann::json::array(), br = nlohmann::json::array();
        for (std::size_t b = 0; b < grid.budgets.size(); ++b) {
            pr.push_back(number(grid.psr[a][b]));
            br.push_back(number(grid.bler[a][b]));
        }
        psr.push_back(pr);
        bler.push_back(br);
    }
    return {{"ratios", grid.ratios},
            {"budgets", grid.budgets},
            {"psr", psr},
            {"bler", bler},
            {"diagnostics", grid.diagnostics}};
}

nlohmann::json degradation_json(const DegradationCurve& curve) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : curve.points) {
        points.push_back({{"budget", p.budget}, {"link", link_json(p.link)}});
    }
    return {{"points", points},
            {"threshold", curve.threshold ? nlohmann::json(*curve.threshold) : nlohmann::json(nullptr)}};
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"budget", r.budget},
                       {"power_controlled_r0.2", r.sparse_psr},
                       {"power_controlled_r1.0", r.full_psr},
                       {"random_psr", r.random_psr},
                       {"random_mean", r.random_mean},
                       {"random_std", r.random_std}});
    }
    return out;
}

nlohmann::json transfer_json(const std::vector<TransferRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"budget", r.budget},
                       {"ratio", r.ratio},
                       {"transfer_psr", r.transfer_psr},
                       {"whitebox_psr", r.whitebox_psr},
                       {"target_clean_error", r.target_clean_error}});
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace rfcloak
