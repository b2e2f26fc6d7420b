#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfcloak/attack.hpp"
#include "rfcloak/channel.hpp"
#include "rfcloak/nn/model.hpp"
#include "rfcloak/nn/train.hpp"
#include "rfcloak/scenario.hpp"

namespace rfcloak {

struct SampleRecord {
    std::uint64_t sample_id = 0;
    int label = 0;
    int clean_prediction = 0;
    int perturbed_prediction = 0;
    double sigma2 = 0.0;
    std::size_t perturbed_res = 0;
};

struct EvalReport {
    PerturbationConfig attack;
    std::size_t n_samples = 0;
    // Fraction of all evaluated samples whose perturbed prediction differs from
    // the true device.
    double psr = 0.0;
    // Same, restricted to samples the clean observation classified correctly.
    double psr_clean_correct = 0.0;
    double clean_accuracy = 0.0;
    std::vector<std::vector<std::uint64_t>> confusion;  // [true][perturbed prediction]
    LinkStats link;
    std::vector<SampleRecord> records;
};

struct SweepGrid {
    std::vector<double> ratios;
    std::vector<double> budgets;
    std::vector<std::vector<double>> psr;   // [ratio][budget], NaN for failed cells
    std::vector<std::vector<double>> bler;  // [ratio][budget]
    std::vector<std::string> diagnostics;
};

struct DegradationPoint {
    double budget = 0.0;
    LinkStats link;
};

struct DegradationCurve {
    std::vector<DegradationPoint> points;
    std::optional<double> threshold;  // smallest budget with BLER > 0
};

struct AblationRow {
    double budget = 0.0;
    double sparse_psr = 0.0;  // power_controlled at ratio 0.2
    double full_psr = 0.0;    // power_controlled at ratio 1.0
    std::vector<double> random_psr;
    double random_mean = 0.0;
    double random_std = 0.0;  // sample standard deviation across seeds
};

struct TransferRow {
    double budget = 0.0;
    double ratio = 1.0;
    double transfer_psr = 0.0;
    double whitebox_psr = 0.0;
    double target_clean_error = 0.0;
};

// Per-sample input gradients of a generator model, computed at the observation
// the attacker perturbs: the received pilots (post-channel) or the noiseless
// channel output the transmitter can predict (pre-channel).
struct GradientCache {
    AttackMode mode = AttackMode::untargeted;
    int target_label = -1;
    Injection injection = Injection::post_channel;
    std::vector<std::vector<double>> values;
};

struct RunOptions {
    bool predictions = true;
    bool link = true;
    bool records = false;
};

// Attack evaluation on the test split of a dataset. Every test sample is
// re-synthesized from its sample id, so channel and noise draws are shared by
// all cells of a sweep. Link statistics use the first link.frames_per_cell
// test samples.
class Evaluator {
public:
    Evaluator(const Scenario& scenario, const nn::Dataset& data, int jobs = 1);

    std::size_t size() const { return test_.size(); }
    std::size_t link_frames() const { return frames_.size(); }
    const std::vector<std::size_t>& test_indices() const { return test_; }

    GradientCache gradients(const nn::ClassifierModel& generator, const PerturbationConfig& cfg) const;

    // Perturbations from `grads` (ignored for the random method), predictions
    // by `target` (may be null when options.predictions is false).
    EvalReport run(const GradientCache* grads, const nn::ClassifierModel* target, const PerturbationConfig& cfg,
                   const RunOptions& options = {}) const;

    EvalReport psr(const nn::ClassifierModel& model, const PerturbationConfig& cfg,
                   const RunOptions& options = {}) const;
    EvalReport transfer(const nn::ClassifierModel& generator, const nn::ClassifierModel& target,
                        const PerturbationConfig& cfg, const RunOptions& options = {}) const;

    SweepGrid sweep_heatmap(const nn::ClassifierModel& model, const PerturbationConfig& base,
                            const std::vector<double>& ratios, const std::vector<double>& budgets) const;

    // Link behaviour at ratio 1 for budgets beyond the attack range; the power
    // cap is not applied. With a model the perturbation is its FGSM sign
    // pattern, otherwise random signs.
    DegradationCurve degradation(const std::vector<double>& budgets, const nn::ClassifierModel* model,
                                 const PerturbationConfig& base) const;

    std::vector<AblationRow> ablation(const nn::ClassifierModel& model, const PerturbationConfig& base,
                                      const std::vector<double>& budgets, int n_seeds,
                                      std::uint64_t seed) const;

    std::vector<TransferRow> transfer_table(const nn::ClassifierModel& generator,
                                            const nn::ClassifierModel& target, const PerturbationConfig& base,
                                            const std::vector<double>& budgets) const;

    // Perturbation applied to test sample k under cfg.
    Perturbation perturbation(std::size_t k, const GradientCache* grads, const PerturbationConfig& cfg) const;
    // Clean and attacked pilot observations of test sample k.
    PilotTensor observation(std::size_t k) const;
    PilotTensor perturbed_observation(std::size_t k, const Perturbation& p, const PerturbationConfig& cfg) const;

private:
    LinkStats link_frame(std::size_t k, const Perturbation& p, const PerturbationConfig& cfg) const;
    int attack_label(int true_label, const PerturbationConfig& cfg) const;

    const Scenario& scenario_;
    const nn::Dataset& data_;
    int jobs_;
    std::vector<std::size_t> test_;
    std::vector<Scenario::Frame> frames_;
};

// Rejects model pairs whose label spaces differ.
void require_same_label_space(const nn::ClassifierModel& a, const nn::ClassifierModel& b);

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

}  // namespace rfcloak
