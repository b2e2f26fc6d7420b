#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rfcloak/grid.hpp"
#include "rfcloak/nn/model.hpp"

namespace rfcloak {

enum class AttackMode { untargeted, targeted };
enum class Injection { pre_channel, post_channel };
enum class AttackMethod { power_controlled, fgsm, random };

struct PerturbationConfig {
    double epsilon = 0.04;     // per real element, unit-power pilot scale
    double ratio = 1.0;        // fraction of pilot REs perturbed
    double power_cap = 0.0016; // bound on ratio * epsilon^2; +inf disables
    AttackMode mode = AttackMode::untargeted;
    int target_label = -1;     // targeted mode; -1 selects (true label + 1) mod n
    Injection injection = Injection::post_channel;
    AttackMethod method = AttackMethod::power_controlled;
    std::uint64_t seed = 0;    // random method only

    void validate() const;
};

// delta has the layout of the pilot tensor it perturbs.
struct Perturbation {
    PilotTensor delta;
    std::size_t perturbed_re_count = 0;
    double mean_power = 0.0;  // sum(delta^2) / number of real elements
};

struct BudgetStatus {
    bool ok = true;
    double sigma2 = 0.0;  // ratio * epsilon^2
};

BudgetStatus validate_budget(double epsilon, double ratio, double power_cap);

// Number of resource elements selected for a ratio: floor(ratio * n_res).
std::size_t selected_count(double ratio, std::size_t n_res);

// d loss(model(sample), label) / d sample.
std::vector<double> input_gradient(const nn::ClassifierModel& model, const PilotTensor& sample,
                                   int label);

// Straightway: delta = direction * epsilon * sign(gradient), sign(0) = 0.
// direction is +1 to ascend the loss of the true label, -1 to descend toward a target.
Perturbation fgsm_from_gradient(const PilotTensor& like, std::span<const double> gradient,
                                double epsilon, double direction = 1.0);

// Power-controlled: rank REs by sqrt(g_I^2 + g_Q^2) (ties to the lower index),
// keep the top floor(ratio * n_res), perturb both components of each.
Perturbation power_controlled_from_gradient(const PilotTensor& like, std::span<const double> gradient,
                                            double epsilon, double ratio, double direction = 1.0);

// Untargeted: ascend the loss of `label`. Targeted: `label` is the target and
// the loss toward it is descended.
Perturbation fgsm(const nn::ClassifierModel& model, const PilotTensor& sample, int label,
                  double epsilon, AttackMode mode = AttackMode::untargeted);

// Validates ratio * epsilon^2 <= power_cap first (BudgetError otherwise).
Perturbation power_controlled(const nn::ClassifierModel& model, const PilotTensor& sample, int label,
                              double epsilon, double ratio, double power_cap,
                              AttackMode mode = AttackMode::untargeted);

// Ablation baseline: uniformly random RE subset, independent random signs.
Perturbation random_perturb(const PilotTensor& sample, double epsilon, double ratio,
                            std::uint64_t seed);

// Y' = Y + delta; the input is left untouched.
PilotTensor apply(const PilotTensor& sample, const Perturbation& perturbation);

// Adds delta (I + jQ) to the pilot cells of a grid, positions in tensor order.
ResourceGrid inject_pre_channel(const ResourceGrid& grid, const Perturbation& perturbation,
                                std::span<const PilotPosition> positions);

// Same operation on a received grid: the perturbation bypasses the channel.
ResourceGrid inject_post_channel(const ResourceGrid& received, const Perturbation& perturbation,
                                 std::span<const PilotPosition> positions);

std::string to_string(AttackMode m);
std::string to_string(Injection i);
std::string to_string(AttackMethod m);
AttackMode parse_attack_mode(const std::string& s);
Injection parse_injection(const std::string& s);
AttackMethod parse_attack_method(const std::string& s);

}  // namespace rfcloak
