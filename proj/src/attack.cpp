#include "rfcloak/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"

namespace rfcloak {

void PerturbationConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("attack: epsilon must be finite and >= 0");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("attack: ratio must lie in (0,1]");
    if (!(power_cap >= 0.0)) throw ConfigError("attack: power_cap must be >= 0");
    if (mode == AttackMode::targeted && target_label < -1) throw ConfigError("attack: invalid target_label");
}

BudgetStatus validate_budget(double epsilon, double ratio, double power_cap) {
    BudgetStatus s;
    s.sigma2 = ratio * epsilon * epsilon;
    s.ok = std::isinf(power_cap) || s.sigma2 <= power_cap;
    return s;
}

std::size_t selected_count(double ratio, std::size_t n_res) {
    // The guard absorbs representation error in products such as 0.7 * 480.
    return std::min(n_res, static_cast<std::size_t>(std::floor(ratio * double(n_res) + 1e-9)));
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_gradient(const PilotTensor& like, std::span<const double> gradient) {
    if (gradient.size() != like.size() || like.values.size() != like.size()) {
        throw ShapeError("attack: gradient shape does not match the pilot tensor");
    }
}

Perturbation empty_like(const PilotTensor& like) {
    Perturbation p;
    p.delta.n_pilot_symbols = like.n_pilot_symbols;
    p.delta.pilots_per_symbol = like.pilots_per_symbol;
    p.delta.values.assign(like.size(), 0.0);
    p.delta.device_label = like.device_label;
    p.delta.condition_id = like.condition_id;
    return p;
}

void finish(Perturbation& p) {
    double acc = 0.0;
    for (double v : p.delta.values) acc += v * v;
    p.mean_power = p.delta.values.empty() ? 0.0 : acc / double(p.delta.values.size());
}

}  // namespace

std::vector<double> input_gradient(const nn::ClassifierModel& model, const PilotTensor& sample,
                                   int label) {
    const int labels[1] = {label};
    return nn::backward(model, nn::as_batch(sample), labels).input.data;
}

Perturbation fgsm_from_gradient(const PilotTensor& like, std::span<const double> gradient,
                                double epsilon, double direction) {
    check_gradient(like, gradient);
    Perturbation p = empty_like(like);
    for (std::size_t i = 0; i < gradient.size(); ++i) {
        p.delta.values[i] = direction * epsilon * sign(gradient[i]);
    }
    p.perturbed_re_count = like.n_res();
    finish(p);
    return p;
}

Perturbation power_controlled_from_gradient(const PilotTensor& like, std::span<const double> gradient,
                                            double epsilon, double ratio, double direction) {
    check_gradient(like, gradient);
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("attack: ratio must lie in (0,1]");
    const std::size_t n_res = like.n_res();
    std::vector<double> influence(n_res);
    for (std::size_t r = 0; r < n_res; ++r) {
        influence[r] = std::hypot(gradient[r], gradient[n_res + r]);
    }
    std::vector<std::size_t> order(n_res);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return influence[a] > influence[b]; });

    Perturbation p = empty_like(like);
    p.perturbed_re_count = selected_count(ratio, n_res);
    for (std::size_t s = 0; s < p.perturbed_re_count; ++s) {
        const std::size_t r = order[s];
        p.delta.values[r] = direction * epsilon * sign(gradient[r]);
        p.delta.values[n_res + r] = direction * epsilon * sign(gradient[n_res + r]);
    }
    finish(p);
    return p;
}

Perturbation fgsm(const nn::ClassifierModel& model, const PilotTensor& sample, int label,
                  double epsilon, AttackMode mode) {
    if (!(epsilon >= 0.0)) throw ConfigError("fgsm: epsilon must be >= 0");
    const auto g = input_gradient(model, sample, label);
    return fgsm_from_gradient(sample, g, epsilon, mode == AttackMode::targeted ? -1.0 : 1.0);
}

Perturbation power_controlled(const nn::ClassifierModel& model, const PilotTensor& sample, int label,
                              double epsilon, double ratio, double power_cap, AttackMode mode) {
    const auto budget = validate_budget(epsilon, ratio, power_cap);
    if (!budget.ok) {
        std::ostringstream os;
        os << "power_controlled: the noise power must be constrained: ratio * epsilon^2 = "
           << budget.sigma2 << " exceeds cap " << power_cap;
        throw BudgetError(os.str());
    }
    const auto g = input_gradient(model, sample, label);
    return power_controlled_from_gradient(sample, g, epsilon, ratio,
                                          mode == AttackMode::targeted ? -1.0 : 1.0);
}

Perturbation random_perturb(const PilotTensor& sample, double epsilon, double ratio,
                            std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("attack: ratio must lie in (0,1]");
    const std::size_t n_res = sample.n_res();
    Perturbation p = empty_like(sample);
    p.perturbed_re_count = selected_count(ratio, n_res);
    auto rng = make_rng(seed, "random-perturb");
    std::vector<std::size_t> order(n_res);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (p.perturbed_re_count < n_res) std::shuffle(order.begin(), order.end(), rng);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t s = 0; s < p.perturbed_re_count; ++s) {
        const std::size_t r = order[s];
        p.delta.values[r] = coin(rng) ? epsilon : -epsilon;
        p.delta.values[n_res + r] = coin(rng) ? epsilon : -epsilon;
    }
    finish(p);
    return p;
}

PilotTensor apply(const PilotTensor& sample, const Perturbation& perturbation) {
    if (sample.values.size() != perturbation.delta.values.size()) {
        throw ShapeError("apply: perturbation shape differs from sample");
    }
    PilotTensor out = sample;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += perturbation.delta.values[i];
    return out;
}

ResourceGrid inject_pre_channel(const ResourceGrid& grid, const Perturbation& perturbation,
                                std::span<const PilotPosition> positions) {
    const auto& d = perturbation.delta;
    if (positions.size() != d.n_res() || d.values.size() != d.size()) {
        throw ShapeError("inject: perturbation does not cover the pilot positions");
    }
    ResourceGrid out = grid;
    for (std::size_t r = 0; r < positions.size(); ++r) {
        const auto& pos = positions[r];
        if (pos.subcarrier < 0 || pos.subcarrier >= grid.n_subcarriers || pos.symbol < 0 ||
            pos.symbol >= grid.n_symbols || !grid.is_pilot(pos.subcarrier, pos.symbol)) {
            throw ShapeError("inject: position is not a pilot cell of the grid");
        }
        out.at(pos.subcarrier, pos.symbol) += cplx{d.re(r), d.im(r)};
    }
    return out;
}

ResourceGrid inject_post_channel(const ResourceGrid& received, const Perturbation& perturbation,
                                 std::span<const PilotPosition> positions) {
    return inject_pre_channel(received, perturbation, positions);
}

std::string to_string(AttackMode m) { return m == AttackMode::targeted ? "targeted" : "untargeted"; }
std::string to_string(Injection i) { return i == Injection::pre_channel ? "pre_channel" : "post_channel"; }
std::string to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::fgsm: return "fgsm";
        case AttackMethod::random: return "random";
        case AttackMethod::power_controlled: break;
    }
    return "power_controlled";
}

AttackMode parse_attack_mode(const std::string& s) {
    if (s == "untargeted") return AttackMode::untargeted;
    if (s == "targeted") return AttackMode::targeted;
    throw ConfigError("attack: unknown mode '" + s + "'");
}

Injection parse_injection(const std::string& s) {
    if (s == "post_channel") return Injection::post_channel;
    if (s == "pre_channel") return Injection::pre_channel;
    throw ConfigError("attack: unknown injection '" + s + "'");
}

AttackMethod parse_attack_method(const std::string& s) {
    if (s == "power_controlled") return AttackMethod::power_controlled;
    if (s == "fgsm") return AttackMethod::fgsm;
    if (s == "random") return AttackMethod::random;
    throw ConfigError("attack: unknown method '" + s + "'");
}

}  // namespace rfcloak
