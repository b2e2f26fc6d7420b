#include "rfcloak/eval.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "rfcloak/error.hpp"
#include "rfcloak/rng.hpp"

namespace rfcloak {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double direction(const PerturbationConfig& cfg) { return cfg.mode == AttackMode::targeted ? -1.0 : 1.0; }

double effective_ratio(const PerturbationConfig& cfg) {
    return cfg.method == AttackMethod::fgsm ? 1.0 : cfg.ratio;
}

}  // namespace

void require_same_label_space(const nn::ClassifierModel& a, const nn::ClassifierModel& b) {
    if (a.n_classes() != b.n_classes()) {
        throw ConfigError("transfer: generator and target models have different label spaces");
    }
    if (a.arch.input_shape() != b.arch.input_shape()) {
        throw ShapeError("transfer: generator and target models expect different input shapes");
    }
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / double(v.size() - 1));
}

Evaluator::Evaluator(const Scenario& scenario, const nn::Dataset& data, int jobs)
    : scenario_(scenario), data_(data), jobs_(jobs) {
    data_.validate();
    if (data_.n_pilot_symbols != scenario_.grid().pilot_symbol_count() ||
        data_.pilots_per_symbol != scenario_.grid().pilots_per_symbol()) {
        throw ShapeError("eval: dataset tensors do not match the scenario's pilot lattice");
    }
    if (data_.n_classes != scenario_.n_devices()) {
        throw ConfigError("eval: dataset classes do not match the scenario's device table");
    }
    test_ = data_.indices(nn::Split::test);
    if (test_.empty()) throw ConfigError("eval: the dataset has no test samples");

    const std::size_t n_link = std::min(test_.size(), static_cast<std::size_t>(scenario_.link().frames_per_cell));
    frames_.resize(n_link);
    parallel_for(n_link, jobs_, [&](std::size_t k) {
        const std::size_t i = test_[k];
        frames_[k] = scenario_.realize(data_.labels[i], data_.condition_ids[i], data_.sample_ids[i]);
    });
}

PilotTensor Evaluator::observation(std::size_t k) const { return data_.sample(test_[k]); }

int Evaluator::attack_label(int true_label, const PerturbationConfig& cfg) const {
    if (cfg.mode == AttackMode::untargeted) return true_label;
    const int n = data_.n_classes;
    if (cfg.target_label < 0 || cfg.target_label == true_label) return (true_label + 1) % n;
    if (cfg.target_label >= n) throw ConfigError("attack: target_label out of range");
    return cfg.target_label;
}

GradientCache Evaluator::gradients(const nn::ClassifierModel& generator, const PerturbationConfig& cfg) const {
    if (generator.n_classes() != data_.n_classes) {
        throw ConfigError("eval: generator model label space differs from the dataset");
    }
    GradientCache cache;
    cache.mode = cfg.mode;
    cache.target_label = cfg.target_label;
    cache.injection = cfg.injection;
    cache.values.resize(test_.size());
    parallel_for(test_.size(), jobs_, [&](std::size_t k) {
        const std::size_t i = test_[k];
        const int label = data_.labels[i];
        PilotTensor at;
        if (cfg.injection == Injection::post_channel) {
            at = observation(k);
        } else {
            const auto frame = k < frames_.size()
                                   ? frames_[k]
                                   : scenario_.realize(label, data_.condition_ids[i], data_.sample_ids[i]);
            at = scenario_.predicted_observation(frame, label);
        }
        cache.values[k] = input_gradient(generator, at, attack_label(label, cfg));
    });
    return cache;
}

Perturbation Evaluator::perturbation(std::size_t k, const GradientCache* grads, const PerturbationConfig& cfg) const {
    const PilotTensor like = observation(k);
    if (cfg.method == AttackMethod::random) {
        const std::uint64_t id = data_.sample_ids[test_[k]];
        return random_perturb(like, cfg.epsilon, cfg.ratio, derive_seed(cfg.seed, "sample", {id}));
    }
    if (grads == nullptr || grads->values.size() != test_.size()) {
        throw Error("eval: gradient cache missing for a gradient-based attack");
    }
    if (grads->mode != cfg.mode || grads->injection != cfg.injection ||
        (cfg.mode == AttackMode::targeted && grads->target_label != cfg.target_label)) {
        throw Error("eval: gradient cache was computed for a different attack mode or injection");
    }
    const auto& g = grads->values[k];
    if (cfg.method == AttackMethod::fgsm) return fgsm_from_gradient(like, g, cfg.epsilon, direction(cfg));
    return power_controlled_from_gradient(like, g, cfg.epsilon, cfg.ratio, direction(cfg));
}

PilotTensor Evaluator::perturbed_observation(std::size_t k, const Perturbation& p,
                                             const PerturbationConfig& cfg) const {
    if (cfg.injection == Injection::post_channel) return apply(observation(k), p);
    const std::size_t i = test_[k];
    const int label = data_.labels[i];
    const auto frame = k < frames_.size() ? frames_[k]
                                          : scenario_.realize(label, data_.condition_ids[i], data_.sample_ids[i]);
    const auto tx = inject_pre_channel(frame.tx, p, scenario_.positions());
    const auto impaired = impair(tx, scenario_.device(label), frame.ctx);
    const auto prop = scenario_.transmit(impaired, data_.sample_ids[i]);
    return scenario_.observe(prop.received, label, data_.condition_ids[i]);
}

LinkStats Evaluator::link_frame(std::size_t k, const Perturbation& p, const PerturbationConfig& cfg) const {
    const auto& frame = frames_.at(k);
    const std::uint64_t id = data_.sample_ids[test_[k]];
    const auto& positions = scenario_.positions();
    const int blocks = scenario_.link().blocks_per_frame;
    const int max_retx = scenario_.link().max_retx;

    if (cfg.injection == Injection::post_channel) {
        const auto first = scenario_.receive(inject_post_channel(frame.prop.received, p, positions));
        RetransmitFn again = [&](int attempt) {
            const auto prop = scenario_.transmit(frame.impaired, id, static_cast<std::uint64_t>(attempt));
            return scenario_.receive(inject_post_channel(prop.received, p, positions));
        };
        return demodulate_and_score(first, frame.bits, blocks, max_retx, again);
    }
    const int label = data_.labels[test_[k]];
    const auto impaired = impair(inject_pre_channel(frame.tx, p, positions), scenario_.device(label), frame.ctx);
    const auto first = scenario_.receive(scenario_.transmit(impaired, id).received);
    RetransmitFn again = [&](int attempt) {
        return scenario_.receive(scenario_.transmit(impaired, id, static_cast<std::uint64_t>(attempt)).received);
    };
    return demodulate_and_score(first, frame.bits, blocks, max_retx, again);
}

EvalReport Evaluator::run(const GradientCache* grads, const nn::ClassifierModel* target,
                          const PerturbationConfig& cfg, const RunOptions& options) const {
    cfg.validate();
    if (options.predictions && target == nullptr) throw Error("eval: predictions requested without a model");
    if (target && target->n_classes() != data_.n_classes) {
        throw ConfigError("eval: target model label space differs from the dataset");
    }
    if (!validate_budget(cfg.epsilon, effective_ratio(cfg), cfg.power_cap).ok) {
        throw BudgetError("eval: the noise power must be constrained: ratio * epsilon^2 exceeds power_cap");
    }

    const std::size_t n = test_.size();
    const int n_classes = data_.n_classes;
    EvalReport report;
    report.attack = cfg;
    report.n_samples = n;

    if (options.predictions) {
        std::vector<SampleRecord> records(n);
        parallel_for(n, jobs_, [&](std::size_t k) {
            const std::size_t i = test_[k];
            const auto p = perturbation(k, grads, cfg);
            auto& rec = records[k];
            rec.sample_id = data_.sample_ids[i];
            rec.label = data_.labels[i];
            rec.clean_prediction = nn::predict(*target, observation(k));
            rec.perturbed_prediction = nn::predict(*target, perturbed_observation(k, p, cfg));
            rec.sigma2 = p.mean_power;
            rec.perturbed_res = p.perturbed_re_count;
        });

        report.confusion.assign(static_cast<std::size_t>(n_classes),
                                std::vector<std::uint64_t>(static_cast<std::size_t>(n_classes), 0));
        std::size_t valid = 0, clean_correct = 0, valid_given_correct = 0;
        for (const auto& r : records) {
            ++report.confusion[static_cast<std::size_t>(r.label)][static_cast<std::size_t>(r.perturbed_prediction)];
            const bool flipped = r.perturbed_prediction != r.label;
            valid += flipped;
            if (r.clean_prediction == r.label) {
                ++clean_correct;
                valid_given_correct += flipped;
            }
        }
        report.psr = double(valid) / double(n);
        report.clean_accuracy = double(clean_correct) / double(n);
        report.psr_clean_correct = clean_correct ? double(valid_given_correct) / double(clean_correct) : 0.0;
        if (options.records) report.records = std::move(records);
    }

    if (options.link) {
        std::vector<LinkStats> stats(frames_.size());
        parallel_for(frames_.size(), jobs_, [&](std::size_t k) {
            stats[k] = link_frame(k, perturbation(k, grads, cfg), cfg);
        });
        for (const auto& s : stats) report.link.merge(s);
    }
    return report;
}

EvalReport Evaluator::psr(const nn::ClassifierModel& model, const PerturbationConfig& cfg,
                          const RunOptions& options) const {
    if (cfg.method == AttackMethod::random) return run(nullptr, &model, cfg, options);
    const auto grads = gradients(model, cfg);
    return run(&grads, &model, cfg, options);
}

EvalReport Evaluator::transfer(const nn::ClassifierModel& generator, const nn::ClassifierModel& target,
                               const PerturbationConfig& cfg, const RunOptions& options) const {
    require_same_label_space(generator, target);
    if (cfg.method == AttackMethod::random) return run(nullptr, &target, cfg, options);
    const auto grads = gradients(generator, cfg);
    return run(&grads, &target, cfg, options);
}

SweepGrid Evaluator::sweep_heatmap(const nn::ClassifierModel& model, const PerturbationConfig& base,
                                   const std::vector<double>& ratios, const std::vector<double>& budgets) const {
    PerturbationConfig cfg = base;
    cfg.method = AttackMethod::power_controlled;
    const auto grads = gradients(model, cfg);

    SweepGrid grid;
    grid.ratios = ratios;
    grid.budgets = budgets;
    grid.psr.assign(ratios.size(), std::vector<double>(budgets.size(), kNaN));
    grid.bler.assign(ratios.size(), std::vector<double>(budgets.size(), kNaN));
    for (std::size_t a = 0; a < ratios.size(); ++a) {
        for (std::size_t b = 0; b < budgets.size(); ++b) {
            cfg.ratio = ratios[a];
            cfg.epsilon = budgets[b];
            try {
                const auto r = run(&grads, &model, cfg);
                grid.psr[a][b] = r.psr;
                grid.bler[a][b] = r.link.bler();
            } catch (const Error& e) {
                grid.diagnostics.push_back("ratio " + std::to_string(ratios[a]) + " budget " +
                                           std::to_string(budgets[b]) + ": " + e.what());
            }
        }
    }
    return grid;
}

DegradationCurve Evaluator::degradation(const std::vector<double>& budgets, const nn::ClassifierModel* model,
                                        const PerturbationConfig& base) const {
    PerturbationConfig cfg = base;
    cfg.ratio = 1.0;
    cfg.power_cap = std::numeric_limits<double>::infinity();
    cfg.method = model ? AttackMethod::fgsm : AttackMethod::random;
    std::optional<GradientCache> grads;
    if (model) grads = gradients(*model, cfg);

    RunOptions options;
    options.predictions = false;
    DegradationCurve curve;
    for (double budget : budgets) {
        cfg.epsilon = budget;
        const auto r = run(grads ? &*grads : nullptr, model, cfg, options);
        curve.points.push_back({budget, r.link});
        if (!curve.threshold && r.link.errored_blocks > 0) curve.threshold = budget;
    }
    return curve;
}

std::vector<AblationRow> Evaluator::ablation(const nn::ClassifierModel& model, const PerturbationConfig& base,
                                             const std::vector<double>& budgets, int n_seeds,
                                             std::uint64_t seed) const {
    if (n_seeds < 1) throw ConfigError("ablation: at least one seed required");
    PerturbationConfig cfg = base;
    cfg.method = AttackMethod::power_controlled;
    const auto grads = gradients(model, cfg);
    RunOptions options;
    options.link = false;

    std::vector<AblationRow> rows;
    for (double budget : budgets) {
        AblationRow row;
        row.budget = budget;
        cfg.method = AttackMethod::power_controlled;
        cfg.epsilon = budget;
        cfg.ratio = 0.2;
        row.sparse_psr = run(&grads, &model, cfg, options).psr;
        cfg.ratio = 1.0;
        row.full_psr = run(&grads, &model, cfg, options).psr;
        cfg.method = AttackMethod::random;
        for (int s = 0; s < n_seeds; ++s) {
            cfg.seed = derive_seed(seed, "ablation", {static_cast<std::uint64_t>(s)});
            row.random_psr.push_back(run(nullptr, &model, cfg, options).psr);
        }
        row.random_mean = mean(row.random_psr);
        row.random_std = sample_std(row.random_psr);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<TransferRow> Evaluator::transfer_table(const nn::ClassifierModel& generator,
                                                   const nn::ClassifierModel& target, const PerturbationConfig& base,
                                                   const std::vector<double>& budgets) const {
    require_same_label_space(generator, target);
    PerturbationConfig cfg = base;
    cfg.method = AttackMethod::power_controlled;
    cfg.ratio = 1.0;
    const auto from_generator = gradients(generator, cfg);
    const auto from_target = gradients(target, cfg);
    RunOptions options;
    options.link = false;

    std::vector<TransferRow> rows;
    for (double budget : budgets) {
        cfg.epsilon = budget;
        TransferRow row;
        row.budget = budget;
        row.ratio = cfg.ratio;
        const auto t = run(&from_generator, &target, cfg, options);
        row.transfer_psr = t.psr;
        row.target_clean_error = 1.0 - t.clean_accuracy;
        row.whitebox_psr = run(&from_target, &target, cfg, options).psr;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace rfcloak
