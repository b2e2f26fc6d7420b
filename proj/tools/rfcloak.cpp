// rfcloak command-line driver: dataset generation, training, attacks and sweeps.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "rfcloak/config.hpp"
#include "rfcloak/error.hpp"
#include "rfcloak/eval.hpp"
#include "rfcloak/manifest.hpp"
#include "rfcloak/nn/io.hpp"
#include "rfcloak/nn/train.hpp"
#include "rfcloak/report.hpp"
#include "rfcloak/rng.hpp"
#include "rfcloak/serialization.hpp"

namespace fs = std::filesystem;
using namespace rfcloak;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string dataset;
    std::string model;
    std::string substitute;
    int samples = 100;
    bool quiet = false;
};

class Run {
public:
    Run(std::string command, const Options& opt) : command_(std::move(command)), opt_(opt) {
        config_ = load_config(opt.config_path);
        if (opt.seed) config_.master_seed = *opt.seed;
        if (!opt.out.empty()) config_.output_dir = opt.out;
        config_.validate();
        seeds_ = StageSeeds::derive(config_.master_seed);

        out_ = config_.output_dir;
        std::error_code ec;
        fs::create_directories(out_, ec);
        if (ec || !fs::is_directory(out_)) throw Error("cannot create output directory " + out_.string());

        // The output location is not part of the experiment, so it is left
        // out of the snapshot and its hash.
        auto doc = to_json(config_);
        doc.erase("output_dir");
        const std::string snapshot = doc.dump(2) + "\n";
        manifest_.version = tool_version();
        manifest_.command = command_;
        manifest_.config_sha256 = sha256_hex(snapshot);
        manifest_.master_seed = config_.master_seed;
        manifest_.seeds = {{"master", config_.master_seed},
                           {"pilot", config_.pilot_seed},
                           {"channel", derive_seed(config_.master_seed, "channel", {config_.channel.seed})},
                           {"drift", derive_seed(config_.master_seed, "drift")},
                           {"data", derive_seed(config_.master_seed, "data")},
                           {"split", derive_seed(config_.master_seed, "split")}};
        manifest_.inputs.push_back(describe_file(opt.config_path, out_));
        write_text(out_ / ("config." + command_ + ".json"), snapshot);
        produced("config." + command_ + ".json");
    }

    const ExperimentConfig& config() const { return config_; }
    const StageSeeds& seeds() const { return seeds_; }
    const fs::path& out() const { return out_; }

    void seed(const std::string& name, std::uint64_t value) { manifest_.seeds[name] = value; }
    void produced(const std::string& name) { files_.push_back(name); }
    void input(const fs::path& path) { manifest_.inputs.push_back(describe_file(path, out_)); }

    void log(const std::string& msg) const {
        if (!opt_.quiet) std::cerr << "[" << command_ << "] " << msg << "\n";
    }

    nn::Dataset dataset(const Scenario& sc) {
        const fs::path path = opt_.dataset.empty() ? out_ / "dataset.rfds" : fs::path(opt_.dataset);
        if (fs::exists(path)) {
            input(path);
            auto ds = nn::load_dataset(path);
            check_dataset(ds);
            return ds;
        }
        if (!opt_.dataset.empty()) throw Error("dataset file not found: " + path.string());
        log("no dataset in the output directory, generating one");
        auto ds = sc.generate_dataset(config_.dataset, opt_.jobs);
        nn::save_dataset(out_ / "dataset.rfds", ds);
        produced("dataset.rfds");
        return ds;
    }

    nn::ClassifierModel model(const std::string& explicit_path, const std::string& default_name) {
        const fs::path path = explicit_path.empty() ? out_ / default_name : fs::path(explicit_path);
        if (!fs::exists(path)) throw Error("model file not found: " + path.string() + " (run train first)");
        input(path);
        auto m = nn::load_model(path);
        if (m.arch.input_shape() != config_.architecture.input_shape() ||
            m.n_classes() != static_cast<int>(config_.devices.size())) {
            throw ConfigError("model " + path.string() + " does not match the configured input shape or devices");
        }
        return m;
    }

    void check_dataset(const nn::Dataset& ds) const {
        if (ds.n_pilot_symbols != config_.architecture.in_h || ds.pilots_per_symbol != config_.architecture.in_w ||
            ds.n_classes != config_.architecture.n_classes) {
            throw ConfigError("dataset shape (" + std::to_string(ds.n_pilot_symbols) + " x " +
                              std::to_string(ds.pilots_per_symbol) + ", " + std::to_string(ds.n_classes) +
                              " classes) does not match the architecture");
        }
    }

    void finish() {
        for (const auto& f : files_) manifest_.files.push_back(describe_file(out_ / f, out_));
        update_manifest(out_, manifest_);
    }

    int jobs() const { return opt_.jobs; }
    int samples() const { return opt_.samples; }

private:
    std::string command_;
    const Options& opt_;
    ExperimentConfig config_;
    StageSeeds seeds_;
    fs::path out_;
    RunManifest manifest_;
    std::vector<std::string> files_;
};

nlohmann::json evaluation_json(const nn::Evaluation& e) {
    return {{"accuracy", e.accuracy}, {"confusion", e.confusion}};
}

nn::ClassifierModel train_model(Run& run, const nn::Dataset& ds, std::uint64_t seed, const std::string& tag) {
    const auto hyper = run.config().train_hyper(seed);
    const auto t0 = std::chrono::steady_clock::now();
    auto model = nn::train(ds, run.config().architecture, hyper, [&](int epoch, double loss) {
        run.log(tag + " epoch " + std::to_string(epoch + 1) + "/" + std::to_string(hyper.epochs) + " loss " +
                format_number(loss));
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.log(tag + " trained in " + format_number(std::round(secs * 10) / 10) + " s, test accuracy " +
            format_number(model.meta.final_test_accuracy));
    return model;
}

int cmd_gen_dataset(Run& run) {
    const auto sc = run.config().scenario();
    const auto ds = sc.generate_dataset(run.config().dataset, run.jobs());
    nn::save_dataset(run.out() / "dataset.rfds", ds);
    run.produced("dataset.rfds");
    run.log("wrote " + std::to_string(ds.size()) + " samples (" + std::to_string(ds.indices(nn::Split::train).size()) +
            " train / " + std::to_string(ds.indices(nn::Split::test).size()) + " test)");
    run.finish();
    return 0;
}

int cmd_train(Run& run) {
    const auto sc = run.config().scenario();
    const auto ds = run.dataset(sc);
    run.seed("train", run.seeds().train);
    const auto model = train_model(run, ds, run.seeds().train, "model");
    nn::save_model(run.out() / "model.rfck", model);
    run.produced("model.rfck");

    const nlohmann::json metrics{{"architecture", nn::describe(model.arch)},
                                 {"parameters", model.parameter_count()},
                                 {"train_meta", model.meta},
                                 {"train", evaluation_json(nn::evaluate(model, ds, nn::Split::train))},
                                 {"test", evaluation_json(nn::evaluate(model, ds, nn::Split::test))}};
    write_text(run.out() / "metrics.json", metrics.dump(2) + "\n");
    run.produced("metrics.json");
    std::cout << "test_accuracy " << format_number(model.meta.final_test_accuracy) << "\n";
    run.finish();
    return 0;
}

PerturbationConfig seeded_attack(Run& run) {
    PerturbationConfig cfg = run.config().attack;
    cfg.seed = derive_seed(run.seeds().attack, "random", {cfg.seed});
    run.seed("attack", cfg.seed);
    return cfg;
}

int cmd_attack(Run& run, const Options& opt) {
    const auto sc = run.config().scenario();
    const auto ds = run.dataset(sc);
    const auto model = run.model(opt.model, "model.rfck");
    const auto cfg = seeded_attack(run);
    const Evaluator ev(sc, ds, run.jobs());

    RunOptions options;
    options.records = true;
    std::optional<GradientCache> grads;
    if (cfg.method != AttackMethod::random) grads = ev.gradients(model, cfg);
    const auto report = ev.run(grads ? &*grads : nullptr, &model, cfg, options);

    const std::size_t n_dump = std::min(ev.size(), static_cast<std::size_t>(std::max(0, run.samples())));
    std::vector<std::uint64_t> ids(n_dump);
    std::vector<int> labels(n_dump);
    std::vector<PilotTensor> clean(n_dump), perturbed(n_dump);
    parallel_for(n_dump, run.jobs(), [&](std::size_t k) {
        const std::size_t i = ev.test_indices()[k];
        ids[k] = ds.sample_ids[i];
        labels[k] = ds.labels[i];
        clean[k] = ev.observation(k);
        perturbed[k] = ev.perturbed_observation(k, ev.perturbation(k, grads ? &*grads : nullptr, cfg), cfg);
    });
    write_text(run.out() / "clean.csv", tensors_csv(ids, labels, clean));
    write_text(run.out() / "perturbed.csv", tensors_csv(ids, labels, perturbed));
    write_text(run.out() / "samples.csv", samples_csv(report));
    write_text(run.out() / "attack.json", summary_json(report).dump(2) + "\n");
    for (const char* f : {"clean.csv", "perturbed.csv", "samples.csv", "attack.json"}) run.produced(f);
    std::cout << "psr " << format_number(report.psr) << " bler " << format_number(report.link.bler()) << "\n";
    run.finish();
    return 0;
}

int cmd_sweep(Run& run, const Options& opt) {
    const auto& config = run.config();
    const auto sc = config.scenario();
    const auto ds = run.dataset(sc);
    const auto model = run.model(opt.model, "model.rfck");
    const auto cfg = seeded_attack(run);
    const Evaluator ev(sc, ds, run.jobs());

    run.log("default attack");
    nlohmann::json summary;
    for (Injection inj : {Injection::post_channel, Injection::pre_channel}) {
        PerturbationConfig c = cfg;
        c.injection = inj;
        summary[to_string(inj)] = summary_json(ev.psr(model, c));
    }

    run.log("heatmap");
    const auto grid = ev.sweep_heatmap(model, cfg, config.sweep.ratios, config.sweep.budgets);
    write_text(run.out() / "heatmap.csv", heatmap_csv(grid));
    run.produced("heatmap.csv");

    run.log("degradation curve");
    const auto curve = ev.degradation(config.sweep.degradation_budgets, &model, cfg);
    write_text(run.out() / "degradation.csv", degradation_csv(curve));
    run.produced("degradation.csv");

    run.log("ablation");
    run.seed("ablation", run.seeds().ablation);
    const auto ablation = ev.ablation(model, cfg, config.sweep.budgets, config.sweep.ablation_seeds,
                                      run.seeds().ablation);
    write_text(run.out() / "ablation.csv", ablation_csv(ablation));
    run.produced("ablation.csv");

    nlohmann::json transfer_section = nullptr;
    if (config.sweep.transfer) {
        std::optional<nn::ClassifierModel> substitute;
        if (!opt.substitute.empty()) {
            substitute = run.model(opt.substitute, "");
        } else if (fs::exists(run.out() / "substitute.rfck")) {
            substitute = run.model("", "substitute.rfck");
        } else {
            run.log("training the substitute model");
            run.seed("substitute", run.seeds().substitute);
            substitute = train_model(run, ds, run.seeds().substitute, "substitute");
            nn::save_model(run.out() / "substitute.rfck", *substitute);
            run.produced("substitute.rfck");
        }
        std::vector<double> budgets{0.0};
        budgets.insert(budgets.end(), config.sweep.budgets.begin(), config.sweep.budgets.end());
        const auto rows = ev.transfer_table(*substitute, model, cfg, budgets);
        write_text(run.out() / "transfer.csv", transfer_csv(rows));
        run.produced("transfer.csv");
        transfer_section = transfer_json(rows);
    }

    write_text(run.out() / "features.csv", features_csv(model, ds));
    run.produced("features.csv");

    auto config_json = to_json(config);
    config_json.erase("output_dir");
    const nlohmann::json report{{"tool", "rfcloak"},
                                {"version", tool_version()},
                                {"config", config_json},
                                {"test_samples", ev.size()},
                                {"link_frames_per_cell", ev.link_frames()},
                                {"model_test_accuracy", model.meta.final_test_accuracy},
                                {"default_attack", summary},
                                {"heatmap", sweep_json(grid)},
                                {"degradation", degradation_json(curve)},
                                {"ablation", ablation_json(ablation)},
                                {"transfer", transfer_section}};
    write_text(run.out() / "report.json", report.dump(2) + "\n");
    run.produced("report.json");
    run.finish();
    if (!grid.diagnostics.empty()) {
        for (const auto& d : grid.diagnostics) std::cerr << "cell failed: " << d << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rfcloak: pilot perturbations against RF fingerprinting, with link-level evaluation"};
    app.set_version_flag("--version", std::string("rfcloak ") + tool_version());
    app.require_subcommand(1);

    Options opt;
    auto common = [&opt](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--out", opt.out, "output directory (overrides output_dir)");
        sub->add_option("--seed", opt.seed, "master seed (overrides master_seed)");
        sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::Range(1, 1024));
        sub->add_flag("--quiet", opt.quiet, "suppress progress messages");
    };
    auto* gen = app.add_subcommand("gen-dataset", "synthesize the pilot-tensor dataset");
    common(gen);
    auto* train = app.add_subcommand("train", "train the fingerprint classifier");
    common(train);
    train->add_option("--dataset", opt.dataset, "dataset file (default <out>/dataset.rfds)");
    auto* attack = app.add_subcommand("attack", "perturb test samples and report per-sample outcomes");
    common(attack);
    attack->add_option("--dataset", opt.dataset, "dataset file (default <out>/dataset.rfds)");
    attack->add_option("--model", opt.model, "model checkpoint (default <out>/model.rfck)");
    attack->add_option("--samples", opt.samples, "number of test samples dumped as tensors")
        ->check(CLI::NonNegativeNumber);
    auto* sweep = app.add_subcommand("sweep", "heatmap, degradation, ablation and transfer sweeps");
    common(sweep);
    sweep->add_option("--dataset", opt.dataset, "dataset file (default <out>/dataset.rfds)");
    sweep->add_option("--model", opt.model, "model checkpoint (default <out>/model.rfck)");
    sweep->add_option("--substitute", opt.substitute, "generator model for the transfer study");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        Run run(name, opt);
        if (name == "gen-dataset") return cmd_gen_dataset(run);
        if (name == "train") return cmd_train(run);
        if (name == "attack") return cmd_attack(run, opt);
        return cmd_sweep(run, opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const BudgetError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
