// duo: command-line front end for Asymmetric Duo tuning and evaluation.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "duo/commands.hpp"

namespace {

struct Common {
    std::string measure = "softmax";
    std::vector<double> sac;
    std::string format = "csv";
    std::string out;
    int jobs = 1;
    int ece_bins = duo::kDefaultEceBins;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--measure", c.measure, "Uncertainty measure")
        ->check(CLI::IsMember({"softmax", "entropy"}))
        ->capture_default_str();
    cmd->add_option("--sac", c.sac, "SAC target accuracy (repeatable, default 0.98)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    cmd->add_option("--out", c.out, "Output file (default stdout)");
    cmd->add_option("--ece-bins", c.ece_bins, "Equal-width ECE bins")->check(CLI::PositiveNumber)->capture_default_str();
}

duo::EvalOptions eval_options(const Common& c) {
    duo::EvalOptions o;
    o.measure = duo::parse_measure(c.measure);
    if (!c.sac.empty()) o.sac_targets = c.sac;
    o.ece_bins = c.ece_bins;
    return o;
}

duo::OutputOptions output_options(const Common& c) {
    duo::OutputOptions o;
    o.format = duo::parse_format(c.format);
    if (!c.out.empty()) o.out = c.out;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asymmetric Duo toolkit: tune, evaluate and sweep large+small classifier pairs from logit bundles"};
    app.require_subcommand(1);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a logit bundle directory");
    validate->add_option("bundle", validate_path, "Bundle directory")->required();

    duo::TuneArgs tune_args;
    std::string tune_large, tune_small, tune_out;
    auto* tune = app.add_subcommand("tune", "Fit Duo temperatures (or single-model scaling) on validation bundles");
    tune->add_option("--large", tune_large, "Large model validation bundle")->required();
    tune->add_option("--small", tune_small, "Sidekick validation bundle; omit for single-model temperature scaling");
    tune->add_option("--out", tune_out, "Output JSON file (default stdout)");

    duo::EvalArgs eval_args;
    Common eval_common;
    std::string eval_large, eval_small, eval_weights;
    double t_large = -1.0, t_small = -1.0;
    auto* eval = app.add_subcommand("eval", "Evaluate one aggregation mode on test bundles");
    eval->add_option("--large", eval_large, "Large model test bundle")->required();
    eval->add_option("--small", eval_small, "Sidekick test bundle");
    eval->add_option("--mode", eval_args.mode, "Aggregation mode")
        ->check(CLI::IsMember({"single", "weighted", "unweighted", "uq_only"}))
        ->capture_default_str();
    eval->add_option("--weights", eval_weights, "JSON written by `duo tune`");
    auto* tl = eval->add_option("--t-large", t_large, "Large-model temperature");
    auto* ts = eval->add_option("--t-small", t_small, "Sidekick temperature");
    tl->needs(ts);
    ts->needs(tl);
    eval->add_option("--scale", eval_args.scale, "Logit scale for mode single")->capture_default_str();
    add_common(eval, eval_common);

    duo::SweepConfig sweep_cfg;
    Common sweep_common;
    std::vector<std::string> sweep_large, sweep_small, sweep_modes;
    auto* sweep = app.add_subcommand("sweep", "Tune and evaluate every sidekick, one row per (sidekick, mode)");
    sweep->add_option("--large", sweep_large, "Large model VAL and TEST bundles")->expected(2)->required();
    sweep->add_option("--small", sweep_small, "Sidekick VAL and TEST bundles (repeatable)")->expected(2, -1);
    sweep->add_option("--modes", sweep_modes, "Modes to evaluate (default weighted,unweighted,uq_only)")
        ->delimiter(',')
        ->check(CLI::IsMember({"single", "weighted", "unweighted", "uq_only"}));
    sweep->add_option("--jobs", sweep_common.jobs, "Concurrent sidekicks")->check(CLI::PositiveNumber);
    add_common(sweep, sweep_common);

    std::string sim_spec, sim_out;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic large/small pair from a JSON spec");
    simulate->add_option("spec", sim_spec, "Simulation spec JSON")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", sim_out, "Output directory for the four bundles")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : duo::exit_code::kInputError;
    }

    if (*validate) return duo::cmd_validate(validate_path, std::cout, std::cerr);

    if (*tune) {
        tune_args.large_val = tune_large;
        if (!tune_small.empty()) tune_args.small_val = tune_small;
        if (!tune_out.empty()) tune_args.out = tune_out;
        return duo::cmd_tune(tune_args, std::cout, std::cerr);
    }

    if (*eval) {
        eval_args.large = eval_large;
        if (!eval_small.empty()) eval_args.small = eval_small;
        if (!eval_weights.empty()) eval_args.weights_file = eval_weights;
        if (*tl) eval_args.weights = duo::DuoWeights{t_large, t_small};
        eval_args.eval = eval_options(eval_common);
        eval_args.output = output_options(eval_common);
        return duo::cmd_eval(eval_args, std::cout, std::cerr);
    }

    if (*sweep) {
        sweep_cfg.large_val = sweep_large.at(0);
        sweep_cfg.large_test = sweep_large.at(1);
        if (sweep_small.size() % 2 != 0) {
            std::cerr << "error: --small takes VAL and TEST directories in pairs\n";
            return duo::exit_code::kInputError;
        }
        for (std::size_t i = 0; i < sweep_small.size(); i += 2) {
            sweep_cfg.smalls.emplace_back(sweep_small[i], sweep_small[i + 1]);
        }
        if (!sweep_modes.empty()) sweep_cfg.modes = sweep_modes;
        sweep_cfg.jobs = sweep_common.jobs;
        sweep_cfg.eval = eval_options(sweep_common);
        sweep_cfg.output = output_options(sweep_common);
        return duo::cmd_sweep(sweep_cfg, std::cout, std::cerr);
    }

    return duo::cmd_simulate(sim_spec, sim_out, std::cout, std::cerr);
}
