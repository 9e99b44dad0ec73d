#include "duo/commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "duo/errors.hpp"
#include "duo/logit_store.hpp"
#include "duo/simulate.hpp"
#include "duo/tune.hpp"

namespace duo {
namespace {

namespace fs = std::filesystem;

void emit(const std::string& text, const std::optional<fs::path>& path, std::ostream& out) {
    if (!path) {
        out << text;
        return;
    }
    std::ofstream file(*path, std::ios::binary | std::ios::trunc);
    if (!file) throw InputError(fmt::format("cannot write {}", path->string()));
    file << text;
    if (!file) throw InputError(fmt::format("write failed: {}", path->string()));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(fmt::format("{}: invalid JSON at byte offset {}", path.string(), e.byte));
    }
}

LogitBundle load_split(const fs::path& dir, Split expected) {
    LogitBundle b = load_bundle(dir);
    if (b.meta.split != expected) {
        throw InputError(fmt::format("{}: expected a {} bundle, found {}", dir.string(), to_string(expected),
                                     to_string(b.meta.split)));
    }
    return b;
}

AggregationMode duo_mode(std::string_view name, const std::optional<DuoWeights>& weights) {
    if (name == "unweighted") return mode::Unweighted{};
    if (name == "weighted" || name == "uq_only") {
        if (!weights) throw InputError(fmt::format("mode {} requires tuned weights", name));
        validate(*weights);
        if (name == "weighted") return mode::Weighted{*weights};
        return mode::UQOnly{*weights};
    }
    throw InputError(fmt::format("unknown mode \"{}\" (expected single, weighted, unweighted or uq_only)", name));
}

void check_mode_name(std::string_view name) {
    if (name != "single" && name != "weighted" && name != "unweighted" && name != "uq_only") {
        throw InputError(fmt::format("unknown mode \"{}\" (expected single, weighted, unweighted or uq_only)", name));
    }
}

std::string render(std::span<const MetricRow> rows, ReportFormat format) {
    std::ostringstream s;
    write_report(s, rows, format);
    return s.str();
}

}  // namespace

int run_guarded(const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return exit_code::kOk;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kInputError;
    } catch (const InvariantError& e) {
        err << "internal error: " << e.what() << '\n';
        return exit_code::kInternalError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return exit_code::kInternalError;
    }
}

int cmd_validate(const fs::path& bundle_dir, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            const LogitBundle b = load_bundle(bundle_dir);
            out << fmt::format("ok: {}\n  model {} on {} ({})\n  N={} K={} flops={} params={}\n", bundle_dir.string(),
                               b.meta.model_name, b.meta.dataset, to_string(b.meta.split), b.meta.num_samples,
                               b.meta.num_classes, b.meta.flops, b.meta.params);
        },
        err);
}

int cmd_tune(const TuneArgs& args, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            nlohmann::ordered_json j;
            LogitBundle large = load_split(args.large_val, Split::Val);
            if (args.small_val) {
                LogitBundle small = load_split(*args.small_val, Split::Val);
                const auto pair = make_bundle_pair(std::move(large), std::move(small));
                const TuneResult r = fit_duo_temperatures(pair);
                j["t_large"] = r.weights.t_large;
                j["t_small"] = r.weights.t_small;
                j["val_nll"] = r.val_nll;
                j["iterations"] = r.iterations;
                j["converged"] = r.converged;
            } else {
                const SingleTemperature r = fit_single_temperature(large);
                j["scale"] = r.scale;
                j["val_nll"] = r.val_nll;
            }
            emit(j.dump(2) + "\n", args.out, out);
        },
        err);
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            check_mode_name(args.mode);
            std::optional<DuoWeights> weights = args.weights;
            double scale = args.scale;
            if (args.weights_file) {
                const auto j = read_json(*args.weights_file);
                try {
                    if (j.contains("t_large") && j.contains("t_small")) {
                        weights = DuoWeights{j.at("t_large").get<double>(), j.at("t_small").get<double>()};
                    }
                    if (j.contains("scale")) scale = j.at("scale").get<double>();
                } catch (const nlohmann::json::exception& e) {
                    throw InputError(fmt::format("{}: {}", args.weights_file->string(), e.what()));
                }
            }

            LogitBundle large = load_bundle(args.large);
            MetricRow row;
            if (args.mode == "single") {
                row = evaluate(large, mode::SingleScaled{scale}, args.eval);
            } else {
                if (!args.small) throw InputError(fmt::format("mode {} requires a sidekick bundle", args.mode));
                const auto pair = make_bundle_pair(std::move(large), load_bundle(*args.small));
                row = evaluate(pair, duo_mode(args.mode, weights), args.eval);
            }
            emit(render(std::span(&row, 1), args.output.format), args.output.out, out);
        },
        err);
}

std::vector<MetricRow> run_sweep(const SweepConfig& config) {
    for (const auto& m : config.modes) check_mode_name(m);
    if (config.jobs < 1) throw InputError("--jobs must be >= 1");

    const LogitBundle large_val = load_split(config.large_val, Split::Val);
    const LogitBundle large_test = load_split(config.large_test, Split::Test);
    const SingleTemperature single = fit_single_temperature(large_val);

    std::vector<std::vector<MetricRow>> per_small(config.smalls.size());
    std::vector<std::exception_ptr> failures(config.smalls.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < config.smalls.size(); i = next++) {
            try {
                const auto& [val_dir, test_dir] = config.smalls[i];
                const auto val = make_bundle_pair(large_val, load_split(val_dir, Split::Val));
                const auto test = make_bundle_pair(large_test, load_split(test_dir, Split::Test));
                const TuneResult tuned = fit_duo_temperatures(val);
                for (const auto& m : config.modes) {
                    if (m == "single") continue;
                    per_small[i].push_back(evaluate(test, duo_mode(m, tuned.weights), config.eval));
                }
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    {
        const auto threads = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), config.smalls.size());
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }

    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i]) continue;
        const std::string context = fmt::format("sidekick {}", config.smalls[i].first.string());
        try {
            std::rethrow_exception(failures[i]);
        } catch (const InputError& e) {
            throw InputError(fmt::format("{}: {}", context, e.what()));
        } catch (const InvariantError& e) {
            throw InvariantError(fmt::format("{}: {}", context, e.what()));
        }
    }

    std::vector<MetricRow> rows;
    rows.push_back(evaluate(large_test, mode::SingleScaled{single.scale}, config.eval));
    for (auto& group : per_small) std::move(group.begin(), group.end(), std::back_inserter(rows));
    // Stable: ties keep sidekick order, then mode order; the single row leads.
    std::stable_sort(rows.begin() + 1, rows.end(),
                     [](const MetricRow& a, const MetricRow& b) { return a.balance < b.balance; });
    return rows;
}

int cmd_sweep(const SweepConfig& config, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            const auto rows = run_sweep(config);
            emit(render(rows, config.output.format), config.output.out, out);
        },
        err);
}

int cmd_simulate(const fs::path& spec_file, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    return run_guarded(
        [&] {
            const SimSpec spec = sim_spec_from_json(read_text(spec_file));
            write_simulation(generate(spec), out_dir);
            out << describe(spec);
            out << fmt::format("wrote {}/{{large_val,large_test,small_val,small_test}}\n", out_dir.string());
        },
        err);
}

}  // namespace duo
