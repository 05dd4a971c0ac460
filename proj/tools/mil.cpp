// mil: train, sweep, gradient-check and data-generation front end.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sgmil/bagdata/bags.hpp"
#include "sgmil/errors.hpp"
#include "sgmil/kernels/kernels.hpp"
#include "sgmil/milcli/config.hpp"
#include "sgmil/milcli/experiment.hpp"
#include "sgmil/milcli/gradsuite.hpp"
#include "sgmil/milcli/outputs.hpp"
#include "sgmil/version.hpp"

namespace fs = std::filesystem;
using namespace sgmil;

namespace {

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::string out;
    bool force = false;
    bool quiet = false;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--seed", flags.seed, "Run a single seed instead of the configured list");
    cmd->add_option("--out", flags.out, "Output directory (overrides output.dir)");
    cmd->add_flag("--force", flags.force, "Overwrite existing outputs");
    cmd->add_flag("-q,--quiet", flags.quiet, "Suppress per-epoch progress");
    cmd->add_option("--set", flags.overrides, "Override a config field, key=value (repeatable)");
}

milcli::ExperimentConfig resolve(const std::string& path, const CommonFlags& flags) {
    milcli::ExperimentConfig cfg = milcli::load_config(path);
    for (const auto& kv : flags.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        milcli::set_field(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (flags.seed) cfg.seeds = {*flags.seed};
    if (!flags.out.empty()) cfg.output_dir = flags.out;
    cfg.validate();
    return cfg;
}

milcli::LogFn logger(bool quiet) {
    if (quiet) return {};
    return [](const std::string& line) { std::cerr << line << '\n'; };
}

void print_summary(const milcli::ResultTable& table) {
    for (const auto& r : table.runs) {
        std::printf("%s seed=%llu auc=%.4f iou=%.4f final_loss=%.4f (%.1fs)\n",
                    r.axis_value.empty() ? "run" : r.axis_value.c_str(), static_cast<unsigned long long>(r.seed),
                    r.test_auc, r.test_iou, r.final_train_loss(), r.wall_seconds);
    }
}

std::vector<std::string> split_values(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto comma = csv.find(',', start);
        std::string item = csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple-instance learning experiments"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CommonFlags run_flags;
    std::string run_config;
    auto* run = app.add_subcommand("run", "Train and evaluate one configuration for every seed");
    run->add_option("config", run_config, "Config file")->required()->check(CLI::ExistingFile);
    add_common(run, run_flags);

    CommonFlags sweep_flags;
    std::string sweep_config, axis, values;
    auto* sweep = app.add_subcommand("sweep", "Repeat a run over values of one config field");
    sweep->add_option("config", sweep_config, "Config file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--axis", axis, "Config field to vary")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();
    add_common(sweep, sweep_flags);

    milcli::GradSuiteOptions grad_opts;
    double tolerance = 1e-4;
    auto* grads = app.add_subcommand("check-grads", "Finite-difference check of all layers, pools and losses");
    grads->add_option("--trials", grad_opts.trials, "Random instances per component")->capture_default_str();
    grads->add_option("--seed", grad_opts.seed, "Sampling seed")->capture_default_str();
    grads->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();

    CommonFlags gen_flags;
    std::string recipe_file;
    auto* gen = app.add_subcommand("gen-data", "Materialize the train/test bags of a config as bag caches");
    gen->add_option("recipe", recipe_file, "Config or recipe file")->required()->check(CLI::ExistingFile);
    add_common(gen, gen_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = resolve(run_config, run_flags);
            const auto dir = fs::path(cfg.output_dir);
            if (fs::exists(dir / "metrics.csv") && !run_flags.force)
                throw IoError("'" + (dir / "metrics.csv").string() + "' already exists; pass --force to overwrite");
            const auto table = milcli::run_experiment(cfg, logger(run_flags.quiet));
            milcli::emit_outputs(dir, cfg, table, run_flags.force);
            print_summary(table);
            std::printf("wrote %s\n", dir.string().c_str());
        } else if (*sweep) {
            const auto cfg = resolve(sweep_config, sweep_flags);
            const auto dir = fs::path(cfg.output_dir);
            if (fs::exists(dir / "metrics.csv") && !sweep_flags.force)
                throw IoError("'" + (dir / "metrics.csv").string() + "' already exists; pass --force to overwrite");
            const auto table = milcli::run_sweep(cfg, axis, split_values(values), logger(sweep_flags.quiet));
            milcli::emit_outputs(dir, cfg, table, sweep_flags.force);
            print_summary(table);
            std::printf("wrote %s\n", dir.string().c_str());
        } else if (*grads) {
            std::printf("kernels: %s\n", std::string(kernels::active().name).c_str());
            bool ok = true;
            for (const auto& e : milcli::run_gradient_suite(grad_opts)) {
                const bool pass = e.max_relative_error <= tolerance;
                ok = ok && pass;
                std::printf("%-20s trials=%zu max_rel_err=%.3e %s\n", e.component.c_str(), e.trials,
                            e.max_relative_error, pass ? "ok" : "FAIL");
            }
            return ok ? 0 : 1;
        } else if (*gen) {
            const auto cfg = resolve(recipe_file, gen_flags);
            const auto dir = fs::path(cfg.output_dir);
            fs::create_directories(dir);
            milcli::CorpusCache cache;
            for (std::uint64_t seed : cfg.seeds) {
                const auto data = milcli::build_run_data(cfg, seed, cache);
                const std::string stem = "seed" + std::to_string(seed);
                for (const auto& [name, bags] : {std::pair{"train", &data.train}, std::pair{"test", &data.test}}) {
                    const auto path = dir / (stem + "-" + name + ".bags");
                    if (fs::exists(path) && !gen_flags.force)
                        throw IoError("'" + path.string() + "' already exists; pass --force to overwrite");
                    bagdata::save_bags(path, *bags);
                    std::size_t positives = 0;
                    for (const auto& b : *bags) positives += b.labels[0];
                    std::printf("%s: %zu bags (%zu positive)\n", path.string().c_str(), bags->size(), positives);
                }
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
