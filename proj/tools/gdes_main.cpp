// Command-line front end: train | sweep | kfold | compare | analyze | cost.
//
// Exit codes: 0 success, 1 configuration error, 2 data/format error,
// 3 numerical divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gdes/crossval.hpp"
#include "gdes/errors.hpp"
#include "gdes/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool quiet = false;
};

gdes::ExperimentConfig load_config(const CommonArgs& args) {
    gdes::ExperimentConfig config = gdes::config_from_json_file(args.config_path);
    if (args.seed) config.seed = *args.seed;
    if (args.out_dir) config.out_dir = *args.out_dir;
    config.validate();
    return config;
}

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    if (out.empty()) throw gdes::ConfigError("empty value list");
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stoull(cell));
    if (out.empty()) throw gdes::ConfigError("empty seed list");
    return out;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--seed", args.seed, "master seed override");
    cmd->add_option("--out", args.out_dir, "output directory override");
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

int run_train(const CommonArgs& args) {
    gdes::ExperimentConfig config = load_config(args);
    fs::create_directories(config.out_dir);
    const gdes::RunResult result = gdes::run_training(config);

    char name[64];
    std::snprintf(name, sizeof(name), "run_train_seed%llu.csv",
                  static_cast<unsigned long long>(config.seed));
    const std::string path = (fs::path(config.out_dir) / name).string();
    gdes::write_run_csv(path, result);

    if (result.diverged) {
        std::cerr << "training diverged at epoch " << result.records.size() << "\n";
        return 3;
    }
    if (!args.quiet) {
        std::cout << "epochs: " << result.records.size() << " (" << result.end_reason << ")\n"
                  << "final test loss: " << result.final_test_loss
                  << "  err: " << result.final_test_err << "\n";
        if (result.stop_t1) std::cout << "t1 stop epoch: " << *result.stop_t1 << "\n";
        if (result.stop_t2) std::cout << "t2 stop epoch: " << *result.stop_t2 << "\n";
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

int run_sweep_cmd(const CommonArgs& args, const std::string& axis_name,
                  const std::string& values_csv, const std::string& seeds_csv, int threads) {
    gdes::ExperimentConfig config = load_config(args);
    gdes::SweepAxis axis;
    if (axis_name == "noise")
        axis = gdes::SweepAxis::NoiseLevels;
    else if (axis_name == "train_size")
        axis = gdes::SweepAxis::TrainSizes;
    else if (axis_name == "batch_size")
        axis = gdes::SweepAxis::BatchSizes;
    else if (axis_name == "width")
        axis = gdes::SweepAxis::Widths;
    else
        throw gdes::ConfigError("unknown sweep axis: " + axis_name);

    const gdes::SweepReport report =
        gdes::run_sweep(config, axis, parse_doubles(values_csv), parse_seeds(seeds_csv), threads);
    const std::string summary = (fs::path(config.out_dir) / "summary.csv").string();
    gdes::write_sweep_summary_csv(summary, report);
    if (!args.quiet) {
        std::cout << report.runs.size() << " runs swept\n";
        if (report.rho_valid)
            std::cout << "rho(gd, test_err) = " << report.rho_gd_test_err
                      << "  rho(gd, test_loss) = " << report.rho_gd_test_loss << "\n";
        std::cout << "wrote " << summary << "\n";
    }
    return 0;
}

int run_kfold_cmd(const CommonArgs& args, int k) {
    gdes::ExperimentConfig config = load_config(args);
    fs::create_directories(config.out_dir);
    const gdes::CvResult result = gdes::run_kfold(config, k);

    const std::string path = (fs::path(config.out_dir) / "kfold.csv").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw gdes::DataFormatError("cannot write " + path);
    out << "fold,epoch,val_loss,val_err,test_loss,test_err,avg_val_loss\n";
    for (std::size_t f = 0; f < result.fold_series.size(); ++f)
        for (std::size_t e = 0; e < result.fold_series[f].size(); ++e) {
            const auto& rec = result.fold_series[f][e];
            char line[256];
            std::snprintf(line, sizeof(line), "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", f, e + 1,
                          rec.val_loss, rec.val_err, rec.test_loss, rec.test_err,
                          result.avg_val_loss[e]);
            out << line;
        }
    if (!args.quiet) {
        std::cout << "cv stop epoch: " << result.cv_stop_epoch
                  << (result.stopped_by_policy ? "" : " (max-epoch fallback)") << "\n";
        double acc = 0.0;
        for (const auto& rec : result.at_stop) acc += 1.0 - rec.test_err;
        std::cout << "mean test accuracy at stop: " << acc / result.at_stop.size() << "\n"
                  << "wrote " << path << "\n";
    }
    return 0;
}

int run_compare(const CommonArgs& args, int k, const std::string& seeds_csv) {
    gdes::ExperimentConfig config = load_config(args);
    fs::create_directories(config.out_dir);

    std::vector<std::uint64_t> seeds;
    if (!seeds_csv.empty())
        seeds = parse_seeds(seeds_csv);
    else
        seeds = {config.seed};

    gdes::ComparisonReport all;
    for (std::uint64_t seed : seeds) {
        gdes::ExperimentConfig run_config = config;
        run_config.seed = seed;
        const gdes::ComparisonReport report = gdes::compare_gd_vs_cv(run_config, k);
        all.rows.insert(all.rows.end(), report.rows.begin(), report.rows.end());
        if (!args.quiet)
            for (const auto& row : report.rows)
                std::cout << "seed " << row.seed << "  " << row.method << ": acc "
                          << 1.0 - row.test_err << "  loss " << row.test_loss << "  stop "
                          << row.stop_epoch << "\n";
    }
    const std::string path = (fs::path(config.out_dir) / "comparison.csv").string();
    gdes::write_comparison_csv(path, all);
    if (!args.quiet) std::cout << "wrote " << path << "\n";
    return 0;
}

int run_analyze(const std::string& dir, bool quiet) {
    const gdes::AnalyzeReport report = gdes::analyze(dir);
    gdes::write_analyze_csv(dir, report);
    if (!quiet) {
        for (const auto& c : report.correlations) {
            std::cout << c.name << " = " << c.value << " (" << c.points << " points)";
            if (!c.note.empty()) std::cout << "  [" << c.note << "]";
            std::cout << "\n";
        }
        for (const auto& s : report.sensitivities)
            std::cout << "sensitivity[" << s.method << ", " << s.outcome << "] = " << s.value
                      << " over " << s.runs << " runs\n";
    }
    return 0;
}

int run_cost(double t1, double t2, double t3, double t4, double batches, double folds,
             double probes) {
    gdes::CostModel model;
    model.grad_seconds = t1;
    model.pair_norm_seconds = t2;
    model.update_seconds = t3;
    model.eval_seconds = t4;
    model.batches = batches;
    model.folds = folds;
    model.probe_batches = probes;
    const gdes::EpochCost cost = gdes::epoch_cost(model);
    std::cout << "cv_seconds_per_epoch: " << cost.cv_seconds << "\n"
              << "gd_seconds_per_epoch: " << cost.gd_seconds << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradient-disparity early-stopping toolkit"};
    app.require_subcommand(1);

    CommonArgs train_args;
    auto* train = app.add_subcommand("train", "run one instrumented training");
    add_common(train, train_args);

    CommonArgs sweep_args;
    std::string sweep_axis, sweep_values, sweep_seeds = "1";
    int sweep_threads = 1;
    auto* sweep = app.add_subcommand("sweep", "run a sweep over one axis");
    add_common(sweep, sweep_args);
    sweep->add_option("--axis", sweep_axis, "noise | train_size | batch_size | width")
        ->required();
    sweep->add_option("--values", sweep_values, "comma-separated axis values")->required();
    sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds");
    sweep->add_option("--threads", sweep_threads, "parallel runs");

    CommonArgs kfold_args;
    int kfold_k = 5;
    auto* kfold = app.add_subcommand("kfold", "k-fold cross-validation");
    add_common(kfold, kfold_args);
    kfold->add_option("-k,--folds", kfold_k, "fold count");

    CommonArgs compare_args;
    int compare_k = 5;
    std::string compare_seeds;
    auto* compare = app.add_subcommand("compare", "GD stopping vs k-fold and k+-fold CV");
    add_common(compare, compare_args);
    compare->add_option("-k,--folds", compare_k, "fold count");
    compare->add_option("--seeds", compare_seeds, "comma-separated seeds (default: config seed)");

    std::string analyze_dir;
    bool analyze_quiet = false;
    auto* analyze_cmd = app.add_subcommand("analyze", "correlations and sensitivity from run CSVs");
    analyze_cmd->add_option("--results", analyze_dir, "directory of run_*.csv files")->required();
    analyze_cmd->add_flag("--quiet", analyze_quiet, "suppress output");

    double cost_t1 = 1.0, cost_t2 = 1.0 / 5.1, cost_t3 = 0.01, cost_t4 = 1.0 / 3.4;
    double cost_b = 100, cost_k = 5, cost_s = 5;
    auto* cost = app.add_subcommand("cost", "per-epoch cost model calculator");
    cost->add_option("--t1", cost_t1, "seconds per gradient");
    cost->add_option("--t2", cost_t2, "seconds per pair norm");
    cost->add_option("--t3", cost_t3, "seconds per update");
    cost->add_option("--t4", cost_t4, "seconds per batch eval");
    cost->add_option("--batches", cost_b, "batches per epoch (B)");
    cost->add_option("--folds", cost_k, "fold count (k)");
    cost->add_option("--probes", cost_s, "probe batches (s)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return run_train(train_args);
        if (sweep->parsed())
            return run_sweep_cmd(sweep_args, sweep_axis, sweep_values, sweep_seeds,
                                 sweep_threads);
        if (kfold->parsed()) return run_kfold_cmd(kfold_args, kfold_k);
        if (compare->parsed()) return run_compare(compare_args, compare_k, compare_seeds);
        if (analyze_cmd->parsed()) return run_analyze(analyze_dir, analyze_quiet);
        if (cost->parsed())
            return run_cost(cost_t1, cost_t2, cost_t3, cost_t4, cost_b, cost_k, cost_s);
    } catch (const gdes::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const gdes::DataFormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const gdes::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
