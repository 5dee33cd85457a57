#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gdes/data.hpp"
#include "gdes/metrics.hpp"
#include "gdes/net.hpp"
#include "gdes/optim.hpp"
#include "gdes/stopping.hpp"

namespace gdes {

enum class DatasetKind { SyntheticBlobs, MnistIdx, Cifar10Bin };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::SyntheticBlobs;
    std::size_t train_size = 512;
    std::size_t test_size = 2048;
    // Synthetic blobs.
    std::size_t features = 20;
    int classes = 4;
    double spread = 1.0;
    // MNIST IDX file pairs.
    std::string train_images, train_labels, test_images, test_labels;
    // CIFAR-10 binary batches.
    std::vector<std::string> train_files, test_files;
};

struct OptimizerConfig {
    std::string kind = "sgd";   // sgd | momentum | adagrad | adadelta | rmsprop | adam
    double learning_rate = 0.01;
    double decay = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Both patience flavors are tracked on the monitored metric every run and
// logged in the CSV; `terminal` chooses whether one of them actually ends
// training.
struct StoppingConfig {
    std::string metric = "gd";   // gd | val_loss | train_loss | test_loss
    int patience = 5;
    std::string terminal = "none";   // none | t1 | t2
};

struct ExperimentConfig {
    DatasetConfig dataset;
    double noise_fraction = 0.0;
    std::vector<std::size_t> layers;   // input, hidden..., output
    std::string init_scheme = "he_normal";   // he_normal | xavier_uniform
    LossKind loss = LossKind::CrossEntropySoftmax;
    OptimizerConfig optimizer;
    std::size_t batch_size = 128;
    int max_epochs = 40;
    MetricConfig metrics;
    bool metrics_enabled = true;
    StoppingConfig stopping;
    double train_loss_threshold = 0.01;
    double val_fraction = 0.0;   // held-out share for train-val metrics
    int warmup_epochs = 3;       // epochs excluded from aggregated metric means
    std::uint64_t seed = 1;
    std::string out_dir = "runs";

    void validate() const;
};

ExperimentConfig config_from_json_file(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);

// All seed-dependent state is derived from the master seed through fixed
// stream ids, so one integer reproduces an entire run.
enum class SeedStream : std::uint64_t {
    TrainData = 1,
    TestData = 2,
    LabelNoise = 3,
    Init = 4,
    Batches = 5,
    ValSplit = 6,
    ValBatches = 7,
    Folds = 8,
};

std::uint64_t derive_seed(std::uint64_t master, SeedStream stream);

struct RunResult {
    std::vector<MetricRecord> records;
    std::vector<double> val_loss;         // per epoch, when a validation split exists
    std::vector<double> val_err;
    std::vector<double> gd_train_train;   // per epoch, when a validation split exists
    std::vector<double> gd_train_val;     // per epoch, when a validation split exists
    std::optional<int> stop_t1;         // 1-based epoch numbers
    std::optional<int> stop_t2;
    std::string end_reason;   // max_epochs | train_loss_threshold | policy_t1 | policy_t2 | divergence
    bool diverged = false;
    double final_test_loss = 0.0;
    double final_test_err = 0.0;
    std::vector<double> epoch_seconds;
    std::vector<double> final_params;

    // Mean post-warmup gd (and normalized gd) across recorded epochs.
    double mean_gd(int warmup_epochs) const;
    double mean_gd_normalized(int warmup_epochs) const;
};

struct PreparedData {
    Dataset train;
    std::optional<Dataset> val;
    Dataset test;
};

PreparedData prepare_data(const ExperimentConfig& config);

// Knobs for reusing the training loop in contexts that must not terminate
// early (cross-validation folds, the k+ retrain).
struct RunControls {
    bool allow_policy_termination = true;
    bool allow_loss_threshold = true;
    std::optional<int> max_epochs_override;
};

RunResult train_on(const ExperimentConfig& config, const Dataset& train, const Dataset* val,
                   const Dataset& test, const RunControls& controls);

RunResult run_training(const ExperimentConfig& config);

// --- CSV -----------------------------------------------------------------

inline constexpr const char* kRunCsvHeader =
    "epoch,train_loss,test_loss,train_err,test_err,gd,gd_norm,grad_var,cos,inner,sign,"
    "stop_t1,stop_t2";

void write_run_csv(const std::string& path, const RunResult& result);

struct LoadedRun {
    std::vector<MetricRecord> records;
    std::vector<double> gd_train_train;   // from the sidecar file, if present
    std::vector<double> gd_train_val;
};

LoadedRun read_run_csv(const std::string& path);

// --- Sweeps ----------------------------------------------------------------

enum class SweepAxis { NoiseLevels, TrainSizes, BatchSizes, Widths };

struct SweepRunSummary {
    double axis_value = 0.0;
    std::uint64_t seed = 0;
    int epochs_run = 0;
    double mean_gd = 0.0;
    double mean_gd_norm = 0.0;
    double final_test_loss = 0.0;
    double final_test_err = 0.0;
    std::optional<int> stop_t1;
    std::optional<int> stop_t2;
};

struct SweepReport {
    SweepAxis axis = SweepAxis::NoiseLevels;
    std::vector<SweepRunSummary> runs;
    // Pooled over runs: post-warmup mean gd (normalized gd for width sweeps)
    // against the final test error / loss.
    double rho_gd_test_err = 0.0;
    double rho_gd_test_loss = 0.0;
    bool rho_valid = false;
};

SweepReport run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<double>& values, const std::vector<std::uint64_t>& seeds,
                      int threads = 1);

void write_sweep_summary_csv(const std::string& path, const SweepReport& report);

// --- GD vs cross-validation -------------------------------------------------

struct ComparisonRow {
    std::uint64_t seed = 0;
    std::string method;    // gd | kfold | kplus
    int stop_epoch = 0;    // epochs actually trained
    double test_loss = 0.0;
    double test_err = 0.0;
    double seconds_per_epoch = 0.0;
    bool stopped_by_policy = false;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
};

// Runs (a) policy-stopped full-data training, (b) k-fold CV, and (c) k+-fold
// CV with the same seed, and reports the test metrics of each.
ComparisonReport compare_gd_vs_cv(const ExperimentConfig& config, int k);

void write_comparison_csv(const std::string& path, const ComparisonReport& report);

// --- Post-hoc analysis -------------------------------------------------------

struct CorrelationEntry {
    std::string name;
    double value = 0.0;
    std::size_t points = 0;
    std::string note;   // empty on success, otherwise the per-entry error
};

struct SensitivityEntry {
    std::string method;
    std::string outcome;   // accuracy | loss
    double value = 0.0;
    std::size_t runs = 0;
};

struct AnalyzeReport {
    std::vector<CorrelationEntry> correlations;
    std::vector<SensitivityEntry> sensitivities;
};

// Reads every run_*.csv under `results_dir`, pools correlations between gd
// and the test metrics, correlates the two gd variants where a train-val
// sidecar exists, and computes the threshold-sensitivity statistic across
// the 20 standard thresholds (t1/t2, patience 1..10).
AnalyzeReport analyze(const std::string& results_dir);

void write_analyze_csv(const std::string& results_dir, const AnalyzeReport& report);

}  // namespace gdes
