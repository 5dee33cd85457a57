#pragma once

#include <optional>
#include <vector>

#include "gdes/harness.hpp"

namespace gdes {

struct FoldEpochEval {
    double val_loss = 0.0;
    double val_err = 0.0;
    double test_loss = 0.0;
    double test_err = 0.0;
};

struct CvResult {
    // fold_series[f][e]: fold f at epoch e (all folds run the full horizon).
    std::vector<std::vector<FoldEpochEval>> fold_series;
    std::vector<double> avg_val_loss;        // elementwise mean across folds
    int cv_stop_epoch = 0;                   // 1-based count of epochs to train
    bool stopped_by_policy = false;          // false => max-epoch fallback
    // Stop epoch of each fold's own validation-loss series, for inspection.
    std::vector<std::optional<int>> per_fold_stop_epochs;
    std::vector<FoldEpochEval> at_stop;      // one entry per fold, at cv_stop_epoch
    std::vector<double> fold_seconds_per_epoch;
};

// k-fold cross-validation: trains one model per fold (identical init seed,
// so fold variance reflects the data split alone), applies the configured
// patience controller to the fold-averaged validation-loss series, and
// reports each fold's test metrics at the resulting stop epoch.
CvResult run_kfold(const ExperimentConfig& config, int k);

// k+-fold: runs k-fold CV, extracts its stop epoch, then retrains on the
// full dataset for exactly that many epochs.
struct KPlusResult {
    CvResult cv;
    double test_loss = 0.0;
    double test_err = 0.0;
    bool used_fallback_epoch = false;   // controller never stopped
    double retrain_seconds_per_epoch = 0.0;
};

KPlusResult run_kplus_fold(const ExperimentConfig& config, int k);

// Appendix-style per-epoch cost model. Times are seconds; the gradient,
// pair-norm, update, and eval terms mirror the measured pipeline.
struct CostModel {
    double grad_seconds = 0.0;        // t1
    double pair_norm_seconds = 0.0;   // t2
    double update_seconds = 0.0;      // t3
    double eval_seconds = 0.0;        // t4
    double batches = 0.0;             // B
    double folds = 0.0;               // k
    double probe_batches = 0.0;       // s

    void validate() const;
};

struct EpochCost {
    double cv_seconds = 0.0;
    double gd_seconds = 0.0;
};

// CV: k * ((k-1)/k * B * (t1+t3) + B/k * t4).
// GD: B * (t1+t3) + s * (t1 + (s-1)/2 * t2).
EpochCost epoch_cost(const CostModel& model);

}  // namespace gdes
