#include "gdes/crossval.hpp"

#include <cmath>

#include "gdes/errors.hpp"

namespace gdes {

namespace {

double mean_of(const std::vector<double>& values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

}  // namespace

CvResult run_kfold(const ExperimentConfig& config, int k) {
    config.validate();
    if (k < 2) throw ConfigError("fold count must be at least 2");
    if (config.val_fraction > 0.0)
        throw ConfigError("cross-validation manages its own splits; set val_fraction to 0");

    const PreparedData data = prepare_data(config);
    const FoldAssignment folds =
        kfold_assign(data.train.size(), k, derive_seed(config.seed, SeedStream::Folds));

    // Folds never terminate early: the stop decision comes from the
    // fold-averaged validation-loss series, so all series must cover the
    // full horizon.
    RunControls controls;
    controls.allow_policy_termination = false;
    controls.allow_loss_threshold = false;

    CvResult result;
    result.fold_series.resize(static_cast<std::size_t>(k));
    result.fold_seconds_per_epoch.resize(static_cast<std::size_t>(k));

    for (int fold = 0; fold < k; ++fold) {
        const Dataset fold_train = subset(data.train, folds.complement_indices(fold));
        const Dataset fold_val = subset(data.train, folds.fold_indices(fold));

        const RunResult run = train_on(config, fold_train, &fold_val, data.test, controls);
        if (run.val_loss.size() != run.records.size())
            throw NumericError("fold validation series length mismatch");

        auto& series = result.fold_series[static_cast<std::size_t>(fold)];
        series.resize(run.records.size());
        for (std::size_t e = 0; e < run.records.size(); ++e) {
            series[e].val_loss = run.val_loss[e];
            series[e].val_err = run.val_err[e];
            series[e].test_loss = run.records[e].test_loss;
            series[e].test_err = run.records[e].test_err;
        }
        result.fold_seconds_per_epoch[static_cast<std::size_t>(fold)] =
            mean_of(run.epoch_seconds);
    }

    const std::size_t horizon = result.fold_series.front().size();
    for (const auto& series : result.fold_series)
        if (series.size() != horizon) throw NumericError("fold series lengths diverged");

    result.avg_val_loss.resize(horizon, 0.0);
    for (const auto& series : result.fold_series)
        for (std::size_t e = 0; e < horizon; ++e) result.avg_val_loss[e] += series[e].val_loss;
    for (double& v : result.avg_val_loss) v /= static_cast<double>(k);

    const PatiencePolicy policy{config.stopping.patience,
                                config.stopping.terminal == "t2"
                                    ? ThresholdKind::ConsecutiveIncrease
                                    : ThresholdKind::AnyIncrease};
    const std::optional<int> stop = stop_epoch(result.avg_val_loss, policy);
    result.stopped_by_policy = stop.has_value();
    result.cv_stop_epoch = stop.value_or(static_cast<int>(horizon));

    for (const auto& series : result.fold_series) {
        std::vector<double> fold_val_series;
        for (const FoldEpochEval& e : series) fold_val_series.push_back(e.val_loss);
        result.per_fold_stop_epochs.push_back(stop_epoch(fold_val_series, policy));
        result.at_stop.push_back(series[static_cast<std::size_t>(result.cv_stop_epoch - 1)]);
    }
    return result;
}

KPlusResult run_kplus_fold(const ExperimentConfig& config, int k) {
    KPlusResult result;
    result.cv = run_kfold(config, k);
    result.used_fallback_epoch = !result.cv.stopped_by_policy;

    const PreparedData data = prepare_data(config);
    RunControls controls;
    controls.allow_policy_termination = false;
    controls.allow_loss_threshold = false;
    controls.max_epochs_override = result.cv.cv_stop_epoch;

    const RunResult retrain = train_on(config, data.train, nullptr, data.test, controls);
    result.test_loss = retrain.final_test_loss;
    result.test_err = retrain.final_test_err;
    result.retrain_seconds_per_epoch = mean_of(retrain.epoch_seconds);
    return result;
}

void CostModel::validate() const {
    if (grad_seconds <= 0.0 || pair_norm_seconds <= 0.0 || update_seconds <= 0.0 ||
        eval_seconds <= 0.0)
        throw ConfigError("all cost-model times must be positive");
    if (batches < 1.0) throw ConfigError("batch count must be at least 1");
    if (folds < 2.0) throw ConfigError("fold count must be at least 2");
    if (probe_batches < 0.0) throw ConfigError("probe batch count must be nonnegative");
}

EpochCost epoch_cost(const CostModel& model) {
    model.validate();
    EpochCost cost;
    const double train_term = model.batches * (model.grad_seconds + model.update_seconds);
    cost.cv_seconds = model.folds * ((model.folds - 1.0) / model.folds * train_term +
                                     model.batches / model.folds * model.eval_seconds);
    cost.gd_seconds = train_term + model.probe_batches * (model.grad_seconds +
                                                          (model.probe_batches - 1.0) / 2.0 *
                                                              model.pair_norm_seconds);
    return cost;
}

}  // namespace gdes
