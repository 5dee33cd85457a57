#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gdes/crossval.hpp"
#include "gdes/errors.hpp"
#include "gdes/harness.hpp"

using namespace gdes;

namespace {

ExperimentConfig cv_config() {
    ExperimentConfig cfg;
    cfg.dataset.kind = DatasetKind::SyntheticBlobs;
    cfg.dataset.train_size = 60;
    cfg.dataset.test_size = 120;
    cfg.dataset.features = 6;
    cfg.dataset.classes = 3;
    cfg.dataset.spread = 1.2;
    cfg.noise_fraction = 0.4;
    cfg.layers = {6, 8, 3};
    cfg.batch_size = 10;
    cfg.max_epochs = 8;
    cfg.metrics.batch_count = 2;
    cfg.stopping.patience = 2;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("two-fold cv structure on a tiny dataset") {
    ExperimentConfig cfg = cv_config();
    cfg.dataset.train_size = 10;
    cfg.batch_size = 2;
    cfg.metrics.batch_count = 2;
    cfg.max_epochs = 3;
    const CvResult result = run_kfold(cfg, 2);
    REQUIRE(result.fold_series.size() == 2);
    for (const auto& series : result.fold_series) REQUIRE(series.size() == 3);

    // Each fold trains on half the samples: replay the internal assignment.
    const FoldAssignment folds = kfold_assign(10, 2, derive_seed(cfg.seed, SeedStream::Folds));
    CHECK(folds.fold_indices(0).size() == 5);
    CHECK(folds.fold_indices(1).size() == 5);
    CHECK(folds.complement_indices(0).size() == 5);

    // Validation folds partition the data.
    std::vector<bool> seen(10, false);
    for (int fold = 0; fold < 2; ++fold)
        for (std::size_t idx : folds.fold_indices(fold)) {
            CHECK_FALSE(seen[idx]);
            seen[idx] = true;
        }
    for (bool s : seen) CHECK(s);
}

TEST_CASE("fold-averaged series is the elementwise mean of fold series") {
    const ExperimentConfig cfg = cv_config();
    const CvResult result = run_kfold(cfg, 3);
    REQUIRE(result.fold_series.size() == 3);
    const std::size_t horizon = result.fold_series[0].size();
    REQUIRE(result.avg_val_loss.size() == horizon);
    for (std::size_t e = 0; e < horizon; ++e) {
        double mean = 0.0;
        for (const auto& series : result.fold_series) mean += series[e].val_loss;
        mean /= 3.0;
        CHECK(result.avg_val_loss[e] == doctest::Approx(mean).epsilon(1e-15));
    }
}

TEST_CASE("cv stop epoch comes from the averaged series and indexes at_stop") {
    const ExperimentConfig cfg = cv_config();
    const CvResult result = run_kfold(cfg, 3);
    const PatiencePolicy policy{cfg.stopping.patience, ThresholdKind::AnyIncrease};
    const auto expected = stop_epoch(result.avg_val_loss, policy);
    if (expected.has_value()) {
        CHECK(result.stopped_by_policy);
        CHECK(result.cv_stop_epoch == *expected);
    } else {
        CHECK_FALSE(result.stopped_by_policy);
        CHECK(result.cv_stop_epoch == cfg.max_epochs);
    }
    REQUIRE(result.at_stop.size() == 3);
    for (std::size_t f = 0; f < 3; ++f) {
        const auto& at = result.at_stop[f];
        const auto& direct =
            result.fold_series[f][static_cast<std::size_t>(result.cv_stop_epoch - 1)];
        CHECK(at.test_loss == direct.test_loss);
        CHECK(at.test_err == direct.test_err);
    }
    CHECK(result.per_fold_stop_epochs.size() == 3);
}

TEST_CASE("cv is deterministic in the master seed") {
    const ExperimentConfig cfg = cv_config();
    const CvResult a = run_kfold(cfg, 3);
    const CvResult b = run_kfold(cfg, 3);
    CHECK(a.cv_stop_epoch == b.cv_stop_epoch);
    CHECK(a.avg_val_loss == b.avg_val_loss);
}

TEST_CASE("kfold rejects bad inputs") {
    const ExperimentConfig cfg = cv_config();
    CHECK_THROWS_AS(run_kfold(cfg, 1), ConfigError);
    ExperimentConfig with_val = cfg;
    with_val.val_fraction = 0.2;
    CHECK_THROWS_AS(run_kfold(with_val, 3), ConfigError);
}

TEST_CASE("k-plus retrains on everything for exactly the cv epoch count") {
    const ExperimentConfig cfg = cv_config();
    const KPlusResult kplus = run_kplus_fold(cfg, 3);
    CHECK(kplus.cv.cv_stop_epoch >= 1);
    CHECK(kplus.cv.cv_stop_epoch <= cfg.max_epochs);

    // Replay the contract: a full-data run capped at the cv epoch must give
    // the same test metrics.
    const PreparedData data = prepare_data(cfg);
    RunControls controls;
    controls.allow_policy_termination = false;
    controls.allow_loss_threshold = false;
    controls.max_epochs_override = kplus.cv.cv_stop_epoch;
    const RunResult retrain = train_on(cfg, data.train, nullptr, data.test, controls);
    CHECK(static_cast<int>(retrain.records.size()) == kplus.cv.cv_stop_epoch);
    CHECK(retrain.final_test_loss == kplus.test_loss);
    CHECK(retrain.final_test_err == kplus.test_err);
}

TEST_CASE("epoch cost model matches plug-in arithmetic") {
    CostModel model;
    model.grad_seconds = 1.0;
    model.pair_norm_seconds = 1.0 / 5.1;
    model.update_seconds = 1.0 / 100.0;
    model.eval_seconds = 1.0 / 3.4;
    model.batches = 100;
    model.folds = 5;
    model.probe_batches = 5;

    const EpochCost cost = epoch_cost(model);
    // Independent plug-in evaluation of the two formulas.
    const double cv_expected =
        5.0 * ((4.0 / 5.0) * 100.0 * (1.0 + 0.01) + (100.0 / 5.0) * (1.0 / 3.4));
    const double gd_expected = 100.0 * (1.0 + 0.01) + 5.0 * (1.0 + 2.0 * (1.0 / 5.1));
    CHECK(cost.cv_seconds == doctest::Approx(cv_expected).epsilon(1e-14));
    CHECK(cost.gd_seconds == doctest::Approx(gd_expected).epsilon(1e-14));
    CHECK(cost.cv_seconds == doctest::Approx(433.41176470588235).epsilon(1e-12));
    CHECK(cost.gd_seconds == doctest::Approx(107.96078431372548).epsilon(1e-12));
}

TEST_CASE("epoch cost collapses to pure training at s=0") {
    CostModel model;
    model.grad_seconds = 2.0;
    model.pair_norm_seconds = 0.5;
    model.update_seconds = 0.25;
    model.eval_seconds = 0.125;
    model.batches = 40;
    model.folds = 4;
    model.probe_batches = 0;
    const EpochCost cost = epoch_cost(model);
    CHECK(cost.gd_seconds == doctest::Approx(40.0 * 2.25).epsilon(1e-14));
}

TEST_CASE("cv cost dominates gd cost whenever s < B, and both are monotone") {
    CostModel model;
    model.grad_seconds = 1.0;
    model.pair_norm_seconds = 1.0 / 5.1;
    model.update_seconds = 0.01;
    model.eval_seconds = 1.0 / 3.4;
    model.batches = 50;

    double last_cv = 0.0;
    for (int k = 2; k <= 12; ++k) {
        model.folds = k;
        model.probe_batches = 5;
        const EpochCost cost = epoch_cost(model);
        CHECK(cost.cv_seconds > cost.gd_seconds);
        CHECK(cost.cv_seconds > last_cv);
        last_cv = cost.cv_seconds;
    }

    model.folds = 5;
    double last_gd = 0.0;
    for (int s = 1; s <= 10; ++s) {
        model.probe_batches = s;
        const EpochCost cost = epoch_cost(model);
        CHECK(cost.gd_seconds > last_gd);
        last_gd = cost.gd_seconds;
    }
}

TEST_CASE("cost model validates its inputs") {
    CostModel model;
    CHECK_THROWS_AS(epoch_cost(model), ConfigError);
}
