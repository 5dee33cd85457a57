#include "gdes/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gdes/crossval.hpp"
#include "gdes/errors.hpp"
#include "gdes/rng.hpp"

namespace gdes {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr auto kTrainData = SeedStream::TrainData;
constexpr auto kTestData = SeedStream::TestData;
constexpr auto kLabelNoise = SeedStream::LabelNoise;
constexpr auto kInit = SeedStream::Init;
constexpr auto kBatches = SeedStream::Batches;
constexpr auto kValSplit = SeedStream::ValSplit;
constexpr auto kValBatches = SeedStream::ValBatches;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double mean_of(const std::vector<double>& values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

InitKind parse_init_scheme(const std::string& name) {
    if (name == "he_normal") return InitKind::HeNormal;
    if (name == "xavier_uniform") return InitKind::XavierUniform;
    throw ConfigError("unknown init scheme: " + name);
}

OptimizerState make_optimizer(const OptimizerConfig& cfg) {
    if (cfg.kind == "sgd") return Sgd{cfg.learning_rate};
    if (cfg.kind == "momentum") return Momentum{cfg.learning_rate, cfg.decay, {}};
    if (cfg.kind == "adagrad") return Adagrad{cfg.learning_rate, cfg.epsilon, {}};
    if (cfg.kind == "adadelta" || cfg.kind == "rmsprop")
        return Adadelta{cfg.learning_rate, cfg.decay, cfg.epsilon, {}};
    if (cfg.kind == "adam")
        return Adam{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, {}, {}, 0};
    throw ConfigError("unknown optimizer: " + cfg.kind);
}

double monitored_value(const std::string& metric, const MetricRecord& record,
                       const std::vector<double>& val_loss) {
    if (metric == "gd") return record.gd_mean;
    if (metric == "train_loss") return record.train_loss;
    if (metric == "test_loss") return record.test_loss;
    if (metric == "val_loss") {
        if (val_loss.empty()) throw ConfigError("val_loss monitor requires a validation split");
        return val_loss.back();
    }
    throw ConfigError("unknown stopping metric: " + metric);
}

// Mean gradient disparity across all ordered (train, val) probe pairs.
double cross_average_gd(const std::vector<GradVec>& train_grads,
                        const std::vector<GradVec>& val_grads) {
    if (train_grads.empty() || val_grads.empty())
        throw ConfigError("train-val gradient disparity needs probes on both sides");
    double acc = 0.0;
    for (const GradVec& gt : train_grads)
        for (const GradVec& gv : val_grads) acc += gradient_disparity(gt, gv);
    return acc / (static_cast<double>(train_grads.size()) *
                  static_cast<double>(val_grads.size()));
}

void check_known_keys(const json& obj, const std::vector<std::string>& known,
                      const std::string& where) {
    for (const auto& item : obj.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
    }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, SeedStream stream) {
    Rng rng(master, static_cast<std::uint64_t>(stream));
    return rng.next_u64();
}

void ExperimentConfig::validate() const {
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (layers.size() < 2) throw ConfigError("need at least input and output layer sizes");
    if (noise_fraction < 0.0 || noise_fraction > 1.0)
        throw ConfigError("noise_fraction must lie in [0, 1]");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("val_fraction must lie in [0, 1)");
    if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be nonnegative");
    if (metrics.batch_count < 2) throw ConfigError("metric batch count must be at least 2");
    if (metrics_enabled && metrics.source == MetricSource::TrainVal && val_fraction == 0.0)
        throw ConfigError("train-val metrics require val_fraction > 0");
    if (stopping.patience < 1) throw ConfigError("patience must be at least 1");
    if (stopping.terminal != "none" && stopping.terminal != "t1" && stopping.terminal != "t2")
        throw ConfigError("stopping.terminal must be none, t1 or t2");
    if (stopping.metric == "val_loss" && val_fraction == 0.0)
        throw ConfigError("val_loss monitor requires val_fraction > 0");
    if (train_loss_threshold < 0.0) throw ConfigError("train_loss_threshold must be nonnegative");
    parse_init_scheme(init_scheme);
    make_optimizer(optimizer);
    if (dataset.kind == DatasetKind::SyntheticBlobs) {
        if (layers.front() != dataset.features)
            throw ConfigError("first layer size must equal feature count");
        if (layers.back() != static_cast<std::size_t>(dataset.classes))
            throw ConfigError("last layer size must equal class count");
    }
}

PreparedData prepare_data(const ExperimentConfig& config) {
    PreparedData data;
    switch (config.dataset.kind) {
        case DatasetKind::SyntheticBlobs: {
            data.train = gen_synthetic_blobs(config.dataset.train_size, config.dataset.features,
                                             config.dataset.classes, config.dataset.spread,
                                             derive_seed(config.seed, kTrainData));
            data.test = gen_synthetic_blobs(config.dataset.test_size, config.dataset.features,
                                            config.dataset.classes, config.dataset.spread,
                                            derive_seed(config.seed, kTestData));
            break;
        }
        case DatasetKind::MnistIdx: {
            data.train =
                load_mnist_idx(config.dataset.train_images, config.dataset.train_labels);
            data.test = load_mnist_idx(config.dataset.test_images, config.dataset.test_labels);
            break;
        }
        case DatasetKind::Cifar10Bin: {
            data.train = load_cifar10_bin(config.dataset.train_files);
            data.test = load_cifar10_bin(config.dataset.test_files);
            break;
        }
    }

    // File-backed datasets are subsampled to the requested sizes with a
    // seeded draw; synthetic ones are generated at size already.
    if (config.dataset.kind != DatasetKind::SyntheticBlobs) {
        auto take = [](const Dataset& ds, std::size_t want, std::uint64_t seed) {
            if (want == 0 || want >= ds.size()) return ds;
            Rng rng(seed);
            std::vector<std::size_t> perm = Rng::permutation(ds.size(), rng);
            perm.resize(want);
            return subset(ds, perm);
        };
        data.train = take(data.train, config.dataset.train_size,
                          derive_seed(config.seed, kTrainData));
        data.test =
            take(data.test, config.dataset.test_size, derive_seed(config.seed, kTestData));
    }

    if (config.noise_fraction > 0.0)
        data.train = inject_label_noise(
            data.train, {config.noise_fraction, derive_seed(config.seed, kLabelNoise)});

    if (config.val_fraction > 0.0) {
        const std::size_t n = data.train.size();
        const auto v = static_cast<std::size_t>(
            std::llround(config.val_fraction * static_cast<double>(n)));
        if (v == 0 || v >= n) throw ConfigError("val_fraction leaves an empty split");
        Rng rng(derive_seed(config.seed, kValSplit));
        std::vector<std::size_t> perm = Rng::permutation(n, rng);
        std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<long>(v));
        std::vector<std::size_t> train_idx(perm.begin() + static_cast<long>(v), perm.end());
        data.val = subset(data.train, val_idx);
        data.train = subset(data.train, train_idx);
    }
    return data;
}

RunResult train_on(const ExperimentConfig& config, const Dataset& train, const Dataset* val,
                   const Dataset& test, const RunControls& controls) {
    config.validate();
    if (train.size() == 0) throw ConfigError("empty training set");
    if (train.features() != config.layers.front())
        throw ConfigError("training data width does not match first layer");

    const int max_epochs = controls.max_epochs_override.value_or(config.max_epochs);
    if (max_epochs < 1) throw ConfigError("epoch budget must be at least 1");

    DenseNet net = init_network(config.layers,
                                {parse_init_scheme(config.init_scheme),
                                 derive_seed(config.seed, kInit)});
    OptimizerState optimizer = make_optimizer(config.optimizer);
    std::vector<double> params = net.flatten_params();
    const std::size_t d = params.size();

    const std::uint64_t batch_seed = derive_seed(config.seed, kBatches);
    const std::uint64_t val_batch_seed = derive_seed(config.seed, kValBatches);

    const Batch train_eval = full_batch(train);
    const Batch test_eval = full_batch(test);
    const Batch val_eval = val ? full_batch(*val) : Batch{};

    RunResult result;
    StopState state_t1, state_t2;
    const PatiencePolicy policy_t1{config.stopping.patience, ThresholdKind::AnyIncrease};
    const PatiencePolicy policy_t2{config.stopping.patience, ThresholdKind::ConsecutiveIncrease};

    result.end_reason = "max_epochs";
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        const auto t_start = std::chrono::steady_clock::now();
        const std::vector<Batch> batches =
            epoch_batches(train, config.batch_size, batch_seed, static_cast<std::uint64_t>(epoch));

        bool diverged = false;
        for (const Batch& batch : batches) {
            const ForwardResult fwd = forward(net, batch);
            const GradVec grad = backward(net, fwd.cache, batch.labels, config.loss);
            try {
                step(optimizer, params, grad);
            } catch (const NumericError&) {
                diverged = true;
                break;
            }
            net.load_params(params);
        }

        MetricRecord record;
        record.epoch = epoch;

        if (config.metrics_enabled && !diverged) {
            const auto probe_count =
                std::min<std::size_t>(batches.size(),
                                      static_cast<std::size_t>(config.metrics.batch_count));
            if (probe_count < 2)
                throw ConfigError("metrics need at least two batches per epoch");
            const std::vector<Batch> probes(batches.begin(),
                                            batches.begin() + static_cast<long>(probe_count));
            const MetricGradients train_probes =
                metric_gradients(net, probes, config.metrics.rescale, config.loss);
            record.degenerate_rescale = train_probes.degenerate;

            const double gd_tt = average_gd(train_probes.gradients);
            record.grad_variance = variance_of_gradients(train_probes.gradients);

            double cos_acc = 0.0, inner_acc = 0.0, sign_acc = 0.0;
            std::size_t pairs = 0;
            for (std::size_t i = 0; i < train_probes.gradients.size(); ++i)
                for (std::size_t j = i + 1; j < train_probes.gradients.size(); ++j) {
                    const PairSimilarity sim =
                        cosine_inner_sign(train_probes.gradients[i], train_probes.gradients[j]);
                    cos_acc += sim.cosine;
                    inner_acc += sim.inner;
                    sign_acc += sim.sign;
                    ++pairs;
                }
            record.cosine_mean = cos_acc / static_cast<double>(pairs);
            record.inner_mean = inner_acc / static_cast<double>(pairs);
            record.sign_mean = sign_acc / static_cast<double>(pairs);

            double gd_tv = 0.0;
            if (val) {
                const std::vector<Batch> val_all = epoch_batches(
                    *val, config.batch_size, val_batch_seed, static_cast<std::uint64_t>(epoch));
                const auto val_count = std::min<std::size_t>(
                    val_all.size(), static_cast<std::size_t>(config.metrics.batch_count));
                const std::vector<Batch> val_probes(
                    val_all.begin(), val_all.begin() + static_cast<long>(val_count));
                const MetricGradients vp =
                    metric_gradients(net, val_probes, config.metrics.rescale, config.loss);
                record.degenerate_rescale = record.degenerate_rescale || vp.degenerate;
                gd_tv = cross_average_gd(train_probes.gradients, vp.gradients);
                result.gd_train_train.push_back(gd_tt);
                result.gd_train_val.push_back(gd_tv);
            }

            record.gd_mean =
                (config.metrics.source == MetricSource::TrainVal) ? gd_tv : gd_tt;
            record.gd_normalized = normalized_gd(record.gd_mean, d);
        }

        const EvalResult on_train = evaluate(net, train_eval, config.loss);
        const EvalResult on_test = evaluate(net, test_eval, config.loss);
        record.train_loss = on_train.loss;
        record.test_loss = on_test.loss;
        record.train_err = on_train.error;
        record.test_err = on_test.error;
        if (val) {
            const EvalResult on_val = evaluate(net, val_eval, config.loss);
            result.val_loss.push_back(on_val.loss);
            result.val_err.push_back(on_val.error);
        }

        if (!diverged && !std::isfinite(record.train_loss)) diverged = true;

        result.records.push_back(record);
        result.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count());

        if (diverged) {
            result.diverged = true;
            result.end_reason = "divergence";
            break;
        }

        const double monitored =
            monitored_value(config.stopping.metric, record, result.val_loss);
        const bool t1_fired =
            observe(state_t1, policy_t1, epoch, monitored) == StopDecision::Stop;
        const bool t2_fired =
            observe(state_t2, policy_t2, epoch, monitored) == StopDecision::Stop;
        if (t1_fired && !result.stop_t1) result.stop_t1 = state_t1.stopped_at;
        if (t2_fired && !result.stop_t2) result.stop_t2 = state_t2.stopped_at;

        if (controls.allow_loss_threshold && record.train_loss < config.train_loss_threshold) {
            result.end_reason = "train_loss_threshold";
            break;
        }
        if (controls.allow_policy_termination && config.stopping.terminal == "t1" && t1_fired) {
            result.end_reason = "policy_t1";
            break;
        }
        if (controls.allow_policy_termination && config.stopping.terminal == "t2" && t2_fired) {
            result.end_reason = "policy_t2";
            break;
        }
    }

    result.final_test_loss = result.records.back().test_loss;
    result.final_test_err = result.records.back().test_err;
    result.final_params = std::move(params);
    return result;
}

RunResult run_training(const ExperimentConfig& config) {
    config.validate();
    const PreparedData data = prepare_data(config);
    return train_on(config, data.train, data.val ? &*data.val : nullptr, data.test,
                    RunControls{});
}

double RunResult::mean_gd(int warmup_epochs) const {
    std::vector<double> tail;
    for (const MetricRecord& r : records)
        if (r.epoch > warmup_epochs) tail.push_back(r.gd_mean);
    if (tail.empty()) throw ConfigError("no post-warmup epochs recorded");
    return mean_of(tail);
}

double RunResult::mean_gd_normalized(int warmup_epochs) const {
    std::vector<double> tail;
    for (const MetricRecord& r : records)
        if (r.epoch > warmup_epochs) tail.push_back(r.gd_normalized);
    if (tail.empty()) throw ConfigError("no post-warmup epochs recorded");
    return mean_of(tail);
}

// --- config JSON -------------------------------------------------------------

ExperimentConfig config_from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    check_known_keys(root,
                     {"dataset", "noise_fraction", "layers", "init_scheme", "loss", "optimizer",
                      "batch_size", "max_epochs", "metrics", "metrics_enabled", "stopping",
                      "train_loss_threshold", "val_fraction", "warmup_epochs", "seed", "out_dir"},
                     "config");

    ExperimentConfig cfg;
    try {
        if (root.contains("dataset")) {
            const json& ds = root["dataset"];
            check_known_keys(ds,
                             {"kind", "train_size", "test_size", "features", "classes", "spread",
                              "train_images", "train_labels", "test_images", "test_labels",
                              "train_files", "test_files"},
                             "dataset");
            const std::string kind = ds.value("kind", "synthetic_blobs");
            if (kind == "synthetic_blobs")
                cfg.dataset.kind = DatasetKind::SyntheticBlobs;
            else if (kind == "mnist_idx")
                cfg.dataset.kind = DatasetKind::MnistIdx;
            else if (kind == "cifar10_bin")
                cfg.dataset.kind = DatasetKind::Cifar10Bin;
            else
                throw ConfigError("unknown dataset kind: " + kind);
            cfg.dataset.train_size = ds.value("train_size", cfg.dataset.train_size);
            cfg.dataset.test_size = ds.value("test_size", cfg.dataset.test_size);
            cfg.dataset.features = ds.value("features", cfg.dataset.features);
            cfg.dataset.classes = ds.value("classes", cfg.dataset.classes);
            cfg.dataset.spread = ds.value("spread", cfg.dataset.spread);
            cfg.dataset.train_images = ds.value("train_images", "");
            cfg.dataset.train_labels = ds.value("train_labels", "");
            cfg.dataset.test_images = ds.value("test_images", "");
            cfg.dataset.test_labels = ds.value("test_labels", "");
            if (ds.contains("train_files"))
                cfg.dataset.train_files = ds["train_files"].get<std::vector<std::string>>();
            if (ds.contains("test_files"))
                cfg.dataset.test_files = ds["test_files"].get<std::vector<std::string>>();
        }
        cfg.noise_fraction = root.value("noise_fraction", cfg.noise_fraction);
        if (root.contains("layers")) cfg.layers = root["layers"].get<std::vector<std::size_t>>();
        cfg.init_scheme = root.value("init_scheme", cfg.init_scheme);
        const std::string loss = root.value("loss", "cross_entropy");
        if (loss == "cross_entropy")
            cfg.loss = LossKind::CrossEntropySoftmax;
        else if (loss == "mse")
            cfg.loss = LossKind::MeanSquareError;
        else
            throw ConfigError("unknown loss: " + loss);
        if (root.contains("optimizer")) {
            const json& opt = root["optimizer"];
            check_known_keys(
                opt, {"kind", "learning_rate", "decay", "beta1", "beta2", "epsilon"}, "optimizer");
            cfg.optimizer.kind = opt.value("kind", cfg.optimizer.kind);
            cfg.optimizer.learning_rate = opt.value("learning_rate", cfg.optimizer.learning_rate);
            cfg.optimizer.decay = opt.value("decay", cfg.optimizer.decay);
            cfg.optimizer.beta1 = opt.value("beta1", cfg.optimizer.beta1);
            cfg.optimizer.beta2 = opt.value("beta2", cfg.optimizer.beta2);
            cfg.optimizer.epsilon = opt.value("epsilon", cfg.optimizer.epsilon);
        }
        cfg.batch_size = root.value("batch_size", cfg.batch_size);
        cfg.max_epochs = root.value("max_epochs", cfg.max_epochs);
        if (root.contains("metrics")) {
            const json& m = root["metrics"];
            check_known_keys(m, {"batch_count", "rescale", "source"}, "metrics");
            cfg.metrics.batch_count = m.value("batch_count", cfg.metrics.batch_count);
            const std::string rescale = m.value("rescale", "std");
            if (rescale == "none")
                cfg.metrics.rescale = RescaleMode::None;
            else if (rescale == "std")
                cfg.metrics.rescale = RescaleMode::StdRescale;
            else if (rescale == "minmax")
                cfg.metrics.rescale = RescaleMode::MinMaxNormalize;
            else
                throw ConfigError("unknown rescale mode: " + rescale);
            const std::string source = m.value("source", "train_train");
            if (source == "train_train")
                cfg.metrics.source = MetricSource::TrainTrain;
            else if (source == "train_val")
                cfg.metrics.source = MetricSource::TrainVal;
            else
                throw ConfigError("unknown metric source: " + source);
        }
        cfg.metrics_enabled = root.value("metrics_enabled", cfg.metrics_enabled);
        if (root.contains("stopping")) {
            const json& st = root["stopping"];
            check_known_keys(st, {"metric", "patience", "terminal"}, "stopping");
            cfg.stopping.metric = st.value("metric", cfg.stopping.metric);
            cfg.stopping.patience = st.value("patience", cfg.stopping.patience);
            cfg.stopping.terminal = st.value("terminal", cfg.stopping.terminal);
        }
        cfg.train_loss_threshold = root.value("train_loss_threshold", cfg.train_loss_threshold);
        cfg.val_fraction = root.value("val_fraction", cfg.val_fraction);
        cfg.warmup_epochs = root.value("warmup_epochs", cfg.warmup_epochs);
        cfg.seed = root.value("seed", cfg.seed);
        cfg.out_dir = root.value("out_dir", cfg.out_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return config_from_json_text(buffer.str());
}

std::string config_to_json_text(const ExperimentConfig& config) {
    json ds;
    switch (config.dataset.kind) {
        case DatasetKind::SyntheticBlobs:
            ds["kind"] = "synthetic_blobs";
            ds["features"] = config.dataset.features;
            ds["classes"] = config.dataset.classes;
            ds["spread"] = config.dataset.spread;
            break;
        case DatasetKind::MnistIdx:
            ds["kind"] = "mnist_idx";
            ds["train_images"] = config.dataset.train_images;
            ds["train_labels"] = config.dataset.train_labels;
            ds["test_images"] = config.dataset.test_images;
            ds["test_labels"] = config.dataset.test_labels;
            break;
        case DatasetKind::Cifar10Bin:
            ds["kind"] = "cifar10_bin";
            ds["train_files"] = config.dataset.train_files;
            ds["test_files"] = config.dataset.test_files;
            break;
    }
    ds["train_size"] = config.dataset.train_size;
    ds["test_size"] = config.dataset.test_size;

    json root;
    root["dataset"] = ds;
    root["noise_fraction"] = config.noise_fraction;
    root["layers"] = config.layers;
    root["init_scheme"] = config.init_scheme;
    root["loss"] = (config.loss == LossKind::CrossEntropySoftmax) ? "cross_entropy" : "mse";
    root["optimizer"] = {{"kind", config.optimizer.kind},
                         {"learning_rate", config.optimizer.learning_rate},
                         {"decay", config.optimizer.decay},
                         {"beta1", config.optimizer.beta1},
                         {"beta2", config.optimizer.beta2},
                         {"epsilon", config.optimizer.epsilon}};
    root["batch_size"] = config.batch_size;
    root["max_epochs"] = config.max_epochs;
    const char* rescale = "std";
    if (config.metrics.rescale == RescaleMode::None) rescale = "none";
    if (config.metrics.rescale == RescaleMode::MinMaxNormalize) rescale = "minmax";
    root["metrics"] = {{"batch_count", config.metrics.batch_count},
                       {"rescale", rescale},
                       {"source", config.metrics.source == MetricSource::TrainVal
                                      ? "train_val"
                                      : "train_train"}};
    root["metrics_enabled"] = config.metrics_enabled;
    root["stopping"] = {{"metric", config.stopping.metric},
                        {"patience", config.stopping.patience},
                        {"terminal", config.stopping.terminal}};
    root["train_loss_threshold"] = config.train_loss_threshold;
    root["val_fraction"] = config.val_fraction;
    root["warmup_epochs"] = config.warmup_epochs;
    root["seed"] = config.seed;
    root["out_dir"] = config.out_dir;
    return root.dump(2);
}

// --- CSV ----------------------------------------------------------------------

void write_run_csv(const std::string& path, const RunResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFormatError("cannot write " + path);
    out << kRunCsvHeader << "\n";
    for (const MetricRecord& r : result.records) {
        const int t1 = (result.stop_t1 && *result.stop_t1 <= r.epoch) ? 1 : 0;
        const int t2 = (result.stop_t2 && *result.stop_t2 <= r.epoch) ? 1 : 0;
        out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.test_loss)
            << ',' << format_double(r.train_err) << ',' << format_double(r.test_err) << ','
            << format_double(r.gd_mean) << ',' << format_double(r.gd_normalized) << ','
            << format_double(r.grad_variance) << ',' << format_double(r.cosine_mean) << ','
            << format_double(r.inner_mean) << ',' << format_double(r.sign_mean) << ',' << t1
            << ',' << t2 << "\n";
    }
    if (!result.gd_train_val.empty()) {
        const std::string sidecar = path.substr(0, path.size() - 4) + "_trainval.csv";
        std::ofstream side(sidecar, std::ios::binary);
        if (!side) throw DataFormatError("cannot write " + sidecar);
        side << "epoch,gd_train_train,gd_train_val\n";
        for (std::size_t i = 0; i < result.gd_train_val.size(); ++i) {
            side << result.records[i].epoch << ',' << format_double(result.gd_train_train[i])
                 << ',' << format_double(result.gd_train_val[i]) << "\n";
        }
    }
}

LoadedRun read_run_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataFormatError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataFormatError("empty CSV: " + path);
    if (line != kRunCsvHeader) throw DataFormatError("unexpected CSV header in " + path);

    LoadedRun run;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 13) throw DataFormatError("malformed CSV row in " + path);
        MetricRecord r;
        r.epoch = std::stoi(cells[0]);
        r.train_loss = std::stod(cells[1]);
        r.test_loss = std::stod(cells[2]);
        r.train_err = std::stod(cells[3]);
        r.test_err = std::stod(cells[4]);
        r.gd_mean = std::stod(cells[5]);
        r.gd_normalized = std::stod(cells[6]);
        r.grad_variance = std::stod(cells[7]);
        r.cosine_mean = std::stod(cells[8]);
        r.inner_mean = std::stod(cells[9]);
        r.sign_mean = std::stod(cells[10]);
        run.records.push_back(r);
    }

    const std::string sidecar = path.substr(0, path.size() - 4) + "_trainval.csv";
    std::ifstream side(sidecar);
    if (side) {
        std::getline(side, line);   // header
        while (std::getline(side, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() != 3) throw DataFormatError("malformed sidecar row in " + sidecar);
            run.gd_train_train.push_back(std::stod(cells[1]));
            run.gd_train_val.push_back(std::stod(cells[2]));
        }
    }
    return run;
}

// --- sweeps --------------------------------------------------------------------

namespace {

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value) {
    ExperimentConfig cfg = base;
    switch (axis) {
        case SweepAxis::NoiseLevels:
            cfg.noise_fraction = value;
            break;
        case SweepAxis::TrainSizes:
            cfg.dataset.train_size = static_cast<std::size_t>(value);
            break;
        case SweepAxis::BatchSizes:
            cfg.batch_size = static_cast<std::size_t>(value);
            break;
        case SweepAxis::Widths: {
            if (cfg.layers.size() < 3)
                throw ConfigError("width sweep needs at least one hidden layer");
            for (std::size_t i = 1; i + 1 < cfg.layers.size(); ++i)
                cfg.layers[i] = static_cast<std::size_t>(value);
            break;
        }
    }
    return cfg;
}

const char* axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::NoiseLevels: return "noise";
        case SweepAxis::TrainSizes: return "train_size";
        case SweepAxis::BatchSizes: return "batch_size";
        case SweepAxis::Widths: return "width";
    }
    return "axis";
}

}  // namespace

SweepReport run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<double>& values, const std::vector<std::uint64_t>& seeds,
                      int threads) {
    if (values.empty() || seeds.empty()) throw ConfigError("sweep needs values and seeds");
    base.validate();
    fs::create_directories(base.out_dir);

    struct Job {
        ExperimentConfig config;
        double value;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double value : values)
        for (std::uint64_t seed : seeds) {
            ExperimentConfig cfg = apply_axis(base, axis, value);
            cfg.seed = seed;
            jobs.push_back({std::move(cfg), value, seed});
        }

    std::vector<RunResult> results(jobs.size());
    const int workers = std::max(1, threads);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs.size());
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                try {
                    results[i] = run_training(jobs[i].config);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);

    SweepReport report;
    report.axis = axis;
    std::vector<double> pooled_gd, pooled_err, pooled_loss;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const RunResult& run = results[i];
        char name[160];
        std::snprintf(name, sizeof(name), "run_%s_%g_seed%llu.csv", axis_name(axis),
                      jobs[i].value, static_cast<unsigned long long>(jobs[i].seed));
        write_run_csv((fs::path(base.out_dir) / name).string(), run);

        SweepRunSummary summary;
        summary.axis_value = jobs[i].value;
        summary.seed = jobs[i].seed;
        summary.epochs_run = static_cast<int>(run.records.size());
        summary.mean_gd = run.mean_gd(base.warmup_epochs);
        summary.mean_gd_norm = run.mean_gd_normalized(base.warmup_epochs);
        summary.final_test_loss = run.final_test_loss;
        summary.final_test_err = run.final_test_err;
        summary.stop_t1 = run.stop_t1;
        summary.stop_t2 = run.stop_t2;
        report.runs.push_back(summary);

        pooled_gd.push_back(axis == SweepAxis::Widths ? summary.mean_gd_norm : summary.mean_gd);
        pooled_err.push_back(summary.final_test_err);
        pooled_loss.push_back(summary.final_test_loss);
    }

    if (pooled_gd.size() >= 2) {
        try {
            report.rho_gd_test_err = pearson(pooled_gd, pooled_err);
            report.rho_gd_test_loss = pearson(pooled_gd, pooled_loss);
            report.rho_valid = true;
        } catch (const NumericError&) {
            report.rho_valid = false;
        }
    }
    return report;
}

void write_sweep_summary_csv(const std::string& path, const SweepReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFormatError("cannot write " + path);
    out << "axis,value,seed,epochs_run,mean_gd,mean_gd_norm,final_test_loss,final_test_err,"
           "stop_t1,stop_t2\n";
    for (const SweepRunSummary& s : report.runs) {
        out << axis_name(report.axis) << ',' << format_double(s.axis_value) << ',' << s.seed
            << ',' << s.epochs_run << ',' << format_double(s.mean_gd) << ','
            << format_double(s.mean_gd_norm) << ',' << format_double(s.final_test_loss) << ','
            << format_double(s.final_test_err) << ',' << (s.stop_t1 ? *s.stop_t1 : -1) << ','
            << (s.stop_t2 ? *s.stop_t2 : -1) << "\n";
    }
    out << "# rho_gd_test_err," << format_double(report.rho_gd_test_err) << "\n";
    out << "# rho_gd_test_loss," << format_double(report.rho_gd_test_loss) << "\n";
}

// --- GD vs CV -------------------------------------------------------------------

ComparisonReport compare_gd_vs_cv(const ExperimentConfig& config, int k) {
    config.validate();

    ComparisonReport report;

    // (a) policy-stopped training on the full dataset.
    ExperimentConfig gd_config = config;
    if (gd_config.stopping.terminal == "none") gd_config.stopping.terminal = "t1";
    const RunResult gd_run = run_training(gd_config);
    ComparisonRow gd_row;
    gd_row.seed = config.seed;
    gd_row.method = "gd";
    gd_row.stop_epoch = static_cast<int>(gd_run.records.size());
    gd_row.test_loss = gd_run.final_test_loss;
    gd_row.test_err = gd_run.final_test_err;
    gd_row.seconds_per_epoch = mean_of(gd_run.epoch_seconds);
    gd_row.stopped_by_policy =
        gd_run.end_reason == "policy_t1" || gd_run.end_reason == "policy_t2";
    report.rows.push_back(gd_row);

    // (b) k-fold CV.
    const CvResult cv = run_kfold(config, k);
    ComparisonRow cv_row;
    cv_row.seed = config.seed;
    cv_row.method = "kfold";
    cv_row.stop_epoch = cv.cv_stop_epoch;
    double loss_acc = 0.0, err_acc = 0.0;
    for (const FoldEpochEval& e : cv.at_stop) {
        loss_acc += e.test_loss;
        err_acc += e.test_err;
    }
    cv_row.test_loss = loss_acc / static_cast<double>(cv.at_stop.size());
    cv_row.test_err = err_acc / static_cast<double>(cv.at_stop.size());
    double cv_epoch_seconds = 0.0;
    for (double s : cv.fold_seconds_per_epoch) cv_epoch_seconds += s;
    cv_row.seconds_per_epoch = cv_epoch_seconds;
    cv_row.stopped_by_policy = cv.stopped_by_policy;
    report.rows.push_back(cv_row);

    // (c) k+-fold CV: retrain on everything, stop at the CV epoch.
    const KPlusResult kplus = run_kplus_fold(config, k);
    ComparisonRow kp_row;
    kp_row.seed = config.seed;
    kp_row.method = "kplus";
    kp_row.stop_epoch = kplus.cv.cv_stop_epoch;
    kp_row.test_loss = kplus.test_loss;
    kp_row.test_err = kplus.test_err;
    kp_row.seconds_per_epoch = kplus.retrain_seconds_per_epoch;
    kp_row.stopped_by_policy = !kplus.used_fallback_epoch;
    report.rows.push_back(kp_row);

    return report;
}

void write_comparison_csv(const std::string& path, const ComparisonReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFormatError("cannot write " + path);
    out << "seed,method,stop_epoch,test_loss,test_err,test_acc,seconds_per_epoch,"
           "stopped_by_policy\n";
    for (const ComparisonRow& r : report.rows) {
        out << r.seed << ',' << r.method << ',' << r.stop_epoch << ','
            << format_double(r.test_loss) << ',' << format_double(r.test_err) << ','
            << format_double(1.0 - r.test_err) << ',' << format_double(r.seconds_per_epoch)
            << ',' << (r.stopped_by_policy ? 1 : 0) << "\n";
    }
}

// --- analyze ---------------------------------------------------------------------

AnalyzeReport analyze(const std::string& results_dir) {
    std::vector<std::string> run_files;
    if (!fs::is_directory(results_dir))
        throw DataFormatError("not a directory: " + results_dir);
    for (const auto& entry : fs::directory_iterator(results_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("run_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".csv" &&
            name.find("_trainval.csv") == std::string::npos)
            run_files.push_back(entry.path().string());
    }
    std::sort(run_files.begin(), run_files.end());
    if (run_files.empty()) throw DataFormatError("no run_*.csv files in " + results_dir);

    std::vector<LoadedRun> runs;
    runs.reserve(run_files.size());
    for (const auto& path : run_files) runs.push_back(read_run_csv(path));

    AnalyzeReport report;

    auto pooled_correlation = [&](const std::string& name, auto&& getx, auto&& gety) {
        std::vector<double> xs, ys;
        for (const LoadedRun& run : runs)
            for (const MetricRecord& r : run.records) {
                xs.push_back(getx(r));
                ys.push_back(gety(r));
            }
        CorrelationEntry entry;
        entry.name = name;
        entry.points = xs.size();
        try {
            entry.value = pearson(xs, ys);
        } catch (const std::exception& e) {
            entry.value = std::nan("");
            entry.note = e.what();
        }
        report.correlations.push_back(entry);
    };

    pooled_correlation(
        "gd_vs_test_loss", [](const MetricRecord& r) { return r.gd_mean; },
        [](const MetricRecord& r) { return r.test_loss; });
    pooled_correlation(
        "gd_vs_test_err", [](const MetricRecord& r) { return r.gd_mean; },
        [](const MetricRecord& r) { return r.test_err; });

    // Train-train vs train-val gd where sidecars exist: one point per epoch.
    {
        std::vector<double> tt, tv;
        for (const LoadedRun& run : runs) {
            for (std::size_t i = 0; i < run.gd_train_val.size(); ++i) {
                tt.push_back(run.gd_train_train[i]);
                tv.push_back(run.gd_train_val[i]);
            }
        }
        if (!tt.empty()) {
            CorrelationEntry entry;
            entry.name = "gd_train_train_vs_train_val";
            entry.points = tt.size();
            try {
                entry.value = pearson(tt, tv);
            } catch (const std::exception& e) {
                entry.value = std::nan("");
                entry.note = e.what();
            }
            report.correlations.push_back(entry);
        }
    }

    // Threshold sensitivity of gd-based stopping: outcomes across the 20
    // standard thresholds per run, then sum of std/mean across runs.
    {
        std::vector<OutcomeStats> acc_sets, loss_sets;
        for (const LoadedRun& run : runs) {
            std::vector<double> gd_series;
            for (const MetricRecord& r : run.records) gd_series.push_back(r.gd_mean);
            std::vector<double> accs, losses;
            for (int kind = 0; kind < 2; ++kind)
                for (int p = 1; p <= 10; ++p) {
                    const PatiencePolicy policy{
                        p, kind == 0 ? ThresholdKind::AnyIncrease
                                     : ThresholdKind::ConsecutiveIncrease};
                    const std::optional<int> stop = stop_epoch(gd_series, policy);
                    const std::size_t idx =
                        stop ? static_cast<std::size_t>(*stop - 1) : run.records.size() - 1;
                    accs.push_back(1.0 - run.records[idx].test_err);
                    losses.push_back(run.records[idx].test_loss);
                }
            auto stats = [](const std::vector<double>& v) {
                const double m = mean_of(v);
                double sq = 0.0;
                for (double x : v) sq += (x - m) * (x - m);
                return OutcomeStats{m, std::sqrt(sq / static_cast<double>(v.size()))};
            };
            acc_sets.push_back(stats(accs));
            loss_sets.push_back(stats(losses));
        }
        auto safe_sensitivity = [&](const std::vector<OutcomeStats>& sets) {
            try {
                return sensitivity(sets);
            } catch (const NumericError&) {
                return std::nan("");
            }
        };
        report.sensitivities.push_back(
            {"gd", "accuracy", safe_sensitivity(acc_sets), runs.size()});
        report.sensitivities.push_back(
            {"gd", "loss", safe_sensitivity(loss_sets), runs.size()});
    }
    return report;
}

void write_analyze_csv(const std::string& results_dir, const AnalyzeReport& report) {
    const fs::path dir(results_dir);
    {
        std::ofstream out(dir / "correlations.csv", std::ios::binary);
        if (!out) throw DataFormatError("cannot write correlations.csv");
        out << "name,value,points,note\n";
        for (const CorrelationEntry& e : report.correlations)
            out << e.name << ',' << format_double(e.value) << ',' << e.points << ',' << e.note
                << "\n";
    }
    {
        std::ofstream out(dir / "sensitivity.csv", std::ios::binary);
        if (!out) throw DataFormatError("cannot write sensitivity.csv");
        out << "method,outcome,sensitivity,runs\n";
        for (const SensitivityEntry& e : report.sensitivities)
            out << e.method << ',' << e.outcome << ',' << format_double(e.value) << ',' << e.runs
                << "\n";
    }
}

}  // namespace gdes
