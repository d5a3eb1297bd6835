#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "crowdforge/adam.hpp"
#include "crowdforge/aggregation.hpp"
#include "crowdforge/crowd_layer.hpp"
#include "crowdforge/data.hpp"
#include "crowdforge/lsl_loss.hpp"
#include "crowdforge/metrics.hpp"
#include "crowdforge/mlp.hpp"
#include "crowdforge/selectors.hpp"

namespace crowdforge {

enum class TrainMethod { kLsl, kCrowdLayer, kAggregateThenTrain, kGroundTruth };

inline std::string to_string(TrainMethod method) {
    switch (method) {
    case TrainMethod::kLsl: return "lsl";
    case TrainMethod::kCrowdLayer: return "crowd_layer";
    case TrainMethod::kAggregateThenTrain: return "aggregate_then_train";
    case TrainMethod::kGroundTruth: return "ground_truth";
    }
    throw ContractError("unknown train method");
}

inline TrainMethod train_method_from_string(const std::string& s) {
    if (s == "lsl") return TrainMethod::kLsl;
    if (s == "crowd_layer") return TrainMethod::kCrowdLayer;
    if (s == "aggregate_then_train") return TrainMethod::kAggregateThenTrain;
    if (s == "ground_truth") return TrainMethod::kGroundTruth;
    throw ValidationError("unknown train method: " + s);
}

enum class AggregationKind { kMajorityVote, kDawidSkene, kAverage };

inline std::string to_string(AggregationKind kind) {
    switch (kind) {
    case AggregationKind::kMajorityVote: return "mv";
    case AggregationKind::kDawidSkene: return "ds";
    case AggregationKind::kAverage: return "avg";
    }
    throw ContractError("unknown aggregation kind");
}

inline AggregationKind aggregation_from_string(const std::string& s) {
    if (s == "mv") return AggregationKind::kMajorityVote;
    if (s == "ds") return AggregationKind::kDawidSkene;
    if (s == "avg") return AggregationKind::kAverage;
    throw ValidationError("unknown aggregation kind: " + s);
}

struct TrainConfig {
    TaskKind task = TaskKind::kClassification;
    TrainMethod method = TrainMethod::kLsl;
    SelectorKind selector = SelectorKind::kSimple;
    CrowdLayerVariant crowd_variant = CrowdLayerVariant::kMW;
    AggregationKind aggregation = AggregationKind::kMajorityVote;
    double coverage_target = 0.5; // c
    double penalty_weight = 32.0; // lambda
    int exponent = 3;             // d0
    double coverage_epsilon = 1e-8;
    double learning_rate = 0.01;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 50;
    std::size_t patience = 10;
    std::size_t pretrain_epochs = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ValidationError("train config: batch size must be >= 1");
        if (max_epochs < 1) throw ValidationError("train config: max epochs must be >= 1");
        if (!(coverage_target > 0.0) || coverage_target > 1.0)
            throw ValidationError("train config: coverage target must be in (0, 1]");
        if (!(penalty_weight > 0.0))
            throw ValidationError("train config: penalty weight must be positive");
        if (!(learning_rate > 0.0))
            throw ValidationError("train config: learning rate must be positive");
        if (exponent < 1 || exponent % 2 == 0)
            throw ValidationError("train config: d0 must be a positive odd integer");
    }

    LossConfig loss_config() const {
        LossConfig config;
        config.coverage_target = coverage_target;
        config.penalty_weight = penalty_weight;
        config.coverage_epsilon = coverage_epsilon;
        config.task = task;
        return config;
    }
};

struct EpochRecord {
    double train_loss = 0.0;
    std::optional<double> mean_coverage; // annotation-weighted batch phi, LSL only
    double valid_metric = 0.0;           // accuracy (classification) or RMSE (regression)
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;

    bool operator==(const TrainHistory& other) const {
        if (best_epoch != other.best_epoch || epochs.size() != other.epochs.size())
            return false;
        for (std::size_t e = 0; e < epochs.size(); ++e) {
            if (epochs[e].train_loss != other.epochs[e].train_loss ||
                epochs[e].mean_coverage != other.epochs[e].mean_coverage ||
                epochs[e].valid_metric != other.epochs[e].valid_metric)
                return false;
        }
        return true;
    }
};

inline std::vector<std::vector<double>> predict_logits(const MlpSpec& spec,
                                                       const MlpParams& mlp,
                                                       const ParameterStore& store,
                                                       const Dataset& data) {
    std::vector<std::vector<double>> out;
    out.reserve(data.size());
    for (std::size_t n = 0; n < data.size(); ++n)
        out.push_back(forward_mlp_values(spec, mlp, store, data.x(n)).output);
    return out;
}

inline std::vector<double> predict_scalars(const MlpSpec& spec, const MlpParams& mlp,
                                           const ParameterStore& store, const Dataset& data) {
    std::vector<double> out;
    out.reserve(data.size());
    for (std::size_t n = 0; n < data.size(); ++n)
        out.push_back(forward_mlp_values(spec, mlp, store, data.x(n)).output[0]);
    return out;
}

// Validation metric from f(x) alone: accuracy (higher better) for
// classification, RMSE (lower better) for regression.
inline double validation_metric(TaskKind task, const MlpSpec& spec, const MlpParams& mlp,
                                const ParameterStore& store, const Dataset& data) {
    if (!data.has_ground_truth())
        throw ContractError("validation_metric: dataset lacks ground truth");
    if (task == TaskKind::kClassification) {
        std::size_t correct = 0;
        for (std::size_t n = 0; n < data.size(); ++n) {
            const auto logits = forward_mlp_values(spec, mlp, store, data.x(n)).output;
            const auto predicted =
                std::max_element(logits.begin(), logits.end()) - logits.begin();
            if (predicted == data.class_label(n)) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(data.size());
    }
    double sq = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) {
        const double diff =
            forward_mlp_values(spec, mlp, store, data.x(n)).output[0] - data.ground_truth[n];
        sq += diff * diff;
    }
    return std::sqrt(sq / static_cast<double>(data.size()));
}

inline bool metric_improves(TaskKind task, double candidate, double incumbent) {
    return task == TaskKind::kClassification ? candidate > incumbent : candidate < incumbent;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n_samples,
                                                          std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) order[n] = n;
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < n_samples; at += batch_size) {
        const std::size_t end = std::min(at + batch_size, n_samples);
        batches.emplace_back(order.begin() + at, order.begin() + end);
    }
    return batches;
}

inline void check_finite_loss(double value, std::size_t epoch, std::size_t batch) {
    if (!std::isfinite(value))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch));
}

// Plain supervised epochs over (features, labels); updates the store in place
// and returns the final per-label mean training loss.
inline double supervised_epochs(ParameterStore& store, const MlpSpec& spec,
                                const MlpParams& mlp, const Dataset& data,
                                std::span<const double> labels, const TrainConfig& config,
                                std::size_t epochs, Rng& shuffle_rng, long& adam_steps) {
    const AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
    double last_epoch_loss = 0.0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        const auto batches = make_batches(data.size(), config.batch_size, shuffle_rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Tape tape;
            ParamBinding bind(tape, store);
            std::vector<NodeId> losses;
            losses.reserve(batches[b].size());
            for (std::size_t n : batches[b]) {
                const MlpNodes nodes = forward_mlp(tape, bind, spec, mlp, data.x(n));
                losses.push_back(label_loss(tape, config.task, nodes.output, labels[n]));
            }
            const NodeId batch_loss = tape.mean(losses);
            check_finite_loss(tape.value(batch_loss), epoch, b);
            store.zero_gradients();
            reverse_gradients(tape, batch_loss, bind);
            adam_step(store, adam, ++adam_steps);
            loss_sum += tape.value(batch_loss) * static_cast<double>(losses.size());
            loss_count += losses.size();
        }
        last_epoch_loss = loss_sum / static_cast<double>(loss_count);
    }
    return last_epoch_loss;
}

} // namespace detail

// Majority-vote pretraining: `epochs` supervised epochs on the MV labels.
// With epochs = 0 the parameters are untouched.
inline void pretrain_with_mv(ParameterStore& store, const MlpSpec& spec, const MlpParams& mlp,
                             const Dataset& data, const AnnotationSet& annotations,
                             std::size_t epochs, const TrainConfig& config, Rng& shuffle_rng) {
    if (config.task != TaskKind::kClassification)
        throw ContractError("pretrain_with_mv: classification only");
    if (epochs == 0) return;
    const std::vector<int> votes = majority_vote(annotations, data.num_classes);
    std::vector<double> labels(votes.begin(), votes.end());
    long adam_steps = 0;
    detail::supervised_epochs(store, spec, mlp, data, labels, config, epochs, shuffle_rng,
                              adam_steps);
}

template <typename EpochBody>
TrainHistory early_stopping_loop(ParameterStore& store, const TrainConfig& config,
                                 EpochBody&& body) {
    TrainHistory history;
    double best_metric = 0.0;
    std::vector<std::vector<double>> best_values = store.snapshot_values();
    std::size_t since_improvement = 0;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const EpochRecord record = body(epoch);
        history.epochs.push_back(record);
        if (history.epochs.size() == 1 ||
            metric_improves(config.task, record.valid_metric, best_metric)) {
            best_metric = record.valid_metric;
            history.best_epoch = epoch;
            best_values = store.snapshot_values();
            since_improvement = 0;
        } else if (++since_improvement > config.patience) {
            break;
        }
    }
    store.restore_values(best_values);
    return history;
}

struct LslTrainResult {
    ParameterStore store;
    MlpParams model;
    Selector selector;
    TrainHistory history;
};

// Trains f and the label selector jointly on the selective objective. The
// inference path stays selector-free: the validation metric and all
// predictions use f(x) only.
inline LslTrainResult train_lsl(const MlpSpec& spec, SelectorKind selector_kind,
                                const Dataset& train_data,
                                const AnnotationSet& train_annotations,
                                const Dataset& valid_data, const TrainConfig& config) {
    config.validate();
    spec.validate();
    ensure_selector_applicable(selector_kind, config.task);
    if (train_annotations.size() == 0)
        throw ContractError("train_lsl: empty training annotations");
    if (train_annotations.n_samples() != train_data.size())
        throw ContractError("train_lsl: annotations do not match the training data");
    if (!valid_data.has_ground_truth())
        throw ContractError("train_lsl: validation split needs ground truth");

    LslTrainResult result;
    Rng init_rng(config.seed);
    result.model = init_mlp_params(spec, result.store, init_rng);
    if (config.pretrain_epochs > 0) {
        Rng pre_rng = init_rng.derive(1);
        pretrain_with_mv(result.store, spec, result.model, train_data, train_annotations,
                         config.pretrain_epochs, config, pre_rng);
        result.store.reset_optimizer_state();
    }
    // selector parameters start fresh after the pretraining handoff
    result.selector = init_selector(selector_kind, train_annotations.n_workers(),
                                    train_data.num_classes, spec.feature_dim(),
                                    config.exponent, result.store, init_rng);

    const LossConfig loss_config = config.loss_config();
    const AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
    Rng shuffle_rng = init_rng.derive(2);
    long adam_steps = 0;

    result.history = early_stopping_loop(result.store, config, [&](std::size_t epoch) {
        double loss_sum = 0.0, phi_sum = 0.0;
        std::size_t annotation_count = 0;
        const auto batches =
            detail::make_batches(train_data.size(), config.batch_size, shuffle_rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Tape tape;
            ParamBinding bind(tape, result.store);
            std::vector<NodeId> losses, scores;
            for (std::size_t n : batches[b]) {
                const auto subset = train_annotations.for_sample(n);
                if (subset.empty()) continue;
                const MlpNodes nodes =
                    forward_mlp(tape, bind, spec, result.model, train_data.x(n));
                for (std::size_t t : subset) {
                    const Annotation& a = train_annotations.triple(t);
                    losses.push_back(
                        label_loss(tape, config.task, nodes.output, a.label));
                    scores.push_back(select_score(tape, bind, result.selector, a.worker,
                                                  a.label, nodes.hidden));
                }
            }
            if (losses.empty()) continue; // batch of entirely unannotated samples
            const LslBatchLoss batch = lsl_batch_loss(tape, losses, scores, loss_config);
            detail::check_finite_loss(tape.value(batch.total), epoch, b);
            result.store.zero_gradients();
            reverse_gradients(tape, batch.total, bind);
            adam_step(result.store, adam, ++adam_steps);

            loss_sum += tape.value(batch.total) * static_cast<double>(losses.size());
            phi_sum += tape.value(batch.phi) * static_cast<double>(losses.size());
            annotation_count += losses.size();
        }
        EpochRecord record;
        record.train_loss = loss_sum / static_cast<double>(annotation_count);
        record.mean_coverage = phi_sum / static_cast<double>(annotation_count);
        record.valid_metric =
            validation_metric(config.task, spec, result.model, result.store, valid_data);
        return record;
    });
    return result;
}

struct CrowdLayerTrainResult {
    ParameterStore store;
    MlpParams model;
    CrowdLayerParams crowd;
    TrainHistory history;
};

// Crowd Layer training: each annotation's loss is taken against the worker's
// transformed output; the objective is the plain mean over annotations. The
// crowd layer is bypassed at inference.
inline CrowdLayerTrainResult train_crowd_layer(const MlpSpec& spec, CrowdLayerVariant variant,
                                               const Dataset& train_data,
                                               const AnnotationSet& train_annotations,
                                               const Dataset& valid_data,
                                               const TrainConfig& config) {
    config.validate();
    spec.validate();
    ensure_crowd_layer_applicable(variant, config.task);
    if (train_annotations.size() == 0)
        throw ContractError("train_crowd_layer: empty training annotations");
    if (train_annotations.n_samples() != train_data.size())
        throw ContractError("train_crowd_layer: annotations do not match the training data");
    if (!valid_data.has_ground_truth())
        throw ContractError("train_crowd_layer: validation split needs ground truth");

    CrowdLayerTrainResult result;
    Rng init_rng(config.seed);
    result.model = init_mlp_params(spec, result.store, init_rng);
    if (config.pretrain_epochs > 0) {
        Rng pre_rng = init_rng.derive(1);
        pretrain_with_mv(result.store, spec, result.model, train_data, train_annotations,
                         config.pretrain_epochs, config, pre_rng);
        result.store.reset_optimizer_state();
    }
    result.crowd = init_crowd_layer(variant, train_annotations.n_workers(),
                                    train_data.num_classes, result.store);

    const AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
    Rng shuffle_rng = init_rng.derive(2);
    long adam_steps = 0;

    result.history = early_stopping_loop(result.store, config, [&](std::size_t epoch) {
        double loss_sum = 0.0;
        std::size_t annotation_count = 0;
        const auto batches =
            detail::make_batches(train_data.size(), config.batch_size, shuffle_rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Tape tape;
            ParamBinding bind(tape, result.store);
            std::vector<NodeId> losses;
            for (std::size_t n : batches[b]) {
                const auto subset = train_annotations.for_sample(n);
                if (subset.empty()) continue;
                const MlpNodes nodes =
                    forward_mlp(tape, bind, spec, result.model, train_data.x(n));
                for (std::size_t t : subset) {
                    const Annotation& a = train_annotations.triple(t);
                    const auto transformed =
                        crowd_layer_forward(tape, bind, result.crowd, nodes.output, a.worker);
                    losses.push_back(label_loss(tape, config.task, transformed, a.label));
                }
            }
            if (losses.empty()) continue;
            const NodeId batch_loss = tape.mean(losses);
            detail::check_finite_loss(tape.value(batch_loss), epoch, b);
            result.store.zero_gradients();
            reverse_gradients(tape, batch_loss, bind);
            adam_step(result.store, adam, ++adam_steps);
            loss_sum += tape.value(batch_loss) * static_cast<double>(losses.size());
            annotation_count += losses.size();
        }
        EpochRecord record;
        record.train_loss = loss_sum / static_cast<double>(annotation_count);
        record.valid_metric =
            validation_metric(config.task, spec, result.model, result.store, valid_data);
        return record;
    });
    return result;
}

struct SupervisedTrainResult {
    ParameterStore store;
    MlpParams model;
    TrainHistory history;
};

// Standard supervised training on the given per-sample labels.
inline SupervisedTrainResult train_supervised(const MlpSpec& spec, const Dataset& train_data,
                                              std::span<const double> labels,
                                              const Dataset& valid_data,
                                              const TrainConfig& config) {
    config.validate();
    spec.validate();
    if (labels.size() != train_data.size())
        throw ContractError("train_supervised: labels do not match the training data");
    if (!valid_data.has_ground_truth())
        throw ContractError("train_supervised: validation split needs ground truth");

    SupervisedTrainResult result;
    Rng init_rng(config.seed);
    result.model = init_mlp_params(spec, result.store, init_rng);

    Rng shuffle_rng = init_rng.derive(2);
    long adam_steps = 0;
    result.history = early_stopping_loop(result.store, config, [&](std::size_t epoch) {
        EpochRecord record;
        record.train_loss =
            detail::supervised_epochs(result.store, spec, result.model, train_data, labels,
                                      config, 1, shuffle_rng, adam_steps);
        (void)epoch;
        record.valid_metric =
            validation_metric(config.task, spec, result.model, result.store, valid_data);
        return record;
    });
    return result;
}

// Aggregates annotations once (majority vote, Dawid-Skene, or averaging) and
// trains a standard supervised model on the result.
inline SupervisedTrainResult train_on_aggregated(const MlpSpec& spec,
                                                 AggregationKind aggregation,
                                                 const Dataset& train_data,
                                                 const AnnotationSet& train_annotations,
                                                 const Dataset& valid_data,
                                                 const TrainConfig& config) {
    if (config.task == TaskKind::kClassification &&
        aggregation == AggregationKind::kAverage)
        throw ContractError("train_on_aggregated: averaging applies to regression");
    if (config.task == TaskKind::kRegression && aggregation != AggregationKind::kAverage)
        throw ContractError("train_on_aggregated: mv/ds apply to classification");

    std::vector<double> labels;
    switch (aggregation) {
    case AggregationKind::kMajorityVote: {
        const auto votes = majority_vote(train_annotations, train_data.num_classes);
        labels.assign(votes.begin(), votes.end());
        break;
    }
    case AggregationKind::kDawidSkene: {
        const auto votes =
            dawid_skene(train_annotations, train_data.num_classes).hard_labels();
        labels.assign(votes.begin(), votes.end());
        break;
    }
    case AggregationKind::kAverage:
        labels = average_vote(train_annotations);
        break;
    }
    return train_supervised(spec, train_data, labels, valid_data, config);
}

} // namespace crowdforge
