#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdforge/data.hpp"
#include "crowdforge/mlp.hpp"
#include "crowdforge/parameter_store.hpp"
#include "crowdforge/rng.hpp"

namespace crowdforge {

// The four parameterizations of the label selector g(i, l, x, h). Every
// variant squashes through a sigmoid, so scores live strictly in (0, 1):
//   Simple        g(i)       = sigmoid(w_i)
//   ClassWise     g(i, l)    = sigmoid(w_{i,l})            classification only
//   TargetWise    g(i, l)    = sigmoid((l*w_i + b_i)^d0)   regression only
//   FeatureBased  g(i, x, h) = sigmoid(W_i . h(x))
enum class SelectorKind { kSimple, kClassWise, kTargetWise, kFeatureBased };

inline std::string to_string(SelectorKind kind) {
    switch (kind) {
    case SelectorKind::kSimple: return "simple";
    case SelectorKind::kClassWise: return "class_wise";
    case SelectorKind::kTargetWise: return "target_wise";
    case SelectorKind::kFeatureBased: return "feature_based";
    }
    throw ContractError("unknown selector kind");
}

inline SelectorKind selector_kind_from_string(const std::string& s) {
    if (s == "simple") return SelectorKind::kSimple;
    if (s == "class_wise") return SelectorKind::kClassWise;
    if (s == "target_wise") return SelectorKind::kTargetWise;
    if (s == "feature_based") return SelectorKind::kFeatureBased;
    throw ValidationError("unknown selector kind: " + s);
}

inline void ensure_selector_applicable(SelectorKind kind, TaskKind task) {
    if (kind == SelectorKind::kClassWise && task != TaskKind::kClassification)
        throw ContractError("class_wise selector applies to classification only");
    if (kind == SelectorKind::kTargetWise && task != TaskKind::kRegression)
        throw ContractError("target_wise selector applies to regression only");
}

struct Selector {
    SelectorKind kind = SelectorKind::kSimple;
    std::size_t n_workers = 0;
    std::size_t num_classes = 0; // ClassWise
    std::size_t feature_dim = 0; // FeatureBased: dim of h(x)
    int exponent = 3;            // TargetWise d0, positive odd
    ParameterStore::GroupId weights = 0;
    ParameterStore::GroupId biases = 0; // TargetWise only
    bool has_bias = false;
};

// Parameter shapes: Simple |I|, ClassWise |I|xK, TargetWise |I| + |I| biases,
// FeatureBased |I| x dim(h). Scalar parameters start at 0 so every initial
// score is sigmoid(0) = 0.5; FeatureBased weights start uniform in [-0.01, 0.01].
inline Selector init_selector(SelectorKind kind, std::size_t n_workers, std::size_t num_classes,
                              std::size_t feature_dim, int exponent, ParameterStore& store,
                              Rng& rng, const std::string& prefix = "selector") {
    if (n_workers == 0) throw ContractError("init_selector: worker count must be positive");
    Selector sel;
    sel.kind = kind;
    sel.n_workers = n_workers;
    sel.exponent = exponent;
    switch (kind) {
    case SelectorKind::kSimple:
        sel.weights = store.add_group(prefix + ".w", {n_workers});
        break;
    case SelectorKind::kClassWise:
        if (num_classes < 2) throw ContractError("init_selector: class_wise needs K >= 2");
        sel.num_classes = num_classes;
        sel.weights = store.add_group(prefix + ".w", {n_workers, num_classes});
        break;
    case SelectorKind::kTargetWise:
        if (exponent < 1 || exponent % 2 == 0)
            throw ContractError("init_selector: d0 must be a positive odd integer");
        sel.weights = store.add_group(prefix + ".w", {n_workers});
        sel.biases = store.add_group(prefix + ".b", {n_workers});
        sel.has_bias = true;
        break;
    case SelectorKind::kFeatureBased:
        if (feature_dim == 0)
            throw ContractError("init_selector: feature_based needs the h(x) dimension");
        sel.feature_dim = feature_dim;
        sel.weights = store.add_group(prefix + ".w", {n_workers, feature_dim});
        for (double& v : store.values(sel.weights)) v = rng.uniform(-0.01, 0.01);
        break;
    }
    return sel;
}

inline Selector find_selector(SelectorKind kind, std::size_t n_workers, std::size_t num_classes,
                              std::size_t feature_dim, int exponent, const ParameterStore& store,
                              const std::string& prefix = "selector") {
    Selector sel;
    sel.kind = kind;
    sel.n_workers = n_workers;
    sel.num_classes = num_classes;
    sel.feature_dim = feature_dim;
    sel.exponent = exponent;
    sel.weights = store.group_id(prefix + ".w");
    if (kind == SelectorKind::kTargetWise) {
        sel.biases = store.group_id(prefix + ".b");
        sel.has_bias = true;
    }
    return sel;
}

namespace detail {

inline std::size_t class_index(const Selector& sel, double label) {
    if (label != std::floor(label) || label < 0.0 ||
        label >= static_cast<double>(sel.num_classes))
        throw ContractError("class_wise selector: label is not a class index");
    return static_cast<std::size_t>(label);
}

inline void check_worker(const Selector& sel, std::size_t worker) {
    if (worker >= sel.n_workers) throw ContractError("selector: worker index out of range");
}

} // namespace detail

// Records the selector score for one annotation on the tape. `hidden` is the
// h(x) node vector; only FeatureBased reads it (and backpropagates into it).
inline NodeId select_score(Tape& tape, ParamBinding& bind, const Selector& sel,
                           std::size_t worker, double label,
                           std::span<const NodeId> hidden = {}) {
    detail::check_worker(sel, worker);
    switch (sel.kind) {
    case SelectorKind::kSimple:
        return tape.sigmoid(bind(sel.weights, worker));
    case SelectorKind::kClassWise: {
        const std::size_t l = detail::class_index(sel, label);
        return tape.sigmoid(bind(sel.weights, worker * sel.num_classes + l));
    }
    case SelectorKind::kTargetWise: {
        const NodeId w = bind(sel.weights, worker);
        const NodeId b = bind(sel.biases, worker);
        const NodeId l = tape.leaf(label);
        const NodeId pre = tape.linear(b, std::span<const NodeId>(&w, 1),
                                       std::span<const NodeId>(&l, 1));
        return tape.sigmoid(tape.pow_odd(pre, sel.exponent));
    }
    case SelectorKind::kFeatureBased: {
        if (hidden.size() != sel.feature_dim)
            throw ContractError("feature_based selector: hidden vector missing or mis-sized");
        std::vector<NodeId> row(sel.feature_dim);
        for (std::size_t j = 0; j < sel.feature_dim; ++j)
            row[j] = bind(sel.weights, worker * sel.feature_dim + j);
        return tape.sigmoid(tape.dot(row, hidden));
    }
    }
    throw ContractError("unknown selector kind");
}

// Tape-free score, used for reporting after training.
inline double selector_score_value(const Selector& sel, const ParameterStore& store,
                                   std::size_t worker, double label,
                                   std::span<const double> hidden = {}) {
    detail::check_worker(sel, worker);
    const auto sigmoid = [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    };
    const auto weights = store.values(sel.weights);
    switch (sel.kind) {
    case SelectorKind::kSimple:
        return sigmoid(weights[worker]);
    case SelectorKind::kClassWise:
        return sigmoid(weights[worker * sel.num_classes + detail::class_index(sel, label)]);
    case SelectorKind::kTargetWise: {
        const double pre = label * weights[worker] + store.values(sel.biases)[worker];
        double powed = 1.0;
        for (int k = 0; k < sel.exponent; ++k) powed *= pre;
        return sigmoid(powed);
    }
    case SelectorKind::kFeatureBased: {
        if (hidden.size() != sel.feature_dim)
            throw ContractError("feature_based selector: hidden vector missing or mis-sized");
        double acc = 0.0;
        for (std::size_t j = 0; j < sel.feature_dim; ++j)
            acc += weights[worker * sel.feature_dim + j] * hidden[j];
        return sigmoid(acc);
    }
    }
    throw ContractError("unknown selector kind");
}

// Arithmetic mean of the selector score over each worker's annotations;
// workers with no annotations come back absent rather than zero.
inline std::vector<std::optional<double>> mean_score_per_worker(
    const Selector& sel, const ParameterStore& store, const MlpSpec& spec,
    const MlpParams& params, const Dataset& data, const AnnotationSet& annotations) {
    if (annotations.size() == 0)
        throw ContractError("mean_score_per_worker: empty annotation set");

    // h(x) is only needed for the feature-based variant
    std::vector<std::vector<double>> hidden;
    if (sel.kind == SelectorKind::kFeatureBased) {
        hidden.resize(data.size());
        for (std::size_t n = 0; n < data.size(); ++n)
            hidden[n] = forward_mlp_values(spec, params, store, data.x(n)).hidden;
    }

    std::vector<double> sums(sel.n_workers, 0.0);
    std::vector<std::size_t> counts(sel.n_workers, 0);
    for (const Annotation& a : annotations.triples()) {
        const std::span<const double> h =
            sel.kind == SelectorKind::kFeatureBased ? std::span<const double>(hidden[a.sample])
                                                    : std::span<const double>();
        sums[a.worker] += selector_score_value(sel, store, a.worker, a.label, h);
        ++counts[a.worker];
    }

    std::vector<std::optional<double>> means(sel.n_workers);
    for (std::size_t i = 0; i < sel.n_workers; ++i)
        if (counts[i] > 0) means[i] = sums[i] / static_cast<double>(counts[i]);
    return means;
}

} // namespace crowdforge
