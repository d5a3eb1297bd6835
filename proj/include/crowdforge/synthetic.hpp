#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "crowdforge/data.hpp"
#include "crowdforge/rng.hpp"

namespace crowdforge {

struct SyntheticData {
    Dataset data;
    AnnotationSet annotations;
    std::vector<WorkerProfile> profiles;
};

namespace detail {

inline std::size_t draw_categorical(Rng& rng, std::span<const double> probs) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) return k;
    }
    return probs.size() - 1; // guards against rounding in the row sum
}

} // namespace detail

// K isotropic Gaussian clusters with means `separation` apart (placed on the
// coordinate axes, so d >= K is required); ground truth is the cluster id.
// Each worker labels each sample with probability p_label, drawing the emitted
// label from the confusion-matrix row of the true class.
inline SyntheticData generate_synthetic_classification(std::size_t n_samples, std::size_t d,
                                                       std::size_t num_classes,
                                                       const std::vector<WorkerProfile>& profiles,
                                                       double separation, std::uint64_t seed) {
    if (num_classes < 2) throw ContractError("generate_synthetic_classification: K must be >= 2");
    if (d < num_classes)
        throw ValidationError(
            "generate_synthetic_classification: need feature dim >= K for cluster placement");
    for (const WorkerProfile& w : profiles) {
        w.validate();
        if (w.kind != WorkerProfile::Kind::kConfusion || w.num_classes != num_classes)
            throw ValidationError("classification generator requires K-class confusion profiles");
    }

    Rng rng(seed);
    Dataset data;
    data.task = TaskKind::kClassification;
    data.feature_dim = d;
    data.num_classes = num_classes;
    data.features.reserve(n_samples);
    data.ground_truth.reserve(n_samples);

    // mean_k = (separation / sqrt(2)) e_k gives pairwise distances = separation
    const double radius = separation / std::numbers::sqrt2;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const auto cls = static_cast<std::size_t>(rng.uniform_int(num_classes));
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j) x[j] = rng.gaussian();
        x[cls] += radius;
        data.features.push_back(std::move(x));
        data.ground_truth.push_back(static_cast<double>(cls));
    }

    std::vector<Annotation> triples;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const auto truth = static_cast<std::size_t>(data.ground_truth[n]);
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            if (rng.uniform() >= profiles[i].p_label) continue;
            const std::span<const double> row{
                profiles[i].confusion.data() + truth * num_classes, num_classes};
            const std::size_t emitted = detail::draw_categorical(rng, row);
            triples.push_back({n, i, static_cast<double>(emitted)});
        }
    }

    return SyntheticData{std::move(data),
                         AnnotationSet(n_samples, profiles.size(), num_classes,
                                       std::move(triples)),
                         profiles};
}

enum class TargetFunction { kLinear, kSine, kLinearSine };

inline std::string to_string(TargetFunction fn) {
    switch (fn) {
    case TargetFunction::kLinear: return "linear";
    case TargetFunction::kSine: return "sine";
    case TargetFunction::kLinearSine: return "linear_sine";
    }
    throw ContractError("unknown target function");
}

inline TargetFunction target_function_from_string(const std::string& s) {
    if (s == "linear") return TargetFunction::kLinear;
    if (s == "sine") return TargetFunction::kSine;
    if (s == "linear_sine") return TargetFunction::kLinearSine;
    throw ValidationError("unknown target function: " + s);
}

inline double evaluate_target(TargetFunction fn, std::span<const double> x) {
    double u = 0.0;
    for (double v : x) u += v;
    u /= std::sqrt(static_cast<double>(x.size()));
    switch (fn) {
    case TargetFunction::kLinear: return u;
    case TargetFunction::kSine: return std::sin(std::numbers::pi * u);
    case TargetFunction::kLinearSine:
        return u + 0.5 * std::sin(2.0 * std::numbers::pi * u);
    }
    throw ContractError("unknown target function");
}

// Features drawn uniformly from [-1, 1]^d; ground truth y = f(x) for the
// chosen target; worker i emits scale*y + bias + N(0, noise_std^2) for each
// sample it labels.
inline SyntheticData generate_synthetic_regression(std::size_t n_samples, std::size_t d,
                                                   const std::vector<WorkerProfile>& profiles,
                                                   TargetFunction target, std::uint64_t seed) {
    if (d == 0) throw ContractError("generate_synthetic_regression: d must be positive");
    for (const WorkerProfile& w : profiles) {
        w.validate();
        if (w.kind != WorkerProfile::Kind::kAffineNoise)
            throw ValidationError("regression generator requires affine_noise profiles");
    }

    Rng rng(seed);
    Dataset data;
    data.task = TaskKind::kRegression;
    data.feature_dim = d;
    data.features.reserve(n_samples);
    data.ground_truth.reserve(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        std::vector<double> x(d);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        data.ground_truth.push_back(evaluate_target(target, x));
        data.features.push_back(std::move(x));
    }

    std::vector<Annotation> triples;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const double y = data.ground_truth[n];
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            const WorkerProfile& w = profiles[i];
            if (rng.uniform() >= w.p_label) continue;
            const double label = w.scale * y + w.bias + w.noise_std * rng.gaussian();
            triples.push_back({n, i, label});
        }
    }

    return SyntheticData{std::move(data),
                         AnnotationSet(n_samples, profiles.size(), 0, std::move(triples)),
                         profiles};
}

} // namespace crowdforge
