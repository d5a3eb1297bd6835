#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdforge/error.hpp"
#include "crowdforge/rng.hpp"

namespace crowdforge {

enum class TaskKind { kClassification, kRegression };

inline std::string to_string(TaskKind task) {
    return task == TaskKind::kClassification ? "classification" : "regression";
}

inline TaskKind task_from_string(const std::string& s) {
    if (s == "classification") return TaskKind::kClassification;
    if (s == "regression") return TaskKind::kRegression;
    throw ValidationError("unknown task kind: " + s);
}

// Ordered samples with feature vectors and (optionally) ground-truth labels.
// Classification labels are class indices in {0,...,K-1} stored as doubles to
// share the container with regression scores.
struct Dataset {
    TaskKind task = TaskKind::kClassification;
    std::size_t feature_dim = 0;
    std::size_t num_classes = 0; // K for classification, 0 for regression
    std::vector<std::vector<double>> features;
    std::vector<double> ground_truth; // empty when unknown

    std::size_t size() const { return features.size(); }
    bool has_ground_truth() const { return !ground_truth.empty(); }

    std::span<const double> x(std::size_t n) const { return features.at(n); }

    int class_label(std::size_t n) const {
        if (task != TaskKind::kClassification)
            throw ContractError("class_label on a regression dataset");
        return static_cast<int>(ground_truth.at(n));
    }

    void validate() const {
        for (const auto& row : features)
            if (row.size() != feature_dim)
                throw ValidationError("dataset: inconsistent feature dimension");
        if (has_ground_truth()) {
            if (ground_truth.size() != features.size())
                throw ValidationError("dataset: ground-truth count does not match sample count");
            if (task == TaskKind::kClassification) {
                for (double y : ground_truth) {
                    if (y != std::floor(y) || y < 0.0 ||
                        y >= static_cast<double>(num_classes))
                        throw ValidationError("dataset: class label out of {0..K-1}");
                }
            }
        }
    }
};

struct Annotation {
    std::size_t sample;
    std::size_t worker;
    double label;
};

// The annotation set A with per-sample subsets A_n. Validated at construction:
// at most one triple per (sample, worker), indices in range, classification
// labels integral and inside {0,...,K-1}.
class AnnotationSet {
public:
    AnnotationSet(std::size_t n_samples, std::size_t n_workers, std::size_t num_classes,
                  std::vector<Annotation> triples)
        : n_samples_(n_samples), n_workers_(n_workers), num_classes_(num_classes),
          triples_(std::move(triples)), by_sample_(n_samples) {
        std::vector<std::vector<bool>> seen(n_samples_);
        for (std::size_t t = 0; t < triples_.size(); ++t) {
            const Annotation& a = triples_[t];
            if (a.sample >= n_samples_)
                throw ValidationError("annotation sample index out of range: " +
                                      std::to_string(a.sample));
            if (a.worker >= n_workers_)
                throw ValidationError("annotation worker index out of range: " +
                                      std::to_string(a.worker));
            if (num_classes_ > 0) {
                if (a.label != std::floor(a.label) || a.label < 0.0 ||
                    a.label >= static_cast<double>(num_classes_))
                    throw ValidationError("annotation label out of class range for sample " +
                                          std::to_string(a.sample));
            }
            auto& row = seen[a.sample];
            if (row.empty()) row.assign(n_workers_, false);
            if (row[a.worker])
                throw ValidationError("duplicate annotation for sample " +
                                      std::to_string(a.sample) + ", worker " +
                                      std::to_string(a.worker));
            row[a.worker] = true;
            by_sample_[a.sample].push_back(t);
        }
    }

    std::size_t size() const { return triples_.size(); }
    std::size_t n_samples() const { return n_samples_; }
    std::size_t n_workers() const { return n_workers_; }
    std::size_t num_classes() const { return num_classes_; }

    const std::vector<Annotation>& triples() const { return triples_; }
    const Annotation& triple(std::size_t t) const { return triples_.at(t); }

    // Indices into triples() of the annotations for sample n (the subset A_n).
    std::span<const std::size_t> for_sample(std::size_t n) const { return by_sample_.at(n); }

    // Same sparsity pattern, labels transformed elementwise.
    template <typename Fn>
    AnnotationSet map_labels(Fn&& fn, std::size_t new_num_classes) const {
        std::vector<Annotation> mapped = triples_;
        for (Annotation& a : mapped) a.label = fn(a.label);
        return AnnotationSet(n_samples_, n_workers_, new_num_classes, std::move(mapped));
    }

private:
    std::size_t n_samples_;
    std::size_t n_workers_;
    std::size_t num_classes_;
    std::vector<Annotation> triples_;
    std::vector<std::vector<std::size_t>> by_sample_;
};

// Synthetic worker behavior: a row-stochastic confusion matrix (classification)
// or an affine-plus-noise response model (regression), plus the probability of
// labeling any given sample at all.
struct WorkerProfile {
    enum class Kind { kConfusion, kAffineNoise };

    Kind kind = Kind::kConfusion;
    std::size_t num_classes = 0;
    std::vector<double> confusion; // K*K row-major, row = true class
    double bias = 0.0;
    double scale = 1.0;
    double noise_std = 0.0;
    double p_label = 1.0;

    static WorkerProfile confusion_worker(std::vector<double> matrix, std::size_t k,
                                          double p = 1.0) {
        WorkerProfile w;
        w.kind = Kind::kConfusion;
        w.num_classes = k;
        w.confusion = std::move(matrix);
        w.p_label = p;
        w.validate();
        return w;
    }

    // Identity confusion everywhere except a uniform off-diagonal remainder.
    static WorkerProfile diagonal_worker(std::size_t k, double diagonal, double p = 1.0) {
        std::vector<double> m(k * k, k > 1 ? (1.0 - diagonal) / (k - 1) : 0.0);
        for (std::size_t c = 0; c < k; ++c) m[c * k + c] = diagonal;
        return confusion_worker(std::move(m), k, p);
    }

    static WorkerProfile spammer(std::size_t k, double p = 1.0) {
        return confusion_worker(std::vector<double>(k * k, 1.0 / k), k, p);
    }

    static WorkerProfile affine_worker(double scale, double bias, double noise_std,
                                       double p = 1.0) {
        WorkerProfile w;
        w.kind = Kind::kAffineNoise;
        w.scale = scale;
        w.bias = bias;
        w.noise_std = noise_std;
        w.p_label = p;
        w.validate();
        return w;
    }

    void validate() const {
        if (!(p_label > 0.0) || p_label > 1.0)
            throw ValidationError("worker profile: p_label must be in (0, 1]");
        if (kind == Kind::kConfusion) {
            if (num_classes < 2) throw ValidationError("confusion worker: K must be >= 2");
            if (confusion.size() != num_classes * num_classes)
                throw ValidationError("confusion worker: matrix must be K x K");
            for (std::size_t r = 0; r < num_classes; ++r) {
                double sum = 0.0;
                for (std::size_t c = 0; c < num_classes; ++c) {
                    const double v = confusion[r * num_classes + c];
                    if (v < 0.0) throw ValidationError("confusion worker: negative entry");
                    sum += v;
                }
                if (std::abs(sum - 1.0) > 1e-9)
                    throw ValidationError("confusion worker: row " + std::to_string(r) +
                                          " does not sum to 1");
            }
        } else {
            if (noise_std < 0.0) throw ValidationError("affine worker: noise_std must be >= 0");
        }
    }
};

// Mean and standard deviation of the ground-truth training scores, used to
// normalize annotation scores before regression training.
struct NormalizationStats {
    double mean = 0.0;
    double stddev = 1.0;

    static NormalizationStats from_scores(std::span<const double> scores) {
        if (scores.empty())
            throw ContractError("NormalizationStats: no scores");
        double mean = 0.0;
        for (double y : scores) mean += y;
        mean /= static_cast<double>(scores.size());
        double var = 0.0;
        for (double y : scores) var += (y - mean) * (y - mean);
        var /= static_cast<double>(scores.size());
        return {mean, std::sqrt(var)};
    }

    double normalize(double y) const { return (y - mean) / stddev; }
    double denormalize(double z) const { return z * stddev + mean; }
};

// Replaces every annotation score by (y - mean)/stddev; the sparsity pattern
// and per-sample counts are untouched.
inline AnnotationSet normalize_scores(const AnnotationSet& annotations,
                                      const NormalizationStats& stats) {
    if (!(stats.stddev > 0.0))
        throw NumericError("normalize_scores: degenerate statistics (stddev <= 0)");
    return annotations.map_labels([&](double y) { return stats.normalize(y); },
                                  annotations.num_classes());
}

struct SplitFractions {
    double train = 0.6;
    double valid = 0.2;
    double test = 0.2;
};

struct DataSplit {
    Dataset train_data, valid_data, test_data;
    AnnotationSet train_annotations, valid_annotations, test_annotations;
    // original sample ids per part, in part order
    std::vector<std::size_t> train_ids, valid_ids, test_ids;
};

// Subset of samples in `ids` order, ground truth carried along.
inline Dataset take_samples(const Dataset& data, std::span<const std::size_t> ids) {
    Dataset out;
    out.task = data.task;
    out.feature_dim = data.feature_dim;
    out.num_classes = data.num_classes;
    out.features.reserve(ids.size());
    for (std::size_t id : ids) out.features.push_back(data.features[id]);
    if (data.has_ground_truth()) {
        out.ground_truth.reserve(ids.size());
        for (std::size_t id : ids) out.ground_truth.push_back(data.ground_truth[id]);
    }
    return out;
}

// Annotations of the samples in `ids`, re-indexed to subset positions.
inline AnnotationSet take_annotations(const AnnotationSet& annotations,
                                      std::span<const std::size_t> ids) {
    std::vector<Annotation> triples;
    for (std::size_t local = 0; local < ids.size(); ++local) {
        for (std::size_t t : annotations.for_sample(ids[local])) {
            Annotation a = annotations.triple(t);
            a.sample = local;
            triples.push_back(a);
        }
    }
    return AnnotationSet(ids.size(), annotations.n_workers(), annotations.num_classes(),
                         std::move(triples));
}

// Disjoint sample partition with annotations carried along and re-indexed.
// Deterministic per seed.
inline DataSplit split(const Dataset& data, const AnnotationSet& annotations,
                       const SplitFractions& fractions, std::uint64_t seed) {
    const double sum = fractions.train + fractions.valid + fractions.test;
    if (fractions.train <= 0.0 || fractions.valid <= 0.0 || fractions.test <= 0.0 ||
        std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("split: fractions must be positive and sum to 1");
    if (annotations.n_samples() != data.size())
        throw ContractError("split: annotation sample count does not match dataset");

    std::vector<std::size_t> order(data.size());
    for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
    Rng rng(seed);
    rng.shuffle(order);

    const auto total = static_cast<double>(data.size());
    const auto cut1 = static_cast<std::size_t>(std::llround(total * fractions.train));
    const auto cut2 =
        static_cast<std::size_t>(std::llround(total * (fractions.train + fractions.valid)));

    std::vector<std::size_t> train_ids(order.begin(), order.begin() + cut1);
    std::vector<std::size_t> valid_ids(order.begin() + cut1, order.begin() + cut2);
    std::vector<std::size_t> test_ids(order.begin() + cut2, order.end());

    return DataSplit{take_samples(data, train_ids),
                     take_samples(data, valid_ids),
                     take_samples(data, test_ids),
                     take_annotations(annotations, train_ids),
                     take_annotations(annotations, valid_ids),
                     take_annotations(annotations, test_ids),
                     std::move(train_ids),
                     std::move(valid_ids),
                     std::move(test_ids)};
}

} // namespace crowdforge
