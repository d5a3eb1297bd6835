#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdforge/data.hpp"

namespace crowdforge {

namespace detail {

inline void require_full_annotation(const AnnotationSet& annotations) {
    std::string missing;
    for (std::size_t n = 0; n < annotations.n_samples(); ++n) {
        if (annotations.for_sample(n).empty()) {
            if (!missing.empty()) missing += ", ";
            missing += std::to_string(n);
        }
    }
    if (!missing.empty())
        throw ValidationError("samples without annotations: " + missing);
}

} // namespace detail

// Per-sample most frequent label; ties break to the smallest class index.
inline std::vector<int> majority_vote(const AnnotationSet& annotations,
                                      std::size_t num_classes) {
    if (num_classes < 2) throw ContractError("majority_vote: K must be >= 2");
    detail::require_full_annotation(annotations);
    std::vector<int> labels(annotations.n_samples());
    std::vector<std::size_t> counts(num_classes);
    for (std::size_t n = 0; n < annotations.n_samples(); ++n) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t t : annotations.for_sample(n)) {
            const double label = annotations.triple(t).label;
            if (label != std::floor(label) || label < 0.0 ||
                label >= static_cast<double>(num_classes))
                throw ValidationError("majority_vote: label out of class range");
            ++counts[static_cast<std::size_t>(label)];
        }
        labels[n] = static_cast<int>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    return labels;
}

// Per-sample arithmetic mean of the annotation scores.
inline std::vector<double> average_vote(const AnnotationSet& annotations) {
    detail::require_full_annotation(annotations);
    std::vector<double> targets(annotations.n_samples());
    for (std::size_t n = 0; n < annotations.n_samples(); ++n) {
        double sum = 0.0;
        for (std::size_t t : annotations.for_sample(n)) sum += annotations.triple(t).label;
        targets[n] = sum / static_cast<double>(annotations.for_sample(n).size());
    }
    return targets;
}

struct DawidSkeneResult {
    std::vector<std::vector<double>> posteriors; // [sample][class]
    std::vector<std::vector<double>> confusions; // [worker][K*K row-major], row = true class
    std::vector<double> priors;                  // [class]
    std::vector<double> log_likelihood;          // one entry per iteration
    std::size_t iterations = 0;
    bool converged = false;

    std::vector<int> hard_labels() const {
        std::vector<int> labels(posteriors.size());
        for (std::size_t n = 0; n < posteriors.size(); ++n)
            labels[n] = static_cast<int>(
                std::max_element(posteriors[n].begin(), posteriors[n].end()) -
                posteriors[n].begin());
        return labels;
    }
};

// EM estimation of per-worker confusion matrices and latent true labels.
//
// Initialization: posteriors from majority-vote soft counts. Each iteration
// runs an M-step (priors and confusion rows from the current posteriors; a row
// with no mass falls back to uniform) followed by an E-step whose per-sample
// normalizers give the observed-data log-likelihood of the just-updated
// parameters. Probabilities are floored at 1e-12 inside the E-step product.
// Stops when the max absolute parameter change drops below `tolerance`; at
// max_iterations the result is returned with converged = false.
inline DawidSkeneResult dawid_skene(const AnnotationSet& annotations, std::size_t num_classes,
                                    double tolerance = 1e-6, std::size_t max_iterations = 100) {
    if (num_classes < 2) throw ContractError("dawid_skene: K must be >= 2");
    detail::require_full_annotation(annotations);
    const std::size_t n_samples = annotations.n_samples();
    const std::size_t n_workers = annotations.n_workers();
    const std::size_t k2 = num_classes * num_classes;
    constexpr double kFloor = 1e-12;

    DawidSkeneResult result;
    result.posteriors.assign(n_samples, std::vector<double>(num_classes, 0.0));
    for (std::size_t n = 0; n < n_samples; ++n) {
        const auto subset = annotations.for_sample(n);
        for (std::size_t t : subset) {
            const auto label = static_cast<std::size_t>(annotations.triple(t).label);
            if (label >= num_classes)
                throw ValidationError("dawid_skene: label out of class range");
            result.posteriors[n][label] += 1.0 / static_cast<double>(subset.size());
        }
    }

    result.priors.assign(num_classes, 0.0);
    result.confusions.assign(n_workers, std::vector<double>(k2, 0.0));
    std::vector<double> prev_priors;
    std::vector<std::vector<double>> prev_confusions;

    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        // M-step
        std::fill(result.priors.begin(), result.priors.end(), 0.0);
        for (std::size_t n = 0; n < n_samples; ++n)
            for (std::size_t k = 0; k < num_classes; ++k)
                result.priors[k] += result.posteriors[n][k];
        for (std::size_t k = 0; k < num_classes; ++k)
            result.priors[k] /= static_cast<double>(n_samples);

        for (auto& confusion : result.confusions)
            std::fill(confusion.begin(), confusion.end(), 0.0);
        for (const Annotation& a : annotations.triples()) {
            const auto emitted = static_cast<std::size_t>(a.label);
            for (std::size_t k = 0; k < num_classes; ++k)
                result.confusions[a.worker][k * num_classes + emitted] +=
                    result.posteriors[a.sample][k];
        }
        for (std::size_t i = 0; i < n_workers; ++i) {
            for (std::size_t k = 0; k < num_classes; ++k) {
                double row_sum = 0.0;
                for (std::size_t l = 0; l < num_classes; ++l)
                    row_sum += result.confusions[i][k * num_classes + l];
                if (row_sum > 0.0) {
                    for (std::size_t l = 0; l < num_classes; ++l)
                        result.confusions[i][k * num_classes + l] /= row_sum;
                } else {
                    for (std::size_t l = 0; l < num_classes; ++l)
                        result.confusions[i][k * num_classes + l] = 1.0 / num_classes;
                }
            }
        }

        // E-step; per-sample normalizers accumulate the log-likelihood
        double log_likelihood = 0.0;
        for (std::size_t n = 0; n < n_samples; ++n) {
            std::vector<double> joint(num_classes);
            double normalizer = 0.0;
            for (std::size_t k = 0; k < num_classes; ++k) {
                double p = std::max(result.priors[k], kFloor);
                for (std::size_t t : annotations.for_sample(n)) {
                    const Annotation& a = annotations.triple(t);
                    const auto emitted = static_cast<std::size_t>(a.label);
                    p *= std::max(result.confusions[a.worker][k * num_classes + emitted],
                                  kFloor);
                }
                joint[k] = p;
                normalizer += p;
            }
            log_likelihood += std::log(normalizer);
            for (std::size_t k = 0; k < num_classes; ++k)
                result.posteriors[n][k] = joint[k] / normalizer;
        }
        result.log_likelihood.push_back(log_likelihood);
        result.iterations = iter + 1;

        if (iter > 0) {
            double delta = 0.0;
            for (std::size_t k = 0; k < num_classes; ++k)
                delta = std::max(delta, std::abs(result.priors[k] - prev_priors[k]));
            for (std::size_t i = 0; i < n_workers; ++i)
                for (std::size_t e = 0; e < k2; ++e)
                    delta = std::max(delta,
                                     std::abs(result.confusions[i][e] - prev_confusions[i][e]));
            if (delta < tolerance) {
                result.converged = true;
                break;
            }
        }
        prev_priors = result.priors;
        prev_confusions = result.confusions;
    }
    return result;
}

// Posterior distributions as CSV: sample_id,p0,...,p{K-1}.
inline void write_dawid_skene_posteriors_csv(const std::filesystem::path& path,
                                             const DawidSkeneResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    const std::size_t k = result.priors.size();
    out << "sample_id";
    for (std::size_t c = 0; c < k; ++c) out << ",p" << c;
    out << "\n";
    char buf[32];
    for (std::size_t n = 0; n < result.posteriors.size(); ++n) {
        out << n;
        for (double p : result.posteriors[n]) {
            std::snprintf(buf, sizeof(buf), ",%.17g", p);
            out << buf;
        }
        out << "\n";
    }
}

// Confusion estimates, priors, and the run trace as JSON.
inline nlohmann::json dawid_skene_to_json(const DawidSkeneResult& result) {
    const std::size_t k = result.priors.size();
    nlohmann::json workers = nlohmann::json::array();
    for (const auto& confusion : result.confusions) {
        nlohmann::json matrix = nlohmann::json::array();
        for (std::size_t row = 0; row < k; ++row) {
            nlohmann::json cells = nlohmann::json::array();
            for (std::size_t col = 0; col < k; ++col)
                cells.push_back(confusion[row * k + col]);
            matrix.push_back(std::move(cells));
        }
        workers.push_back(std::move(matrix));
    }
    return {{"confusions", std::move(workers)},
            {"priors", result.priors},
            {"iterations", result.iterations},
            {"converged", result.converged},
            {"log_likelihood", result.log_likelihood}};
}

} // namespace crowdforge
