#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "crowdforge/data.hpp"

namespace crowdforge {

struct MetricsReport {
    TaskKind task = TaskKind::kClassification;
    std::size_t sample_count = 0;
    // classification
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    std::optional<double> ovr_macro_auc;
    // regression
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> r2;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["task"] = to_string(task);
        j["sample_count"] = sample_count;
        if (task == TaskKind::kClassification) {
            j["accuracy"] = accuracy;
            j["macro_precision"] = macro_precision;
            j["macro_recall"] = macro_recall;
            if (ovr_macro_auc) j["ovr_macro_auc"] = *ovr_macro_auc;
            else j["ovr_macro_auc"] = nullptr;
        } else {
            j["mae"] = mae;
            j["rmse"] = rmse;
            if (r2) j["r2"] = *r2;
            else j["r2"] = nullptr;
        }
        return j;
    }
};

// Rank-based (Mann-Whitney) AUC of score vs binary truth; tied scores
// contribute half per tied pair. Absent when either class is empty.
inline std::optional<double> rank_auc(std::span<const double> scores,
                                      const std::vector<bool>& positives) {
    if (scores.size() != positives.size())
        throw ContractError("rank_auc: length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (bool p : positives) n_pos += p ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over ties, ranks starting at 1
    double positive_rank_sum = 0.0;
    std::size_t index = 0;
    while (index < n) {
        std::size_t end = index + 1;
        while (end < n && scores[order[end]] == scores[order[index]]) ++end;
        const double mean_rank = 0.5 * static_cast<double>(index + 1 + end);
        for (std::size_t at = index; at < end; ++at)
            if (positives[order[at]]) positive_rank_sum += mean_rank;
        index = end;
    }
    const double u = positive_rank_sum -
                     static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace detail {

inline std::vector<double> softmax(std::span<const double> logits) {
    double hi = logits[0];
    for (double v : logits) hi = std::max(hi, v);
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        probs[k] = std::exp(logits[k] - hi);
        sum += probs[k];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

} // namespace detail

// Accuracy, macro precision/recall and one-vs-rest macro AUC from per-sample
// logits. A class predicted never (or absent from the truth) contributes a
// zero precision/recall term and still counts in the macro average; classes
// without both positives and negatives are left out of the AUC mean.
inline MetricsReport classification_metrics(const std::vector<std::vector<double>>& logits,
                                            std::span<const int> truths,
                                            std::size_t num_classes) {
    if (logits.empty() || logits.size() != truths.size())
        throw ContractError("classification_metrics: empty or mismatched inputs");
    for (int label : truths)
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
            throw ContractError("classification_metrics: label out of range");

    MetricsReport report;
    report.task = TaskKind::kClassification;
    report.sample_count = logits.size();

    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    std::vector<std::vector<double>> probs(logits.size());
    std::size_t correct = 0;
    for (std::size_t n = 0; n < logits.size(); ++n) {
        if (logits[n].size() != num_classes)
            throw ContractError("classification_metrics: logit vector has wrong size");
        probs[n] = detail::softmax(logits[n]);
        const auto predicted = static_cast<std::size_t>(
            std::max_element(logits[n].begin(), logits[n].end()) - logits[n].begin());
        const auto truth = static_cast<std::size_t>(truths[n]);
        if (predicted == truth) {
            ++correct;
            ++tp[truth];
        } else {
            ++fp[predicted];
            ++fn[truth];
        }
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(logits.size());

    double precision_sum = 0.0, recall_sum = 0.0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        const std::size_t predicted = tp[k] + fp[k];
        const std::size_t actual = tp[k] + fn[k];
        precision_sum += predicted > 0 ? static_cast<double>(tp[k]) / predicted : 0.0;
        recall_sum += actual > 0 ? static_cast<double>(tp[k]) / actual : 0.0;
    }
    report.macro_precision = precision_sum / static_cast<double>(num_classes);
    report.macro_recall = recall_sum / static_cast<double>(num_classes);

    double auc_sum = 0.0;
    std::size_t auc_classes = 0;
    std::vector<double> scores(logits.size());
    std::vector<bool> positives(logits.size());
    for (std::size_t k = 0; k < num_classes; ++k) {
        for (std::size_t n = 0; n < logits.size(); ++n) {
            scores[n] = probs[n][k];
            positives[n] = static_cast<std::size_t>(truths[n]) == k;
        }
        if (const auto auc = rank_auc(scores, positives)) {
            auc_sum += *auc;
            ++auc_classes;
        }
    }
    if (auc_classes > 0) report.ovr_macro_auc = auc_sum / static_cast<double>(auc_classes);
    return report;
}

// MAE, RMSE and R^2 = 1 - SS_res/SS_tot; R^2 is absent when the truths have
// zero variance.
inline MetricsReport regression_metrics(std::span<const double> predictions,
                                        std::span<const double> truths) {
    if (predictions.empty() || predictions.size() != truths.size())
        throw ContractError("regression_metrics: empty or mismatched inputs");

    MetricsReport report;
    report.task = TaskKind::kRegression;
    report.sample_count = predictions.size();

    double abs_sum = 0.0, sq_sum = 0.0, truth_mean = 0.0;
    for (std::size_t n = 0; n < predictions.size(); ++n) {
        const double diff = predictions[n] - truths[n];
        abs_sum += std::abs(diff);
        sq_sum += diff * diff;
        truth_mean += truths[n];
    }
    const auto count = static_cast<double>(predictions.size());
    truth_mean /= count;
    report.mae = abs_sum / count;
    report.rmse = std::sqrt(sq_sum / count);

    double ss_tot = 0.0;
    for (double y : truths) ss_tot += (y - truth_mean) * (y - truth_mean);
    if (ss_tot > 0.0) report.r2 = 1.0 - sq_sum / ss_tot;
    return report;
}

// Sample Pearson correlation; undefined when either side has zero variance.
inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ContractError("pearson: inputs must have equal length >= 2");
    const auto n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        mean_a += a[k];
        mean_b += b[k];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double da = a[k] - mean_a;
        const double db = b[k] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0)
        throw NumericError("pearson: undefined correlation (zero variance)");
    return cov / std::sqrt(var_a * var_b);
}

} // namespace crowdforge
