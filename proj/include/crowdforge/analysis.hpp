#pragma once

#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "crowdforge/metrics.hpp"
#include "crowdforge/selectors.hpp"

namespace crowdforge {

struct WorkerQualityRow {
    std::size_t worker = 0;
    std::size_t count = 0;
    double quality = 0.0;    // label accuracy (classification) or RMSE (regression)
    double mean_score = 0.0; // mean selector output over the worker's annotations
};

struct WorkerQualityReport {
    TaskKind task = TaskKind::kClassification;
    std::vector<WorkerQualityRow> rows; // workers with zero annotations excluded
    double pearson_r = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["task"] = to_string(task);
        j["pearson_r"] = pearson_r;
        nlohmann::json workers = nlohmann::json::array();
        for (const WorkerQualityRow& row : rows) {
            workers.push_back({{"worker_id", row.worker},
                               {"count", row.count},
                               {"quality", row.quality},
                               {"mean_score", row.mean_score}});
        }
        j["workers"] = std::move(workers);
        return j;
    }

    void write_csv(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ValidationError("cannot write " + path.string());
        out << "worker_id,count,quality,mean_score\n";
        char buf[96];
        for (const WorkerQualityRow& row : rows) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g\n", row.worker, row.count,
                          row.quality, row.mean_score);
            out << buf;
        }
    }
};

// Per-worker response quality against ground truth paired with the worker's
// mean selector score, plus the Pearson correlation across workers.
//
// `annotations` carries the raw labels used to judge quality; `scoring` is the
// same sparsity pattern with labels as the selector saw them during training
// (normalized scores for regression). They may be the same object.
inline WorkerQualityReport worker_quality_analysis(
    const Selector& sel, const ParameterStore& store, const MlpSpec& spec,
    const MlpParams& mlp, const Dataset& data, const AnnotationSet& annotations,
    const AnnotationSet& scoring, TaskKind task) {
    if (!data.has_ground_truth())
        throw ContractError("worker_quality_analysis: ground truth required");
    if (annotations.size() != scoring.size() ||
        annotations.n_workers() != scoring.n_workers())
        throw ContractError("worker_quality_analysis: annotation sets do not align");

    const auto means = mean_score_per_worker(sel, store, spec, mlp, data, scoring);

    const std::size_t n_workers = annotations.n_workers();
    std::vector<std::size_t> counts(n_workers, 0), hits(n_workers, 0);
    std::vector<double> sq_errors(n_workers, 0.0);
    for (const Annotation& a : annotations.triples()) {
        ++counts[a.worker];
        if (task == TaskKind::kClassification) {
            if (a.label == data.ground_truth[a.sample]) ++hits[a.worker];
        } else {
            const double diff = a.label - data.ground_truth[a.sample];
            sq_errors[a.worker] += diff * diff;
        }
    }

    WorkerQualityReport report;
    report.task = task;
    std::vector<double> qualities, scores;
    for (std::size_t i = 0; i < n_workers; ++i) {
        if (counts[i] == 0) continue;
        WorkerQualityRow row;
        row.worker = i;
        row.count = counts[i];
        row.quality = task == TaskKind::kClassification
                          ? static_cast<double>(hits[i]) / static_cast<double>(counts[i])
                          : std::sqrt(sq_errors[i] / static_cast<double>(counts[i]));
        row.mean_score = means[i].value();
        report.rows.push_back(row);
        qualities.push_back(row.quality);
        scores.push_back(row.mean_score);
    }
    if (report.rows.size() < 2)
        throw ContractError(
            "worker_quality_analysis: need at least two annotating workers for a correlation");
    report.pearson_r = pearson(scores, qualities);
    return report;
}

} // namespace crowdforge
