#pragma once

#include <cmath>
#include <span>

#include "crowdforge/data.hpp"
#include "crowdforge/tape.hpp"

namespace crowdforge {

// Configuration of the selective training objective
//   L = r_hat + lambda * Psi(c - phi),   Psi(a) = max(0, a)^2
// where phi is the adoption rate of the batch annotations and r_hat the
// selector-weighted risk.
struct LossConfig {
    double coverage_target = 0.5;  // c in (0, 1]
    double penalty_weight = 32.0;  // lambda
    double coverage_epsilon = 1e-8; // guard for the phi division
    TaskKind task = TaskKind::kClassification;

    void validate() const {
        if (!(coverage_target > 0.0) || coverage_target > 1.0)
            throw ValidationError("loss config: coverage target must be in (0, 1]");
        if (!(penalty_weight > 0.0))
            throw ValidationError("loss config: penalty weight must be positive");
        if (!(coverage_epsilon > 0.0))
            throw ValidationError("loss config: coverage epsilon must be positive");
    }
};

// Per-annotation loss: cross-entropy of softmax(output) at the class label, or
// squared error against the score.
inline NodeId label_loss(Tape& tape, TaskKind task, std::span<const NodeId> output,
                         double label) {
    if (task == TaskKind::kClassification) {
        if (label != std::floor(label) || label < 0.0 ||
            label >= static_cast<double>(output.size()))
            throw ContractError("label_loss: label is not a valid class index");
        return tape.softmax_xent(output, static_cast<int>(label));
    }
    if (output.size() != 1)
        throw ContractError("label_loss: regression expects a scalar prediction");
    return tape.sq_diff(output[0], tape.leaf(label));
}

// Adoption rate phi: the mean selector score over the batch annotations.
inline NodeId coverage(Tape& tape, std::span<const NodeId> scores) {
    if (scores.empty()) throw ContractError("coverage: empty batch annotation set");
    return tape.mean(scores);
}

// Selector-weighted empirical risk r_hat = (mean of loss*score) / phi, with
// the denominator guarded below by eps_phi. The guard branch is chosen from
// the recorded phi value, which matches the max(phi, eps) subgradient.
inline NodeId selective_risk(Tape& tape, std::span<const NodeId> losses,
                             std::span<const NodeId> scores, NodeId phi, double eps_phi) {
    if (losses.size() != scores.size() || losses.empty())
        throw ContractError("selective_risk: losses and scores must align and be non-empty");
    for (NodeId loss : losses)
        if (!std::isfinite(tape.value(loss)))
            throw NumericError("selective_risk: non-finite per-label loss");
    const NodeId numerator =
        tape.scale(tape.dot(losses, scores), 1.0 / static_cast<double>(losses.size()));
    const NodeId denominator = tape.value(phi) > eps_phi ? phi : tape.leaf(eps_phi);
    return tape.div(numerator, denominator);
}

// L = r_hat + lambda * max(0, c - phi)^2; gradient reaches both the model (via
// the per-label losses inside r_hat) and the selector (via scores and phi).
inline NodeId total_loss(Tape& tape, NodeId risk, NodeId phi, const LossConfig& config) {
    config.validate();
    const NodeId gap = tape.sub(tape.leaf(config.coverage_target), phi);
    return tape.add(risk, tape.scale(tape.max0_sq(gap), config.penalty_weight));
}

struct LslBatchLoss {
    NodeId total;
    NodeId risk;
    NodeId phi;
};

// Assembles the full objective for one batch of per-annotation losses/scores.
inline LslBatchLoss lsl_batch_loss(Tape& tape, std::span<const NodeId> losses,
                                   std::span<const NodeId> scores, const LossConfig& config) {
    const NodeId phi = coverage(tape, scores);
    const NodeId risk = selective_risk(tape, losses, scores, phi, config.coverage_epsilon);
    return {total_loss(tape, risk, phi, config), risk, phi};
}

} // namespace crowdforge
