#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "crowdforge/error.hpp"

namespace crowdforge {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class OpKind : std::uint8_t {
    kLeaf,        // recorded input value, no backward rule
    kAdd,         // a + b
    kSub,         // a - b
    kMul,         // a * b
    kDiv,         // a / b
    kScale,       // aux_d * a
    kAddConst,    // a + aux_d
    kRelu,        // max(0, a)
    kSigmoid,     // 1 / (1 + exp(-a))
    kPowOdd,      // a^aux_i, aux_i a positive odd integer
    kMax0Sq,      // max(0, a)^2
    kSqDiff,      // (a - b)^2
    kLinear,      // args = [bias, w_0..w_{m-1}, x_0..x_{m-1}] -> bias + sum w_k x_k
    kDot,         // args = [a_0..a_{m-1}, b_0..b_{m-1}]       -> sum a_k b_k
    kMean,        // args = [a_0..a_{m-1}]                     -> sum a_k / m
    kSoftmaxXent, // args = K logits, aux_i = label            -> -log softmax(args)[label]
};

// Reverse-mode tape over scalar nodes. Fused n-ary ops (kLinear, kDot, kMean,
// kSoftmaxXent) keep the node count of an MLP layer proportional to the number
// of neurons rather than the number of weights. Node creation order is a
// topological order, so the reverse pass is a single backward sweep.
class Tape {
public:
    NodeId leaf(double value) {
        ops_.push_back({OpKind::kLeaf, 0, 0.0, 0, 0});
        values_.push_back(value);
        return static_cast<NodeId>(values_.size() - 1);
    }

    NodeId add(NodeId a, NodeId b) { return push_binary(OpKind::kAdd, a, b); }
    NodeId sub(NodeId a, NodeId b) { return push_binary(OpKind::kSub, a, b); }
    NodeId mul(NodeId a, NodeId b) { return push_binary(OpKind::kMul, a, b); }
    NodeId div(NodeId a, NodeId b) { return push_binary(OpKind::kDiv, a, b); }
    NodeId sq_diff(NodeId a, NodeId b) { return push_binary(OpKind::kSqDiff, a, b); }

    NodeId scale(NodeId a, double k) { return push_unary(OpKind::kScale, a, 0, k); }
    NodeId add_const(NodeId a, double c) { return push_unary(OpKind::kAddConst, a, 0, c); }
    NodeId relu(NodeId a) { return push_unary(OpKind::kRelu, a); }
    NodeId sigmoid(NodeId a) { return push_unary(OpKind::kSigmoid, a); }
    NodeId max0_sq(NodeId a) { return push_unary(OpKind::kMax0Sq, a); }

    NodeId pow_odd(NodeId a, int exponent) {
        if (exponent < 1 || exponent % 2 == 0)
            throw ContractError("pow_odd: exponent must be a positive odd integer");
        return push_unary(OpKind::kPowOdd, a, exponent, 0.0);
    }

    // bias + sum_k weights[k] * inputs[k]
    NodeId linear(NodeId bias, std::span<const NodeId> weights, std::span<const NodeId> inputs) {
        if (weights.size() != inputs.size())
            throw ContractError("linear: weight/input arity mismatch");
        const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
        args_.push_back(bias);
        args_.insert(args_.end(), weights.begin(), weights.end());
        args_.insert(args_.end(), inputs.begin(), inputs.end());
        return push_nary(OpKind::kLinear, begin, 0, 0.0);
    }

    // sum_k a[k] * b[k]
    NodeId dot(std::span<const NodeId> a, std::span<const NodeId> b) {
        if (a.size() != b.size() || a.empty())
            throw ContractError("dot: arity mismatch or empty operands");
        const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
        args_.insert(args_.end(), a.begin(), a.end());
        args_.insert(args_.end(), b.begin(), b.end());
        return push_nary(OpKind::kDot, begin, 0, 0.0);
    }

    NodeId mean(std::span<const NodeId> xs) {
        if (xs.empty()) throw ContractError("mean: empty operand list");
        const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
        args_.insert(args_.end(), xs.begin(), xs.end());
        return push_nary(OpKind::kMean, begin, 0, 0.0);
    }

    // Cross-entropy of softmax(logits) at `label`, fused for stability
    // (log-sum-exp with max subtraction).
    NodeId softmax_xent(std::span<const NodeId> logits, int label) {
        if (logits.empty()) throw ContractError("softmax_xent: no logits");
        if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
            throw ContractError("softmax_xent: label out of range");
        const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
        args_.insert(args_.end(), logits.begin(), logits.end());
        return push_nary(OpKind::kSoftmaxXent, begin, label, 0.0);
    }

    std::size_t size() const { return values_.size(); }

    double value(NodeId id) const { return values_[check(id)]; }

    // Valid after backward(); zero for nodes the loss does not depend on.
    double gradient(NodeId id) const {
        if (gradients_.size() != values_.size())
            throw ContractError("gradient: backward() has not run on this tape");
        return gradients_[check(id)];
    }

    // Accumulates d(loss)/d(node) for every node into the gradient buffer.
    // `loss` must be a scalar node on this tape.
    void backward(NodeId loss) {
        check(loss);
        gradients_.assign(values_.size(), 0.0);
        gradients_[loss] = 1.0;
        for (NodeId id = loss; id >= 0; --id) {
            const double g = gradients_[id];
            if (g == 0.0) continue;
            backprop_node(id, g);
        }
    }

    // Recomputes every non-leaf value from the recorded operations. Used to
    // assert the record/replay invariant; shares the evaluation code with the
    // recording path, so results are bit-identical by construction.
    void replay_forward() {
        for (NodeId id = 0; id < static_cast<NodeId>(ops_.size()); ++id) {
            if (ops_[id].kind != OpKind::kLeaf) values_[id] = eval(ops_[id]);
        }
    }

    void clear() {
        ops_.clear();
        values_.clear();
        gradients_.clear();
        args_.clear();
    }

private:
    struct Op {
        OpKind kind;
        std::int32_t aux_i;       // label index / odd exponent
        double aux_d;             // scale factor / added constant
        std::uint32_t args_begin; // span into args_ for n-ary ops
        std::uint32_t args_count;
        NodeId a = kNoNode;       // operands of unary/binary ops
        NodeId b = kNoNode;
    };

    NodeId check(NodeId id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= values_.size())
            throw ContractError("tape: node id out of range");
        return id;
    }

    NodeId push_unary(OpKind kind, NodeId a, std::int32_t aux_i = 0, double aux_d = 0.0) {
        check(a);
        Op op{kind, aux_i, aux_d, 0, 0, a, kNoNode};
        ops_.push_back(op);
        values_.push_back(eval(op));
        return static_cast<NodeId>(values_.size() - 1);
    }

    NodeId push_binary(OpKind kind, NodeId a, NodeId b) {
        check(a);
        check(b);
        Op op{kind, 0, 0.0, 0, 0, a, b};
        ops_.push_back(op);
        values_.push_back(eval(op));
        return static_cast<NodeId>(values_.size() - 1);
    }

    NodeId push_nary(OpKind kind, std::uint32_t args_begin, std::int32_t aux_i, double aux_d) {
        const auto count = static_cast<std::uint32_t>(args_.size()) - args_begin;
        Op op{kind, aux_i, aux_d, args_begin, count, kNoNode, kNoNode};
        ops_.push_back(op);
        values_.push_back(eval(op));
        return static_cast<NodeId>(values_.size() - 1);
    }

    static double stable_sigmoid(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    static double pow_int(double base, int exponent) {
        double out = 1.0;
        for (int k = 0; k < exponent; ++k) out *= base;
        return out;
    }

    double eval(const Op& op) const {
        switch (op.kind) {
        case OpKind::kLeaf: return 0.0; // never reached; leaves keep their recorded value
        case OpKind::kAdd: return values_[op.a] + values_[op.b];
        case OpKind::kSub: return values_[op.a] - values_[op.b];
        case OpKind::kMul: return values_[op.a] * values_[op.b];
        case OpKind::kDiv: return values_[op.a] / values_[op.b];
        case OpKind::kScale: return op.aux_d * values_[op.a];
        case OpKind::kAddConst: return values_[op.a] + op.aux_d;
        case OpKind::kRelu: return values_[op.a] > 0.0 ? values_[op.a] : 0.0;
        case OpKind::kSigmoid: return stable_sigmoid(values_[op.a]);
        case OpKind::kPowOdd: return pow_int(values_[op.a], op.aux_i);
        case OpKind::kMax0Sq: {
            const double v = values_[op.a];
            return v > 0.0 ? v * v : 0.0;
        }
        case OpKind::kSqDiff: {
            const double d = values_[op.a] - values_[op.b];
            return d * d;
        }
        case OpKind::kLinear: {
            const NodeId* args = args_.data() + op.args_begin;
            const std::uint32_t m = (op.args_count - 1) / 2;
            double acc = values_[args[0]];
            for (std::uint32_t k = 0; k < m; ++k)
                acc += values_[args[1 + k]] * values_[args[1 + m + k]];
            return acc;
        }
        case OpKind::kDot: {
            const NodeId* args = args_.data() + op.args_begin;
            const std::uint32_t m = op.args_count / 2;
            double acc = 0.0;
            for (std::uint32_t k = 0; k < m; ++k)
                acc += values_[args[k]] * values_[args[m + k]];
            return acc;
        }
        case OpKind::kMean: {
            const NodeId* args = args_.data() + op.args_begin;
            double acc = 0.0;
            for (std::uint32_t k = 0; k < op.args_count; ++k) acc += values_[args[k]];
            return acc / op.args_count;
        }
        case OpKind::kSoftmaxXent: {
            const NodeId* args = args_.data() + op.args_begin;
            double hi = values_[args[0]];
            for (std::uint32_t k = 1; k < op.args_count; ++k)
                hi = std::max(hi, values_[args[k]]);
            double sum = 0.0;
            for (std::uint32_t k = 0; k < op.args_count; ++k)
                sum += std::exp(values_[args[k]] - hi);
            const double lse = hi + std::log(sum);
            return lse - values_[args[op.aux_i]];
        }
        }
        throw ContractError("tape: unknown op kind");
    }

    void backprop_node(NodeId id, double g) {
        const Op& op = ops_[id];
        switch (op.kind) {
        case OpKind::kLeaf: return;
        case OpKind::kAdd:
            gradients_[op.a] += g;
            gradients_[op.b] += g;
            return;
        case OpKind::kSub:
            gradients_[op.a] += g;
            gradients_[op.b] -= g;
            return;
        case OpKind::kMul:
            gradients_[op.a] += g * values_[op.b];
            gradients_[op.b] += g * values_[op.a];
            return;
        case OpKind::kDiv: {
            const double denom = values_[op.b];
            gradients_[op.a] += g / denom;
            gradients_[op.b] -= g * values_[op.a] / (denom * denom);
            return;
        }
        case OpKind::kScale:
            gradients_[op.a] += g * op.aux_d;
            return;
        case OpKind::kAddConst:
            gradients_[op.a] += g;
            return;
        case OpKind::kRelu:
            // subgradient 0 at the kink
            if (values_[op.a] > 0.0) gradients_[op.a] += g;
            return;
        case OpKind::kSigmoid: {
            const double s = values_[id];
            gradients_[op.a] += g * s * (1.0 - s);
            return;
        }
        case OpKind::kPowOdd:
            gradients_[op.a] += g * op.aux_i * pow_int(values_[op.a], op.aux_i - 1);
            return;
        case OpKind::kMax0Sq: {
            // d/da max(0,a)^2 = 2a for a > 0, 0 for a <= 0 (0 chosen at a = 0)
            const double v = values_[op.a];
            if (v > 0.0) gradients_[op.a] += g * 2.0 * v;
            return;
        }
        case OpKind::kSqDiff: {
            const double d = values_[op.a] - values_[op.b];
            gradients_[op.a] += g * 2.0 * d;
            gradients_[op.b] -= g * 2.0 * d;
            return;
        }
        case OpKind::kLinear: {
            const NodeId* args = args_.data() + op.args_begin;
            const std::uint32_t m = (op.args_count - 1) / 2;
            gradients_[args[0]] += g;
            for (std::uint32_t k = 0; k < m; ++k) {
                gradients_[args[1 + k]] += g * values_[args[1 + m + k]];
                gradients_[args[1 + m + k]] += g * values_[args[1 + k]];
            }
            return;
        }
        case OpKind::kDot: {
            const NodeId* args = args_.data() + op.args_begin;
            const std::uint32_t m = op.args_count / 2;
            for (std::uint32_t k = 0; k < m; ++k) {
                gradients_[args[k]] += g * values_[args[m + k]];
                gradients_[args[m + k]] += g * values_[args[k]];
            }
            return;
        }
        case OpKind::kMean: {
            const NodeId* args = args_.data() + op.args_begin;
            const double share = g / op.args_count;
            for (std::uint32_t k = 0; k < op.args_count; ++k) gradients_[args[k]] += share;
            return;
        }
        case OpKind::kSoftmaxXent: {
            // d/dlogit_k = softmax_k - [k == label]; softmax recomputed from inputs
            const NodeId* args = args_.data() + op.args_begin;
            double hi = values_[args[0]];
            for (std::uint32_t k = 1; k < op.args_count; ++k)
                hi = std::max(hi, values_[args[k]]);
            double sum = 0.0;
            for (std::uint32_t k = 0; k < op.args_count; ++k)
                sum += std::exp(values_[args[k]] - hi);
            for (std::uint32_t k = 0; k < op.args_count; ++k) {
                const double p = std::exp(values_[args[k]] - hi) / sum;
                const double indicator = (static_cast<std::int32_t>(k) == op.aux_i) ? 1.0 : 0.0;
                gradients_[args[k]] += g * (p - indicator);
            }
            return;
        }
        }
    }

    std::vector<Op> ops_;
    std::vector<double> values_;
    std::vector<double> gradients_;
    std::vector<NodeId> args_;
};

} // namespace crowdforge
