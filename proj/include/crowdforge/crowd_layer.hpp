#pragma once

#include <span>
#include <string>
#include <vector>

#include "crowdforge/data.hpp"
#include "crowdforge/parameter_store.hpp"

namespace crowdforge {

// Per-worker output transformations appended to the base model during
// training. Classification variants act on the K-vector output, regression
// variants on the scalar:
//   MW    W^i s            VW  w^i . s (elementwise)   VB    s + b^i
//   VW+B  w^i . s + b^i    S   s^i u                   B     u + b^i
//   S+B   s^i u + b^i
enum class CrowdLayerVariant { kMW, kVW, kVB, kVWB, kS, kB, kSB };

inline std::string to_string(CrowdLayerVariant variant) {
    switch (variant) {
    case CrowdLayerVariant::kMW: return "MW";
    case CrowdLayerVariant::kVW: return "VW";
    case CrowdLayerVariant::kVB: return "VB";
    case CrowdLayerVariant::kVWB: return "VW+B";
    case CrowdLayerVariant::kS: return "S";
    case CrowdLayerVariant::kB: return "B";
    case CrowdLayerVariant::kSB: return "S+B";
    }
    throw ContractError("unknown crowd layer variant");
}

inline CrowdLayerVariant crowd_layer_variant_from_string(const std::string& s) {
    if (s == "MW") return CrowdLayerVariant::kMW;
    if (s == "VW") return CrowdLayerVariant::kVW;
    if (s == "VB") return CrowdLayerVariant::kVB;
    if (s == "VW+B") return CrowdLayerVariant::kVWB;
    if (s == "S") return CrowdLayerVariant::kS;
    if (s == "B") return CrowdLayerVariant::kB;
    if (s == "S+B") return CrowdLayerVariant::kSB;
    throw ValidationError("unknown crowd layer variant: " + s);
}

inline bool crowd_layer_is_classification(CrowdLayerVariant variant) {
    switch (variant) {
    case CrowdLayerVariant::kMW:
    case CrowdLayerVariant::kVW:
    case CrowdLayerVariant::kVB:
    case CrowdLayerVariant::kVWB: return true;
    case CrowdLayerVariant::kS:
    case CrowdLayerVariant::kB:
    case CrowdLayerVariant::kSB: return false;
    }
    throw ContractError("unknown crowd layer variant");
}

inline void ensure_crowd_layer_applicable(CrowdLayerVariant variant, TaskKind task) {
    if (crowd_layer_is_classification(variant) != (task == TaskKind::kClassification))
        throw ContractError("crowd layer variant " + to_string(variant) +
                            " does not apply to " + to_string(task));
}

struct CrowdLayerParams {
    CrowdLayerVariant variant = CrowdLayerVariant::kMW;
    std::size_t n_workers = 0;
    std::size_t num_classes = 0; // 0 for regression variants
    ParameterStore::GroupId weights = 0; // MW matrices / VW vectors / S scalars
    ParameterStore::GroupId biases = 0;  // VB, VW+B, B, S+B
    bool has_weights = false;
    bool has_biases = false;
};

// Identity initialization: matrices to I, weight vectors and scales to 1,
// biases to 0, so every variant starts as the identity map on the base output.
inline CrowdLayerParams init_crowd_layer(CrowdLayerVariant variant, std::size_t n_workers,
                                         std::size_t num_classes, ParameterStore& store,
                                         const std::string& prefix = "crowd") {
    if (n_workers == 0) throw ContractError("init_crowd_layer: worker count must be positive");
    const bool classification = crowd_layer_is_classification(variant);
    if (classification && num_classes < 2)
        throw ContractError("init_crowd_layer: classification variants need K >= 2");

    CrowdLayerParams params;
    params.variant = variant;
    params.n_workers = n_workers;
    params.num_classes = classification ? num_classes : 0;

    switch (variant) {
    case CrowdLayerVariant::kMW: {
        params.weights = store.add_group(prefix + ".W", {n_workers, num_classes, num_classes});
        params.has_weights = true;
        auto w = store.values(params.weights);
        for (std::size_t i = 0; i < n_workers; ++i)
            for (std::size_t k = 0; k < num_classes; ++k)
                w[(i * num_classes + k) * num_classes + k] = 1.0;
        break;
    }
    case CrowdLayerVariant::kVW:
    case CrowdLayerVariant::kVWB: {
        params.weights = store.add_group(prefix + ".w", {n_workers, num_classes});
        params.has_weights = true;
        for (double& v : store.values(params.weights)) v = 1.0;
        if (variant == CrowdLayerVariant::kVWB) {
            params.biases = store.add_group(prefix + ".b", {n_workers, num_classes});
            params.has_biases = true;
        }
        break;
    }
    case CrowdLayerVariant::kVB:
        params.biases = store.add_group(prefix + ".b", {n_workers, num_classes});
        params.has_biases = true;
        break;
    case CrowdLayerVariant::kS:
    case CrowdLayerVariant::kSB:
        params.weights = store.add_group(prefix + ".s", {n_workers});
        params.has_weights = true;
        for (double& v : store.values(params.weights)) v = 1.0;
        if (variant == CrowdLayerVariant::kSB) {
            params.biases = store.add_group(prefix + ".b", {n_workers});
            params.has_biases = true;
        }
        break;
    case CrowdLayerVariant::kB:
        params.biases = store.add_group(prefix + ".b", {n_workers});
        params.has_biases = true;
        break;
    }
    return params;
}

// Worker i's transformed output; feeds label_loss against that worker's label.
inline std::vector<NodeId> crowd_layer_forward(Tape& tape, ParamBinding& bind,
                                               const CrowdLayerParams& params,
                                               std::span<const NodeId> base_output,
                                               std::size_t worker) {
    if (worker >= params.n_workers)
        throw ContractError("crowd_layer_forward: worker index out of range");
    const bool classification = crowd_layer_is_classification(params.variant);
    if (classification && base_output.size() != params.num_classes)
        throw ContractError("crowd_layer_forward: base output must be a K-vector");
    if (!classification && base_output.size() != 1)
        throw ContractError("crowd_layer_forward: base output must be a scalar");

    const std::size_t k = params.num_classes;
    std::vector<NodeId> out;
    switch (params.variant) {
    case CrowdLayerVariant::kMW: {
        out.resize(k);
        std::vector<NodeId> row(k);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t c = 0; c < k; ++c)
                row[c] = bind(params.weights, (worker * k + j) * k + c);
            out[j] = tape.dot(row, base_output);
        }
        break;
    }
    case CrowdLayerVariant::kVW:
        out.resize(k);
        for (std::size_t j = 0; j < k; ++j)
            out[j] = tape.mul(bind(params.weights, worker * k + j), base_output[j]);
        break;
    case CrowdLayerVariant::kVB:
        out.resize(k);
        for (std::size_t j = 0; j < k; ++j)
            out[j] = tape.add(base_output[j], bind(params.biases, worker * k + j));
        break;
    case CrowdLayerVariant::kVWB:
        out.resize(k);
        for (std::size_t j = 0; j < k; ++j)
            out[j] = tape.add(tape.mul(bind(params.weights, worker * k + j), base_output[j]),
                              bind(params.biases, worker * k + j));
        break;
    case CrowdLayerVariant::kS:
        out.push_back(tape.mul(bind(params.weights, worker), base_output[0]));
        break;
    case CrowdLayerVariant::kB:
        out.push_back(tape.add(base_output[0], bind(params.biases, worker)));
        break;
    case CrowdLayerVariant::kSB:
        out.push_back(tape.add(tape.mul(bind(params.weights, worker), base_output[0]),
                               bind(params.biases, worker)));
        break;
    }
    return out;
}

} // namespace crowdforge
