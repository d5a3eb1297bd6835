#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "crowdforge/parameter_store.hpp"
#include "crowdforge/rng.hpp"
#include "crowdforge/tape.hpp"

namespace crowdforge {

enum class Activation { kRectifier, kIdentity };

// Architecture of the predictor f = o . h: the last hidden activation vector
// is the feature-extractor output h(x), the final affine map is o.
struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_sizes;
    std::vector<Activation> hidden_activations; // one per hidden layer
    std::size_t output_dim = 1;                 // K logits or 1 regression scalar

    std::size_t feature_dim() const { return hidden_sizes.back(); }

    void validate() const {
        if (input_dim == 0) throw ContractError("MlpSpec: input_dim must be positive");
        if (output_dim == 0) throw ContractError("MlpSpec: output_dim must be positive");
        if (hidden_sizes.empty()) throw ContractError("MlpSpec: at least one hidden layer required");
        if (hidden_activations.size() != hidden_sizes.size())
            throw ContractError("MlpSpec: one activation per hidden layer required");
        for (std::size_t n : hidden_sizes)
            if (n == 0) throw ContractError("MlpSpec: hidden layer sizes must be positive");
    }
};

// Group ids of the per-layer weight matrices (row-major [out][in]) and biases;
// entry hidden_sizes.size() is the output layer.
struct MlpParams {
    std::vector<ParameterStore::GroupId> weights;
    std::vector<ParameterStore::GroupId> biases;
};

// Creates and initializes the MLP parameter groups: weights uniform in
// [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
inline MlpParams init_mlp_params(const MlpSpec& spec, ParameterStore& store, Rng& rng,
                                 const std::string& prefix = "mlp") {
    spec.validate();
    MlpParams params;
    std::size_t fan_in = spec.input_dim;
    const std::size_t n_layers = spec.hidden_sizes.size() + 1;
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
        const std::size_t fan_out =
            layer < spec.hidden_sizes.size() ? spec.hidden_sizes[layer] : spec.output_dim;
        const auto tag = std::to_string(layer);
        const auto w = store.add_group(prefix + ".w" + tag, {fan_out, fan_in});
        const auto b = store.add_group(prefix + ".b" + tag, {fan_out});
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& value : store.values(w)) value = rng.uniform(-bound, bound);
        params.weights.push_back(w);
        params.biases.push_back(b);
        fan_in = fan_out;
    }
    return params;
}

// Looks an existing parameter set up by name (artifact loading path).
inline MlpParams find_mlp_params(const ParameterStore& store, const MlpSpec& spec,
                                 const std::string& prefix = "mlp") {
    MlpParams params;
    for (std::size_t layer = 0; layer <= spec.hidden_sizes.size(); ++layer) {
        const auto tag = std::to_string(layer);
        params.weights.push_back(store.group_id(prefix + ".w" + tag));
        params.biases.push_back(store.group_id(prefix + ".b" + tag));
    }
    return params;
}

struct MlpNodes {
    std::vector<NodeId> hidden; // h(x): last hidden activation
    std::vector<NodeId> output; // f(x): pre-softmax logits / regression scalar
};

// Records f(x) on the tape; gradient flows to every layer through `bind`.
inline MlpNodes forward_mlp(Tape& tape, ParamBinding& bind, const MlpSpec& spec,
                            const MlpParams& params, std::span<const double> x) {
    spec.validate();
    if (x.size() != spec.input_dim)
        throw ContractError("forward_mlp: feature vector dimension does not match spec");

    std::vector<NodeId> current(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) current[i] = tape.leaf(x[i]);

    MlpNodes out;
    const std::size_t n_layers = spec.hidden_sizes.size() + 1;
    std::vector<NodeId> row;
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
        const bool is_output = layer == spec.hidden_sizes.size();
        const std::size_t fan_out = is_output ? spec.output_dim : spec.hidden_sizes[layer];
        const std::size_t fan_in = current.size();
        std::vector<NodeId> next(fan_out);
        row.resize(fan_in);
        for (std::size_t j = 0; j < fan_out; ++j) {
            for (std::size_t i = 0; i < fan_in; ++i)
                row[i] = bind(params.weights[layer], j * fan_in + i);
            NodeId pre = tape.linear(bind(params.biases[layer], j), row, current);
            if (!is_output && spec.hidden_activations[layer] == Activation::kRectifier)
                pre = tape.relu(pre);
            next[j] = pre;
        }
        current = std::move(next);
        if (!is_output) out.hidden = current;
    }
    out.output = std::move(current);
    return out;
}

struct MlpActivations {
    std::vector<double> hidden;
    std::vector<double> output;
};

// Tape-free evaluation used on the inference path (selector and crowd layer
// never participate here).
inline MlpActivations forward_mlp_values(const MlpSpec& spec, const MlpParams& params,
                                         const ParameterStore& store, std::span<const double> x) {
    if (x.size() != spec.input_dim)
        throw ContractError("forward_mlp_values: feature vector dimension does not match spec");
    std::vector<double> current(x.begin(), x.end());
    MlpActivations out;
    const std::size_t n_layers = spec.hidden_sizes.size() + 1;
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
        const bool is_output = layer == spec.hidden_sizes.size();
        const std::size_t fan_out = is_output ? spec.output_dim : spec.hidden_sizes[layer];
        const std::size_t fan_in = current.size();
        const auto weights = store.values(params.weights[layer]);
        const auto biases = store.values(params.biases[layer]);
        std::vector<double> next(fan_out);
        for (std::size_t j = 0; j < fan_out; ++j) {
            double acc = biases[j];
            for (std::size_t i = 0; i < fan_in; ++i) acc += weights[j * fan_in + i] * current[i];
            if (!is_output && spec.hidden_activations[layer] == Activation::kRectifier)
                acc = acc > 0.0 ? acc : 0.0;
            next[j] = acc;
        }
        current = std::move(next);
        if (!is_output) out.hidden = current;
    }
    out.output = std::move(current);
    return out;
}

} // namespace crowdforge
