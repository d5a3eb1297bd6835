#pragma once

#include <filesystem>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "crowdforge/crowd_layer.hpp"
#include "crowdforge/selectors.hpp"
#include "crowdforge/training.hpp"

namespace crowdforge {

inline nlohmann::json train_config_to_json(const TrainConfig& config) {
    return {{"task", to_string(config.task)},
            {"method", to_string(config.method)},
            {"selector", to_string(config.selector)},
            {"crowd_variant", to_string(config.crowd_variant)},
            {"aggregation", to_string(config.aggregation)},
            {"coverage_target", config.coverage_target},
            {"penalty_weight", config.penalty_weight},
            {"d0", config.exponent},
            {"coverage_epsilon", config.coverage_epsilon},
            {"learning_rate", config.learning_rate},
            {"batch_size", config.batch_size},
            {"max_epochs", config.max_epochs},
            {"patience", config.patience},
            {"pretrain_epochs", config.pretrain_epochs},
            {"seed", config.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig config;
    config.task = task_from_string(j.value("task", "classification"));
    config.method = train_method_from_string(j.value("method", "lsl"));
    config.selector = selector_kind_from_string(j.value("selector", "simple"));
    config.crowd_variant = crowd_layer_variant_from_string(j.value("crowd_variant", "MW"));
    config.aggregation = aggregation_from_string(j.value("aggregation", "mv"));
    config.coverage_target = j.value("coverage_target", 0.5);
    config.penalty_weight = j.value("penalty_weight", 32.0);
    config.exponent = j.value("d0", 3);
    config.coverage_epsilon = j.value("coverage_epsilon", 1e-8);
    config.learning_rate = j.value("learning_rate", 0.01);
    config.batch_size = j.value("batch_size", std::size_t{64});
    config.max_epochs = j.value("max_epochs", std::size_t{50});
    config.patience = j.value("patience", std::size_t{10});
    config.pretrain_epochs = j.value("pretrain_epochs", std::size_t{0});
    config.seed = j.value("seed", std::uint64_t{0});
    return config;
}

inline nlohmann::json history_to_json(const TrainHistory& history) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const EpochRecord& record : history.epochs) {
        nlohmann::json e{{"train_loss", record.train_loss},
                         {"valid_metric", record.valid_metric}};
        if (record.mean_coverage) e["coverage"] = *record.mean_coverage;
        else e["coverage"] = nullptr;
        epochs.push_back(std::move(e));
    }
    return {{"best_epoch", history.best_epoch}, {"epochs", std::move(epochs)}};
}

inline TrainHistory history_from_json(const nlohmann::json& j) {
    TrainHistory history;
    history.best_epoch = j.at("best_epoch").get<std::size_t>();
    for (const auto& e : j.at("epochs")) {
        EpochRecord record;
        record.train_loss = e.at("train_loss").get<double>();
        record.valid_metric = e.at("valid_metric").get<double>();
        if (!e.at("coverage").is_null())
            record.mean_coverage = e.at("coverage").get<double>();
        history.epochs.push_back(record);
    }
    return history;
}

inline nlohmann::json mlp_spec_to_json(const MlpSpec& spec) {
    nlohmann::json activations = nlohmann::json::array();
    for (Activation a : spec.hidden_activations)
        activations.push_back(a == Activation::kRectifier ? "rectifier" : "identity");
    return {{"input_dim", spec.input_dim},
            {"hidden_sizes", spec.hidden_sizes},
            {"hidden_activations", std::move(activations)},
            {"output_dim", spec.output_dim}};
}

inline MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
    MlpSpec spec;
    spec.input_dim = j.at("input_dim").get<std::size_t>();
    spec.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("hidden_activations")) {
        const std::string name = a.get<std::string>();
        if (name == "rectifier") spec.hidden_activations.push_back(Activation::kRectifier);
        else if (name == "identity") spec.hidden_activations.push_back(Activation::kIdentity);
        else throw ValidationError("unknown activation: " + name);
    }
    spec.output_dim = j.at("output_dim").get<std::size_t>();
    spec.validate();
    return spec;
}

// Everything a trained run produces: architecture, every parameter group
// (model plus selector or crowd layer), the resolved config, and the history.
struct ModelArtifact {
    TrainConfig config;
    MlpSpec spec;
    std::size_t num_classes = 0;
    std::size_t n_workers = 0;
    std::optional<NormalizationStats> normalization;
    TrainHistory history;
    ParameterStore store;

    MlpParams model() const { return find_mlp_params(store, spec); }

    Selector selector() const {
        if (config.method != TrainMethod::kLsl)
            throw ContractError("artifact has no selector (method is " +
                                to_string(config.method) + ")");
        return find_selector(config.selector, n_workers, num_classes, spec.feature_dim(),
                             config.exponent, store);
    }
};

inline void save_model(const std::filesystem::path& path, const ModelArtifact& artifact) {
    nlohmann::json j;
    j["format"] = "crowdforge-model";
    j["version"] = 1;
    j["config"] = train_config_to_json(artifact.config);
    j["mlp"] = mlp_spec_to_json(artifact.spec);
    j["num_classes"] = artifact.num_classes;
    j["n_workers"] = artifact.n_workers;
    if (artifact.normalization)
        j["normalization"] = {{"mean", artifact.normalization->mean},
                              {"stddev", artifact.normalization->stddev}};
    else
        j["normalization"] = nullptr;
    j["history"] = history_to_json(artifact.history);

    nlohmann::json parameters; // object keys serialize sorted: stable bytes
    for (ParameterStore::GroupId g = 0; g < artifact.store.group_count(); ++g) {
        const auto values = artifact.store.values(g);
        parameters[artifact.store.name(g)] = {
            {"shape", artifact.store.shape(g)},
            {"values", std::vector<double>(values.begin(), values.end())}};
    }
    j["parameters"] = std::move(parameters);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline ModelArtifact load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.filename().string() + ": " + e.what());
    }
    if (j.value("format", "") != "crowdforge-model")
        throw ValidationError(path.string() + " is not a crowdforge model artifact");

    ModelArtifact artifact;
    artifact.config = train_config_from_json(j.at("config"));
    artifact.spec = mlp_spec_from_json(j.at("mlp"));
    artifact.num_classes = j.at("num_classes").get<std::size_t>();
    artifact.n_workers = j.at("n_workers").get<std::size_t>();
    if (!j.at("normalization").is_null())
        artifact.normalization = NormalizationStats{
            j["normalization"].at("mean").get<double>(),
            j["normalization"].at("stddev").get<double>()};
    artifact.history = history_from_json(j.at("history"));

    for (const auto& [name, group] : j.at("parameters").items()) {
        const auto shape = group.at("shape").get<std::vector<std::size_t>>();
        const auto values = group.at("values").get<std::vector<double>>();
        const auto id = artifact.store.add_group(name, shape);
        auto dst = artifact.store.values(id);
        if (values.size() != dst.size())
            throw ValidationError("parameter group " + name + " has inconsistent size");
        std::copy(values.begin(), values.end(), dst.begin());
    }
    return artifact;
}

} // namespace crowdforge
