// crowdforge command-line front end: synthetic crowd generation, training
// (with optional coverage-target grid search and repeated seeded trials),
// evaluation, and worker-quality analysis.
//
// Exit codes: 0 success, 2 usage/validation, 3 runtime failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowdforge/crowdforge.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crowdforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::int64_t wall_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::optional<std::uint64_t> env_seed_override() {
    const char* raw = std::getenv("CROWDFORGE_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    try {
        return std::stoull(raw);
    } catch (const std::exception&) {
        throw ValidationError("CROWDFORGE_SEED is not an unsigned integer: " +
                              std::string(raw));
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return j;
}

SplitFractions parse_fractions(const std::string& text) {
    SplitFractions fractions;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &fractions.train, &fractions.valid,
                    &fractions.test) != 3)
        throw ValidationError("expected --split as train,valid,test fractions: " + text);
    return fractions;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string task;
    std::size_t samples = 0;
    std::size_t features = 8;
    std::size_t classes = 4;
    std::string profiles;
    double separation = 3.0;
    std::string target_fn = "linear_sine";
    std::string split_spec = "0.6,0.2,0.2";
    std::uint64_t seed = 0;
    std::string out;
};

int run_generate(const GenerateArgs& args) {
    const TaskKind task = task_from_string(args.task);
    const std::uint64_t seed = env_seed_override().value_or(args.seed);
    const auto profiles = load_worker_profiles(args.profiles);
    const SplitFractions fractions = parse_fractions(args.split_spec);

    SyntheticData gen =
        task == TaskKind::kClassification
            ? generate_synthetic_classification(args.samples, args.features, args.classes,
                                                profiles, args.separation, seed)
            : generate_synthetic_regression(args.samples, args.features, profiles,
                                            target_function_from_string(args.target_fn),
                                            seed);
    const DataSplit parts = split(gen.data, gen.annotations, fractions, seed);

    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);
    write_features_csv(out_dir / "features.csv", gen.data);
    write_ground_truth_csv(out_dir / "ground_truth.csv", gen.data);
    write_annotations_csv(out_dir / "annotations.csv", gen.annotations);
    write_split_csv(out_dir / "split.csv", parts, gen.data.size());

    json manifest;
    manifest["command"] = "generate";
    manifest["task"] = args.task;
    manifest["seed"] = seed;
    manifest["samples"] = gen.data.size();
    manifest["feature_dim"] = gen.data.feature_dim;
    if (task == TaskKind::kClassification) manifest["num_classes"] = gen.data.num_classes;
    else manifest["target_fn"] = args.target_fn;
    manifest["n_workers"] = gen.annotations.n_workers();
    manifest["n_annotations"] = gen.annotations.size();
    manifest["split"] = {{"train", parts.train_ids.size()},
                         {"valid", parts.valid_ids.size()},
                         {"test", parts.test_ids.size()}};
    manifest["files"] = {{"features", "features.csv"},
                         {"annotations", "annotations.csv"},
                         {"ground_truth", "ground_truth.csv"},
                         {"split", "split.csv"}};
    manifest["wall_clock_ms"] = wall_clock_ms();
    write_json_file(out_dir / "generate_manifest.json", manifest);

    std::cout << "generated " << gen.data.size() << " samples, "
              << gen.annotations.size() << " annotations from "
              << gen.annotations.n_workers() << " workers -> " << out_dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct RunConfig {
    TrainConfig train;
    std::vector<double> c_grid; // empty: single coverage_target run
    MlpSpec spec;               // input_dim filled from the features file
    std::size_t num_classes = 0;
    bool normalize = true; // regression: normalize scores by train-split stats
    fs::path features, annotations, ground_truth, split_file;
    fs::path out_dir;
};

RunConfig parse_run_config(const fs::path& path) {
    const json j = read_json_file(path);
    RunConfig config;
    config.train = train_config_from_json(j);
    if (config.train.task == TaskKind::kRegression) {
        if (!j.contains("batch_size")) config.train.batch_size = 128;
        if (!j.contains("max_epochs")) config.train.max_epochs = 100;
    }

    if (j.contains("c_grid")) {
        config.c_grid = j.at("c_grid").get<std::vector<double>>();
        for (double c : config.c_grid)
            if (!(c > 0.0) || c > 1.0)
                throw ValidationError("c_grid entries must be in (0, 1]");
    }

    config.spec.hidden_sizes =
        j.value("hidden_sizes", std::vector<std::size_t>{16});
    if (j.contains("hidden_activations")) {
        for (const auto& a : j.at("hidden_activations")) {
            const std::string name = a.get<std::string>();
            if (name == "rectifier") config.spec.hidden_activations.push_back(Activation::kRectifier);
            else if (name == "identity") config.spec.hidden_activations.push_back(Activation::kIdentity);
            else throw ValidationError("unknown activation: " + name);
        }
    } else {
        config.spec.hidden_activations.assign(config.spec.hidden_sizes.size(),
                                              Activation::kRectifier);
    }

    config.num_classes = j.value("num_classes", std::size_t{0});
    if (config.train.task == TaskKind::kClassification && config.num_classes < 2)
        throw ValidationError("classification config needs num_classes >= 2");
    config.normalize = j.value("normalize_scores", true);

    if (!j.contains("data")) throw ValidationError("config is missing the data section");
    const json& data = j.at("data");
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    const auto resolve = [&](const std::string& key) {
        const auto file = fs::path(data.at(key).get<std::string>());
        return file.is_absolute() ? file : base / file;
    };
    config.features = resolve("features");
    config.annotations = resolve("annotations");
    config.ground_truth = resolve("ground_truth");
    config.split_file = resolve("split");

    const auto out = fs::path(j.value("out_dir", std::string("run")));
    config.out_dir = out.is_absolute() ? out : base / out;

    for (const fs::path& file :
         {config.features, config.annotations, config.ground_truth, config.split_file})
        if (!fs::exists(file))
            throw ValidationError("referenced data file does not exist: " + file.string());
    return config;
}

struct LoadedData {
    Dataset train_data, valid_data;
    AnnotationSet train_annotations;
    std::optional<NormalizationStats> normalization;
    std::size_t n_workers = 0;
};

LoadedData load_training_data(const RunConfig& config) {
    Dataset full = read_features_csv(config.features, config.train.task, config.num_classes);
    read_ground_truth_csv(config.ground_truth, full);
    const AnnotationSet annotations =
        load_annotations(config.annotations, config.num_classes, full.size(), std::nullopt);
    const auto parts = read_split_csv(config.split_file, full.size());

    std::vector<std::size_t> train_ids, valid_ids;
    for (std::size_t n = 0; n < parts.size(); ++n) {
        if (parts[n] == "train") train_ids.push_back(n);
        else if (parts[n] == "valid") valid_ids.push_back(n);
    }
    if (train_ids.empty() || valid_ids.empty())
        throw ValidationError("split file must assign both train and valid samples");

    LoadedData loaded{take_samples(full, train_ids), take_samples(full, valid_ids),
                      take_annotations(annotations, train_ids), std::nullopt,
                      annotations.n_workers()};

    if (config.train.task == TaskKind::kRegression && config.normalize) {
        const auto stats = NormalizationStats::from_scores(loaded.train_data.ground_truth);
        loaded.train_annotations = normalize_scores(loaded.train_annotations, stats);
        for (double& y : loaded.train_data.ground_truth) y = stats.normalize(y);
        for (double& y : loaded.valid_data.ground_truth) y = stats.normalize(y);
        loaded.normalization = stats;
    }
    return loaded;
}

struct SingleRun {
    ModelArtifact artifact;
    double valid_metric = 0.0;
};

SingleRun train_single(const RunConfig& config, const LoadedData& data, double coverage_target,
                       std::uint64_t seed) {
    TrainConfig train = config.train;
    train.coverage_target = coverage_target;
    train.seed = seed;

    MlpSpec spec = config.spec;
    spec.input_dim = data.train_data.feature_dim;
    spec.output_dim =
        train.task == TaskKind::kClassification ? config.num_classes : std::size_t{1};

    SingleRun run;
    run.artifact.config = train;
    run.artifact.spec = spec;
    run.artifact.num_classes = config.num_classes;
    run.artifact.n_workers = data.n_workers;
    run.artifact.normalization = data.normalization;

    switch (train.method) {
    case TrainMethod::kLsl: {
        LslTrainResult result = train_lsl(spec, train.selector, data.train_data,
                                          data.train_annotations, data.valid_data, train);
        run.artifact.history = std::move(result.history);
        run.artifact.store = std::move(result.store);
        break;
    }
    case TrainMethod::kCrowdLayer: {
        CrowdLayerTrainResult result =
            train_crowd_layer(spec, train.crowd_variant, data.train_data,
                              data.train_annotations, data.valid_data, train);
        run.artifact.history = std::move(result.history);
        run.artifact.store = std::move(result.store);
        break;
    }
    case TrainMethod::kAggregateThenTrain: {
        SupervisedTrainResult result =
            train_on_aggregated(spec, train.aggregation, data.train_data,
                                data.train_annotations, data.valid_data, train);
        run.artifact.history = std::move(result.history);
        run.artifact.store = std::move(result.store);
        break;
    }
    case TrainMethod::kGroundTruth: {
        if (!data.train_data.has_ground_truth())
            throw ValidationError("ground_truth method needs ground-truth labels");
        SupervisedTrainResult result =
            train_supervised(spec, data.train_data, data.train_data.ground_truth,
                             data.valid_data, train);
        run.artifact.history = std::move(result.history);
        run.artifact.store = std::move(result.store);
        break;
    }
    }
    run.valid_metric =
        run.artifact.history.epochs[run.artifact.history.best_epoch].valid_metric;
    return run;
}

int run_train(const std::string& config_path, std::size_t repeats,
              std::optional<std::uint64_t> base_seed_flag) {
    const RunConfig config = parse_run_config(config_path);
    const std::uint64_t base_seed =
        base_seed_flag.value_or(env_seed_override().value_or(config.train.seed));
    const LoadedData data = load_training_data(config);
    fs::create_directories(config.out_dir);

    // the Dawid-Skene aggregate is deterministic per dataset; export it once
    if (config.train.method == TrainMethod::kAggregateThenTrain &&
        config.train.aggregation == AggregationKind::kDawidSkene) {
        const DawidSkeneResult ds =
            dawid_skene(data.train_annotations, config.num_classes);
        write_dawid_skene_posteriors_csv(config.out_dir / "ds_posteriors.csv", ds);
        write_json_file(config.out_dir / "ds_confusions.json", dawid_skene_to_json(ds));
    }

    json manifest;
    manifest["command"] = "train";
    manifest["config"] = train_config_to_json(config.train);
    manifest["config"]["num_classes"] = config.num_classes;
    manifest["config"]["hidden_sizes"] = config.spec.hidden_sizes;
    manifest["base_seed"] = base_seed;
    manifest["repeats"] = repeats;
    if (!config.c_grid.empty()) manifest["c_grid"] = config.c_grid;

    json runs = json::array();
    std::vector<double> selected_metrics;
    for (std::size_t r = 0; r < repeats; ++r) {
        const std::uint64_t seed = base_seed + r;
        const fs::path run_dir =
            repeats > 1 ? config.out_dir / ("run_" + std::to_string(r)) : config.out_dir;
        fs::create_directories(run_dir);

        json run_entry;
        run_entry["seed"] = seed;

        std::optional<SingleRun> best;
        double selected_c = config.train.coverage_target;
        if (config.c_grid.empty()) {
            best = train_single(config, data, config.train.coverage_target, seed);
        } else {
            json grid = json::array();
            for (double c : config.c_grid) {
                SingleRun candidate = train_single(config, data, c, seed);
                grid.push_back({{"c", c},
                                {"valid_metric", candidate.valid_metric},
                                {"best_epoch", candidate.artifact.history.best_epoch}});
                if (!best || metric_improves(config.train.task, candidate.valid_metric,
                                             best->valid_metric)) {
                    best = std::move(candidate);
                    selected_c = c;
                }
            }
            run_entry["grid"] = std::move(grid);
            run_entry["selected_c"] = selected_c;
        }

        const fs::path model_path = run_dir / "model.json";
        save_model(model_path, best->artifact);
        run_entry["model"] = fs::relative(model_path, config.out_dir).string();
        run_entry["valid_metric"] = best->valid_metric;
        run_entry["best_epoch"] = best->artifact.history.best_epoch;
        selected_metrics.push_back(best->valid_metric);
        runs.push_back(std::move(run_entry));
    }
    manifest["runs"] = std::move(runs);

    if (repeats > 1) {
        double mean = 0.0;
        for (double m : selected_metrics) mean += m;
        mean /= static_cast<double>(selected_metrics.size());
        double var = 0.0;
        for (double m : selected_metrics) var += (m - mean) * (m - mean);
        var /= static_cast<double>(selected_metrics.size());
        manifest["aggregate"] = {{"valid_metric_mean", mean},
                                 {"valid_metric_std", std::sqrt(var)}};
    }
    manifest["wall_clock_ms"] = wall_clock_ms();
    write_json_file(config.out_dir / "manifest.json", manifest);

    std::cout << "trained " << repeats << " run(s) -> "
              << (config.out_dir / "manifest.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct SelectedPart {
    Dataset data;
    std::vector<std::size_t> ids;
};

SelectedPart load_part(const ModelArtifact& artifact, const fs::path& features,
                       const fs::path& ground_truth, const std::string& split_file,
                       const std::string& part) {
    Dataset full =
        read_features_csv(features, artifact.config.task, artifact.num_classes);
    if (full.feature_dim != artifact.spec.input_dim)
        throw ValidationError("feature dimension " + std::to_string(full.feature_dim) +
                              " does not match the model input dimension " +
                              std::to_string(artifact.spec.input_dim));
    read_ground_truth_csv(ground_truth, full);

    SelectedPart selected;
    if (split_file.empty()) {
        selected.ids.resize(full.size());
        for (std::size_t n = 0; n < full.size(); ++n) selected.ids[n] = n;
        selected.data = std::move(full);
    } else {
        const auto parts = read_split_csv(split_file, full.size());
        for (std::size_t n = 0; n < full.size(); ++n)
            if (parts[n] == part) selected.ids.push_back(n);
        if (selected.ids.empty())
            throw ValidationError("split part '" + part + "' selects no samples");
        selected.data = take_samples(full, selected.ids);
    }
    return selected;
}

int run_evaluate(const std::string& model_path, const std::string& features,
                 const std::string& ground_truth, const std::string& split_file,
                 const std::string& part, std::string out_path) {
    const ModelArtifact artifact = load_model(model_path);
    const SelectedPart selected =
        load_part(artifact, features, ground_truth, split_file, part);
    const MlpParams model = artifact.model();

    MetricsReport report;
    if (artifact.config.task == TaskKind::kClassification) {
        const auto logits = predict_logits(artifact.spec, model, artifact.store, selected.data);
        std::vector<int> truths(selected.data.size());
        for (std::size_t n = 0; n < truths.size(); ++n)
            truths[n] = selected.data.class_label(n);
        report = classification_metrics(logits, truths, artifact.num_classes);
    } else {
        auto predictions = predict_scalars(artifact.spec, model, artifact.store, selected.data);
        if (artifact.normalization)
            for (double& p : predictions) p = artifact.normalization->denormalize(p);
        report = regression_metrics(predictions, selected.data.ground_truth);
    }

    const json j = report.to_json();
    if (out_path.empty())
        out_path = (fs::path(model_path).parent_path() / "metrics.json").string();
    write_json_file(out_path, j);
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int run_analyze(const std::string& model_path, const std::string& features,
                const std::string& annotations_path, const std::string& ground_truth,
                const std::string& split_file, const std::string& part,
                std::string out_dir) {
    const ModelArtifact artifact = load_model(model_path);
    if (artifact.config.method != TrainMethod::kLsl)
        throw ValidationError("analyze needs an lsl artifact with a selector; this model "
                              "was trained with method '" +
                              to_string(artifact.config.method) + "'");

    Dataset full = read_features_csv(features, artifact.config.task, artifact.num_classes);
    if (full.feature_dim != artifact.spec.input_dim)
        throw ValidationError("feature dimension does not match the model");
    read_ground_truth_csv(ground_truth, full);
    AnnotationSet annotations =
        load_annotations(annotations_path, artifact.num_classes, full.size(),
                         artifact.n_workers);

    Dataset data = std::move(full);
    if (!split_file.empty()) {
        const auto parts = read_split_csv(split_file, data.size());
        std::vector<std::size_t> ids;
        for (std::size_t n = 0; n < data.size(); ++n)
            if (parts[n] == part) ids.push_back(n);
        if (ids.empty())
            throw ValidationError("split part '" + part + "' selects no samples");
        annotations = take_annotations(annotations, ids);
        data = take_samples(data, ids);
    }

    // the selector consumed normalized scores during regression training
    const AnnotationSet scoring =
        artifact.normalization ? normalize_scores(annotations, *artifact.normalization)
                               : annotations;

    const WorkerQualityReport report = worker_quality_analysis(
        artifact.selector(), artifact.store, artifact.spec, artifact.model(), data,
        annotations, scoring, artifact.config.task);

    if (out_dir.empty()) out_dir = fs::path(model_path).parent_path().string();
    fs::create_directories(out_dir);
    report.write_csv(fs::path(out_dir) / "worker_quality.csv");
    write_json_file(fs::path(out_dir) / "worker_quality.json", report.to_json());
    std::cout << "pearson_r " << report.pearson_r << " over " << report.rows.size()
              << " workers -> " << out_dir << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowdforge: learning-from-crowds training and analysis toolkit"};
    app.require_subcommand(1);

    GenerateArgs gen_args;
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic crowd dataset");
    generate->add_option("--task", gen_args.task, "classification | regression")->required();
    generate->add_option("--samples", gen_args.samples, "number of samples")->required();
    generate->add_option("--features", gen_args.features, "feature dimension (default 8)");
    generate->add_option("--classes", gen_args.classes, "class count (classification)");
    generate->add_option("--profiles", gen_args.profiles, "worker profile JSON")->required();
    generate->add_option("--separation", gen_args.separation, "cluster separation");
    generate->add_option("--target-fn", gen_args.target_fn,
                         "linear | sine | linear_sine (regression)");
    generate->add_option("--split", gen_args.split_spec, "train,valid,test fractions");
    generate->add_option("--seed", gen_args.seed, "generation seed");
    generate->add_option("--out", gen_args.out, "output directory")->required();

    std::string train_config;
    std::size_t repeats = 1;
    std::optional<std::uint64_t> base_seed;
    CLI::App* train = app.add_subcommand("train", "train a model from a run config");
    train->add_option("--config", train_config, "run config JSON")->required();
    train->add_option("--repeats", repeats, "number of seeded trials (default 1)");
    train->add_option("--base-seed", base_seed, "first seed for repeated trials");

    std::string eval_model, eval_features, eval_truth, eval_split, eval_part = "test",
                eval_out;
    CLI::App* evaluate = app.add_subcommand("evaluate", "compute test metrics for a model");
    evaluate->add_option("--model", eval_model, "model artifact JSON")->required();
    evaluate->add_option("--features", eval_features, "features CSV")->required();
    evaluate->add_option("--ground-truth", eval_truth, "ground-truth CSV")->required();
    evaluate->add_option("--split", eval_split, "split CSV (optional)");
    evaluate->add_option("--part", eval_part, "split part to evaluate (default test)");
    evaluate->add_option("--out", eval_out, "metrics JSON output path");

    std::string an_model, an_features, an_annotations, an_truth, an_split,
        an_part = "train", an_out;
    CLI::App* analyze = app.add_subcommand("analyze", "worker quality vs selector scores");
    analyze->add_option("--model", an_model, "lsl model artifact JSON")->required();
    analyze->add_option("--features", an_features, "features CSV")->required();
    analyze->add_option("--annotations", an_annotations, "annotations CSV")->required();
    analyze->add_option("--ground-truth", an_truth, "ground-truth CSV")->required();
    analyze->add_option("--split", an_split, "split CSV (optional)");
    analyze->add_option("--part", an_part, "split part to analyze (default train)");
    analyze->add_option("--out", an_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (generate->parsed()) return run_generate(gen_args);
        if (train->parsed()) return run_train(train_config, repeats, base_seed);
        if (evaluate->parsed())
            return run_evaluate(eval_model, eval_features, eval_truth, eval_split, eval_part,
                                eval_out);
        if (analyze->parsed())
            return run_analyze(an_model, an_features, an_annotations, an_truth, an_split,
                               an_part, an_out);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
