#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crowdforge/analysis.hpp"
#include "crowdforge/metrics.hpp"
#include "crowdforge/rng.hpp"

using namespace crowdforge;

namespace {

std::vector<std::vector<double>> one_hot_logits(std::span<const int> labels, std::size_t k,
                                                double confidence = 4.0) {
    std::vector<std::vector<double>> logits;
    for (int label : labels) {
        std::vector<double> row(k, 0.0);
        row[static_cast<std::size_t>(label)] = confidence;
        logits.push_back(std::move(row));
    }
    return logits;
}

} // namespace

TEST_CASE("classification_metrics: perfect predictor") {
    const std::vector<int> truths{0, 1, 2, 0, 1, 2};
    const auto logits = one_hot_logits(truths, 3);
    const MetricsReport report = classification_metrics(logits, truths, 3);
    REQUIRE(report.accuracy == 1.0);
    REQUIRE(report.macro_precision == 1.0);
    REQUIRE(report.macro_recall == 1.0);
    REQUIRE(report.ovr_macro_auc.has_value());
    REQUIRE(*report.ovr_macro_auc == 1.0);
    REQUIRE(report.sample_count == 6);
}

TEST_CASE("classification_metrics: constant predictor on a balanced set") {
    const std::vector<int> truths{0, 0, 1, 1};
    const std::vector<int> predicted{0, 0, 0, 0};
    const auto logits = one_hot_logits(predicted, 2);
    const MetricsReport report = classification_metrics(logits, truths, 2);
    REQUIRE(report.accuracy == 0.5);
    REQUIRE(report.macro_recall == 0.5); // class 0 recall 1, class 1 recall 0
    // class 1 never predicted: its precision term is 0 but still counted
    REQUIRE(report.macro_precision == 0.25);
}

TEST_CASE("classification_metrics: errors") {
    REQUIRE_THROWS_AS(classification_metrics({}, std::vector<int>{}, 2), ContractError);
    const std::vector<int> bad{0, 5};
    REQUIRE_THROWS_AS(classification_metrics(one_hot_logits(std::vector<int>{0, 1}, 2), bad, 2),
                      ContractError);
}

TEST_CASE("rank_auc: hand-enumerable four-point case") {
    // class-1 truths carry scores 0.9/0.8, class-0 truths 0.4/0.1: separation is
    // perfect, so every positive outranks every negative
    const std::vector<double> scores{0.9, 0.8, 0.4, 0.1};
    const std::vector<bool> positives{true, true, false, false};
    REQUIRE(*rank_auc(scores, positives) == 1.0);

    SECTION("reversed scores give 0") {
        const std::vector<double> reversed{0.1, 0.2, 0.8, 0.9};
        REQUIRE(*rank_auc(reversed, positives) == 0.0);
    }

    SECTION("all-tied scores give 0.5") {
        const std::vector<double> tied{0.5, 0.5, 0.5, 0.5};
        REQUIRE(*rank_auc(tied, positives) == 0.5);
    }

    SECTION("single-class truth is undefined") {
        const std::vector<bool> all_pos{true, true, true, true};
        REQUIRE_FALSE(rank_auc(scores, all_pos).has_value());
    }
}

TEST_CASE("rank_auc is invariant under strictly monotone score transforms") {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 5 + rng.uniform_int(20);
        std::vector<double> scores(n);
        std::vector<bool> positives(n);
        bool any_pos = false, any_neg = false;
        for (std::size_t k = 0; k < n; ++k) {
            scores[k] = rng.uniform(-2.0, 2.0);
            positives[k] = rng.uniform() < 0.4;
            (positives[k] ? any_pos : any_neg) = true;
        }
        if (!any_pos || !any_neg) continue;

        const auto base = rank_auc(scores, positives);
        std::vector<double> cubed(n), expd(n);
        for (std::size_t k = 0; k < n; ++k) {
            cubed[k] = scores[k] * scores[k] * scores[k];
            expd[k] = std::exp(scores[k]);
        }
        REQUIRE_THAT(*rank_auc(cubed, positives), Catch::Matchers::WithinAbs(*base, 1e-12));
        REQUIRE_THAT(*rank_auc(expd, positives), Catch::Matchers::WithinAbs(*base, 1e-12));
    }
}

TEST_CASE("accuracy equals class-frequency-weighted mean recall") {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 10 + rng.uniform_int(40);
        const std::size_t k = 2 + rng.uniform_int(3);
        std::vector<int> truths(n), predicted(n);
        for (std::size_t s = 0; s < n; ++s) {
            truths[s] = static_cast<int>(rng.uniform_int(k));
            predicted[s] = static_cast<int>(rng.uniform_int(k));
        }
        const MetricsReport report =
            classification_metrics(one_hot_logits(predicted, k), truths, k);

        std::vector<std::size_t> support(k, 0), correct(k, 0);
        for (std::size_t s = 0; s < n; ++s) {
            ++support[truths[s]];
            if (truths[s] == predicted[s]) ++correct[truths[s]];
        }
        double weighted = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            if (support[c] > 0)
                weighted += (static_cast<double>(support[c]) / n) *
                            (static_cast<double>(correct[c]) / support[c]);
        REQUIRE_THAT(report.accuracy, Catch::Matchers::WithinAbs(weighted, 1e-12));
    }
}

TEST_CASE("regression_metrics: exact small cases") {
    SECTION("perfect predictions") {
        const std::vector<double> y{1.0, -2.0, 0.5};
        const MetricsReport report = regression_metrics(y, y);
        REQUIRE(report.mae == 0.0);
        REQUIRE(report.rmse == 0.0);
        REQUIRE(*report.r2 == 1.0);
    }

    SECTION("predicting the mean scores R^2 = 0") {
        const std::vector<double> truths{1.0, 2.0, 3.0};
        const std::vector<double> predictions{2.0, 2.0, 2.0};
        const MetricsReport report = regression_metrics(predictions, truths);
        REQUIRE_THAT(*report.r2, Catch::Matchers::WithinAbs(0.0, 1e-15));
    }

    SECTION("hand arithmetic") {
        const std::vector<double> predictions{0.0, 0.0};
        const std::vector<double> truths{1.0, -1.0};
        const MetricsReport report = regression_metrics(predictions, truths);
        REQUIRE(report.mae == 1.0);
        REQUIRE(report.rmse == 1.0);
        REQUIRE(*report.r2 == 0.0);
    }

    SECTION("constant truths leave R^2 undefined") {
        const std::vector<double> truths{2.0, 2.0};
        const std::vector<double> predictions{1.0, 3.0};
        const MetricsReport report = regression_metrics(predictions, truths);
        REQUIRE_FALSE(report.r2.has_value());
    }

    SECTION("RMSE >= MAE on random inputs") {
        Rng rng(47);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t n = 2 + rng.uniform_int(30);
            std::vector<double> predictions(n), truths(n);
            for (std::size_t s = 0; s < n; ++s) {
                predictions[s] = rng.uniform(-5.0, 5.0);
                truths[s] = rng.uniform(-5.0, 5.0);
            }
            const MetricsReport report = regression_metrics(predictions, truths);
            REQUIRE(report.rmse >= report.mae - 1e-12);
        }
    }
}

TEST_CASE("pearson: exact values and properties") {
    SECTION("colinear") {
        const std::vector<double> a{1.0, 2.0, 3.0};
        const std::vector<double> b{2.0, 4.0, 6.0};
        REQUIRE_THAT(pearson(a, b), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }

    SECTION("anti-colinear") {
        const std::vector<double> a{1.0, 2.0, 3.0};
        const std::vector<double> b{3.0, 2.0, 1.0};
        REQUIRE_THAT(pearson(a, b), Catch::Matchers::WithinAbs(-1.0, 1e-12));
    }

    SECTION("hand-computed 0.8 case") {
        const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
        const std::vector<double> b{1.0, 3.0, 2.0, 4.0};
        // covariance sum 4.0 over sqrt(5 * 5)
        REQUIRE_THAT(pearson(a, b), Catch::Matchers::WithinAbs(0.8, 1e-12));
    }

    SECTION("zero variance is an error") {
        const std::vector<double> a{1.0, 1.0, 1.0};
        const std::vector<double> b{1.0, 2.0, 3.0};
        REQUIRE_THROWS_AS(pearson(a, b), NumericError);
    }

    SECTION("symmetric and invariant under positive affine transforms") {
        Rng rng(53);
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t n = 3 + rng.uniform_int(20);
            std::vector<double> a(n), b(n);
            for (std::size_t k = 0; k < n; ++k) {
                a[k] = rng.uniform(-3.0, 3.0);
                b[k] = rng.uniform(-3.0, 3.0);
            }
            const double r = pearson(a, b);
            REQUIRE_THAT(pearson(b, a), Catch::Matchers::WithinAbs(r, 1e-10));

            const double scale = rng.uniform(0.1, 5.0);
            const double shift = rng.uniform(-10.0, 10.0);
            std::vector<double> transformed = a;
            for (double& v : transformed) v = scale * v + shift;
            REQUIRE_THAT(pearson(transformed, b), Catch::Matchers::WithinAbs(r, 1e-10));
        }
    }
}

TEST_CASE("worker_quality_analysis: constructed correlations") {
    MlpSpec spec;
    spec.input_dim = 2;
    spec.hidden_sizes = {2};
    spec.hidden_activations = {Activation::kRectifier};
    spec.output_dim = 2;

    Dataset data;
    data.task = TaskKind::kClassification;
    data.feature_dim = 2;
    data.num_classes = 2;
    data.features.assign(10, {0.0, 0.0});
    data.ground_truth.assign(10, 0.0);

    const auto logit = [](double p) { return std::log(p / (1.0 - p)); };

    SECTION("perfect monotone match gives r = 1") {
        // worker accuracies 0.9 / 0.5 / 0.1 via hand-placed flips
        std::vector<Annotation> triples;
        for (std::size_t n = 0; n < 10; ++n) {
            triples.push_back({n, 0, n < 1 ? 1.0 : 0.0});
            triples.push_back({n, 1, n < 5 ? 1.0 : 0.0});
            triples.push_back({n, 2, n < 9 ? 1.0 : 0.0});
        }
        const AnnotationSet annotations(10, 3, 2, triples);

        ParameterStore store;
        Rng rng(3);
        const MlpParams mlp = init_mlp_params(spec, store, rng);
        const Selector sel = init_selector(SelectorKind::kSimple, 3, 0, 0, 3, store, rng);
        auto w = store.values(sel.weights);
        w[0] = logit(0.9);
        w[1] = logit(0.5);
        w[2] = logit(0.1);

        const WorkerQualityReport report = worker_quality_analysis(
            sel, store, spec, mlp, data, annotations, annotations,
            TaskKind::kClassification);
        REQUIRE(report.rows.size() == 3);
        REQUIRE_THAT(report.rows[0].quality, Catch::Matchers::WithinAbs(0.9, 1e-12));
        REQUIRE_THAT(report.rows[1].quality, Catch::Matchers::WithinAbs(0.5, 1e-12));
        REQUIRE_THAT(report.rows[2].quality, Catch::Matchers::WithinAbs(0.1, 1e-12));
        REQUIRE_THAT(report.pearson_r, Catch::Matchers::WithinAbs(1.0, 1e-9));
    }

    SECTION("identical workers and equal weights: correlation undefined") {
        std::vector<Annotation> triples;
        for (std::size_t n = 0; n < 10; ++n) {
            triples.push_back({n, 0, 0.0});
            triples.push_back({n, 1, 0.0});
        }
        const AnnotationSet annotations(10, 2, 2, triples);

        ParameterStore store;
        Rng rng(3);
        const MlpParams mlp = init_mlp_params(spec, store, rng);
        const Selector sel = init_selector(SelectorKind::kSimple, 2, 0, 0, 3, store, rng);

        REQUIRE_THROWS_AS(worker_quality_analysis(sel, store, spec, mlp, data, annotations,
                                                  annotations, TaskKind::kClassification),
                          NumericError);
    }

    SECTION("workers without annotations are excluded") {
        std::vector<Annotation> triples;
        for (std::size_t n = 0; n < 10; ++n) {
            triples.push_back({n, 0, 0.0});
            triples.push_back({n, 2, n < 5 ? 1.0 : 0.0});
        }
        const AnnotationSet annotations(10, 3, 2, triples);

        ParameterStore store;
        Rng rng(3);
        const MlpParams mlp = init_mlp_params(spec, store, rng);
        const Selector sel = init_selector(SelectorKind::kSimple, 3, 0, 0, 3, store, rng);
        store.values(sel.weights)[0] = 1.0;
        store.values(sel.weights)[2] = -1.0;

        const WorkerQualityReport report = worker_quality_analysis(
            sel, store, spec, mlp, data, annotations, annotations,
            TaskKind::kClassification);
        REQUIRE(report.rows.size() == 2);
        REQUIRE(report.rows[0].worker == 0);
        REQUIRE(report.rows[1].worker == 2);
    }
}
