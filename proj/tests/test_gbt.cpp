#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "shapcluster/errors.hpp"
#include "shapcluster/gbt.hpp"
#include "shapcluster/rng.hpp"

using namespace shapcluster;

namespace {

Dataset separable_dataset() {
    // one threshold on feature 0 separates the classes perfectly
    Dataset d;
    d.features = Matrix(40, 2);
    std::vector<int> labels(40);
    RngStream rng(8, 0);
    for (int i = 0; i < 40; ++i) {
        const bool hi = i % 2 == 0;
        d.features(i, 0) = hi ? rng.uniform(1.0, 2.0) : rng.uniform(-2.0, -1.0);
        d.features(i, 1) = rng.uniform(-1.0, 1.0);
        labels[i] = hi ? 1 : 0;
    }
    d.labels = labels;
    d.feature_names = {"x0", "x1"};
    d.class_names = {"neg", "pos"};
    return d;
}

Dataset random_labeled(RngStream& rng, std::size_t n, std::size_t p, std::size_t k) {
    Dataset d;
    d.features = Matrix(n, p);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) d.features(i, j) = rng.uniform(-3.0, 3.0);
        labels[i] = static_cast<int>(rng.uniform_int(k));
    }
    d.labels = labels;
    for (std::size_t j = 0; j < p; ++j) d.feature_names.push_back("f" + std::to_string(j));
    for (std::size_t c = 0; c < k; ++c) d.class_names.push_back("c" + std::to_string(c));
    return d;
}

double total_log_loss(const Ensemble& e, const Dataset& d) {
    double loss = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i)
        loss += softmax_log_loss(e.predict_margins(d.features.row(i)), (*d.labels)[i]);
    return loss;
}

} // namespace

TEST_CASE("softmax gradients and hessians match central finite differences") {
    RngStream rng(42, 10);
    const double step = 1e-4;
    for (int round = 0; round < 200; ++round) {
        const std::size_t k = 2 + rng.uniform_int(4);
        std::vector<double> margins(k);
        for (auto& m : margins) m = rng.uniform(-4.0, 4.0);
        const int label = static_cast<int>(rng.uniform_int(k));
        std::vector<double> grad(k), hess(k);
        softmax_gradients(margins, label, grad, hess);
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> up = margins, down = margins;
            up[c] += step;
            down[c] -= step;
            const double g_fd =
                (softmax_log_loss(up, label) - softmax_log_loss(down, label)) / (2 * step);
            const double h_fd = (softmax_log_loss(up, label) + softmax_log_loss(down, label) -
                                 2 * softmax_log_loss(margins, label)) /
                                (step * step);
            CHECK(std::abs(grad[c] - g_fd) < 1e-6);
            CHECK(std::abs(hess[c] - h_fd) < 1e-6);
        }
    }
}

TEST_CASE("fit reaches perfect accuracy on separable data") {
    const Dataset d = separable_dataset();
    GbtConfig cfg;
    cfg.rounds = 5;
    const Ensemble e = fit(d, cfg);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.n(); ++i)
        correct += e.predict_class(d.features.row(i)) == (*d.labels)[i];
    CHECK(correct == d.n());
}

TEST_CASE("fit rejects degenerate inputs") {
    Dataset single = separable_dataset();
    for (int& y : *single.labels) y = 1;
    CHECK_THROWS_AS(fit(single, GbtConfig{}), data_error);

    Dataset unlabeled = separable_dataset();
    unlabeled.labels.reset();
    CHECK_THROWS_AS(fit(unlabeled, GbtConfig{}), data_error);

    GbtConfig bad;
    bad.eta = 0.0;
    CHECK_THROWS_AS(fit(separable_dataset(), bad), config_error);
}

TEST_CASE("zero-round prediction returns base scores and stumps add eta-scaled leaves") {
    RngStream rng(3, 3);
    const Dataset d = random_labeled(rng, 30, 3, 3);
    GbtConfig cfg;
    cfg.rounds = 1;
    cfg.max_depth = 1;
    const Ensemble e = fit(d, cfg);

    Ensemble no_rounds = e;
    no_rounds.trees.clear();
    const auto base = no_rounds.predict_margins(d.features.row(0));
    for (std::size_t c = 0; c < e.k; ++c) CHECK(base[c] == e.base_score[c]);

    const auto margins = e.predict_margins(d.features.row(0));
    for (std::size_t c = 0; c < e.k; ++c) {
        const double leaf = e.trees[0][c].eval(d.features.row(0));
        CHECK(margins[c] == doctest::Approx(e.base_score[c] + e.eta * leaf).epsilon(1e-12));
    }
}

TEST_CASE("softmax of predicted margins sums to one on random inputs") {
    RngStream rng(21, 8);
    const Dataset d = random_labeled(rng, 60, 4, 3);
    const Ensemble e = fit(d, GbtConfig{.rounds = 10});
    std::vector<double> probs(3);
    for (int round = 0; round < 1000; ++round) {
        std::vector<double> x(4);
        for (auto& v : x) v = rng.uniform(-4.0, 4.0);
        softmax(e.predict_margins(x), probs);
        double sum = 0.0;
        for (double p : probs) sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("training log-loss is non-increasing across rounds") {
    RngStream rng(14, 2);
    const Dataset d = random_labeled(rng, 120, 5, 3);
    GbtConfig cfg;
    cfg.rounds = 30;
    cfg.eta = 0.3;
    cfg.gamma = 0.0;
    const Ensemble full = fit(d, cfg);
    Ensemble partial = full;
    double prev = 1e300;
    for (int r = 0; r <= cfg.rounds; ++r) {
        partial.trees.assign(full.trees.begin(), full.trees.begin() + r);
        const double loss = total_log_loss(partial, d);
        CHECK(loss <= prev + 1e-9);
        prev = loss;
    }
}

TEST_CASE("fit is deterministic") {
    RngStream rng(50, 6);
    const Dataset d = random_labeled(rng, 80, 4, 3);
    const Ensemble a = fit(d, GbtConfig{.rounds = 8});
    const Ensemble b = fit(d, GbtConfig{.rounds = 8});
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t r = 0; r < a.trees.size(); ++r)
        for (std::size_t c = 0; c < a.k; ++c) {
            REQUIRE(a.trees[r][c].nodes.size() == b.trees[r][c].nodes.size());
            for (std::size_t i = 0; i < a.trees[r][c].nodes.size(); ++i) {
                CHECK(a.trees[r][c].nodes[i].feature == b.trees[r][c].nodes[i].feature);
                CHECK(a.trees[r][c].nodes[i].threshold == b.trees[r][c].nodes[i].threshold);
                CHECK(a.trees[r][c].nodes[i].value == b.trees[r][c].nodes[i].value);
            }
        }
}

TEST_CASE("leaf weights minimize the second-order objective") {
    // for leaf weight w: obj(w) = G w + (H + lambda) w^2 / 2; the fitted
    // -G/(H+lambda) must beat +-epsilon perturbations
    RngStream rng(9, 9);
    const Dataset d = random_labeled(rng, 100, 4, 3);
    GbtConfig cfg;
    cfg.rounds = 3;
    const Ensemble e = fit(d, cfg);

    // recompute gradients at round 0 margins (= base scores)
    Matrix grad(d.n(), 3), hess(d.n(), 3);
    std::vector<double> margins(e.base_score);
    for (std::size_t i = 0; i < d.n(); ++i)
        softmax_gradients(margins, (*d.labels)[i], grad.row(i), hess.row(i));

    for (std::size_t c = 0; c < 3; ++c) {
        const RegressionTree& tree = e.trees[0][c];
        // bucket samples by leaf
        std::vector<double> G(tree.nodes.size(), 0.0), H(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < d.n(); ++i) {
            int idx = 0;
            while (tree.nodes[idx].feature >= 0)
                idx = d.features(i, tree.nodes[idx].feature) < tree.nodes[idx].threshold
                          ? tree.nodes[idx].left
                          : tree.nodes[idx].right;
            G[idx] += grad(i, c);
            H[idx] += hess(i, c);
        }
        for (std::size_t idx = 0; idx < tree.nodes.size(); ++idx) {
            if (tree.nodes[idx].feature >= 0) continue;
            const double w = tree.nodes[idx].value;
            auto obj = [&](double v) {
                return G[idx] * v + 0.5 * (H[idx] + cfg.lambda) * v * v;
            };
            CHECK(obj(w) <= obj(w + 1e-4) + 1e-12);
            CHECK(obj(w) <= obj(w - 1e-4) + 1e-12);
        }
    }
}

TEST_CASE("classification_report on the hand-enumerated confusion matrix") {
    const std::vector<int> y_true{0, 0, 1, 1}, y_pred{0, 1, 1, 1};
    const ClassificationReport r = classification_report(y_true, y_pred, 2);
    CHECK(r.per_class[0].precision == 1.0);
    CHECK(r.per_class[0].recall == 0.5);
    CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(r.per_class[1].recall == 1.0);
    CHECK(r.accuracy == 0.75);
    CHECK(r.per_class[0].support == 2);
    CHECK(r.per_class[1].support == 2);
}

TEST_CASE("classification_report perfect predictions and error paths") {
    const std::vector<int> y{2, 0, 1, 2, 1};
    const ClassificationReport r = classification_report(y, y, 3);
    for (const auto& m : r.per_class) {
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
    CHECK(r.accuracy == 1.0);

    const std::vector<int> shorter{0, 1};
    CHECK_THROWS_AS(classification_report(y, shorter, 3), data_error);
    const std::vector<int> out_of_range{0, 1, 2, 3, 1};
    CHECK_THROWS_AS(classification_report(y, out_of_range, 3), data_error);
}

TEST_CASE("classes with zero predicted positives get precision 0") {
    const std::vector<int> y_true{0, 1, 2}, y_pred{0, 0, 0};
    const ClassificationReport r = classification_report(y_true, y_pred, 3);
    CHECK(r.per_class[1].precision == 0.0);
    CHECK(r.per_class[2].precision == 0.0);
}

TEST_CASE("model json round-trips through save and load") {
    RngStream rng(33, 1);
    const Dataset d = random_labeled(rng, 50, 4, 3);
    const Ensemble e = fit(d, GbtConfig{.rounds = 4});
    const auto path = std::filesystem::temp_directory_path() / "shapcluster_model.json";
    save_model(e, path);
    const Ensemble back = load_model(path);
    CHECK(back.base_score == e.base_score);
    CHECK(back.eta == e.eta);
    CHECK(back.feature_names == e.feature_names);
    for (int round = 0; round < 50; ++round) {
        std::vector<double> x(4);
        for (auto& v : x) v = rng.uniform(-4.0, 4.0);
        CHECK(back.predict_margins(x) == e.predict_margins(x)); // bit-exact
    }
}

TEST_CASE("predict_margins validates dimensions") {
    RngStream rng(1, 1);
    const Dataset d = random_labeled(rng, 30, 3, 2);
    const Ensemble e = fit(d, GbtConfig{.rounds = 2});
    const std::vector<double> wrong(5, 0.0);
    CHECK_THROWS_AS(e.predict_margins(wrong), data_error);
}
