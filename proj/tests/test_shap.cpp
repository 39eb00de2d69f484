#include <doctest.h>

#include <cmath>
#include <functional>

#include "shapcluster/errors.hpp"
#include "shapcluster/shap.hpp"
#include "shapcluster/simgen.hpp"
#include "test_support.hpp"

using namespace shapcluster;
using namespace shapcluster::testsupport;

namespace {

std::function<std::vector<double>(std::span<const double>)> ensemble_eval(const Ensemble& e) {
    return [&e](std::span<const double> x) { return e.predict_margins(x); };
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

} // namespace

TEST_CASE("brute force collapses to f(x) - mean f(bg) for a single feature") {
    auto eval = [](std::span<const double> x) { return std::vector<double>{3.0 * x[0] + 1.0}; };
    Matrix bg(2, 1);
    bg(0, 0) = 0.0;
    bg(1, 0) = 2.0;
    const std::vector<double> x{5.0};
    const Matrix phi = brute_force_shapley(eval, x, bg, 1);
    CHECK(phi(0, 0) == doctest::Approx(16.0 - 4.0).epsilon(1e-15)); // f(5)=16, mean bg f = 4
}

TEST_CASE("brute force matches the closed form for additive models") {
    RngStream rng(64, 2);
    for (int round = 0; round < 10; ++round) {
        const std::size_t p = 2 + rng.uniform_int(5);
        std::vector<double> w(p), q(p);
        for (auto& v : w) v = rng.uniform(-2.0, 2.0);
        for (auto& v : q) v = rng.uniform(-1.0, 1.0);
        // f(x) = sum_i (w_i x_i + q_i x_i^2): additive in the features
        auto eval = [&](std::span<const double> x) {
            double s = 0.0;
            for (std::size_t i = 0; i < p; ++i) s += w[i] * x[i] + q[i] * x[i] * x[i];
            return std::vector<double>{s};
        };
        const Matrix bg = random_points(6, p, rng);
        std::vector<double> x(p);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        const Matrix phi = brute_force_shapley(eval, x, bg, 1);
        for (std::size_t i = 0; i < p; ++i) {
            double mean_gi = 0.0;
            for (std::size_t r = 0; r < bg.rows(); ++r)
                mean_gi += (w[i] * bg(r, i) + q[i] * bg(r, i) * bg(r, i)) / bg.rows();
            const double gi = w[i] * x[i] + q[i] * x[i] * x[i];
            CHECK(std::abs(phi(i, 0) - (gi - mean_gi)) <= 1e-12);
        }
    }
}

TEST_CASE("brute force satisfies efficiency on random trees") {
    RngStream rng(7, 7);
    for (int round = 0; round < 5; ++round) {
        const std::size_t p = 4;
        const Ensemble e = random_ensemble(p, 2, 3, 3, rng);
        const Matrix bg = random_points(8, p, rng);
        std::vector<double> x(p);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        const Matrix phi = brute_force_shapley(ensemble_eval(e), x, bg, 2);
        const std::vector<double> fx = e.predict_margins(x);
        for (std::size_t c = 0; c < 2; ++c) {
            double mean_bg = 0.0;
            for (std::size_t r = 0; r < bg.rows(); ++r)
                mean_bg += e.predict_margins(bg.row(r))[c] / bg.rows();
            double total = 0.0;
            for (std::size_t i = 0; i < p; ++i) total += phi(i, c);
            CHECK(std::abs(total - (fx[c] - mean_bg)) <= 1e-12);
        }
    }
}

TEST_CASE("brute force refuses p > 20") {
    auto eval = [](std::span<const double>) { return std::vector<double>{0.0}; };
    const std::vector<double> x(21, 0.0);
    CHECK_THROWS_AS(brute_force_shapley(eval, x, Matrix(1, 21), 1), data_error);
}

TEST_CASE("shap_single of a constant model is zero") {
    RngStream rng(1, 5);
    Ensemble e = random_ensemble(4, 3, 0, 2, rng); // zero rounds
    BackgroundSet bg{random_points(5, 4, rng)};
    const std::vector<double> x{0.1, 0.2, 0.3, 0.4};
    const Matrix phi = shap_single(e, x, bg);
    for (double v : phi.data()) CHECK(v == 0.0);
}

TEST_CASE("shap_single of a single stump puts everything on the split feature") {
    Ensemble e;
    e.p = 3;
    e.k = 1;
    e.eta = 0.5;
    e.base_score = {0.7};
    e.feature_names = {"f0", "f1", "f2"};
    e.class_names = {"c0"};
    RegressionTree stump;
    stump.nodes.push_back({0, 0.0, 1, 2, 0.0, 2.0});
    stump.nodes.push_back({-1, 0.0, -1, -1, -1.0, 1.0});
    stump.nodes.push_back({-1, 0.0, -1, -1, 3.0, 1.0});
    e.trees.push_back({stump});

    Matrix bg_rows(2, 3);
    bg_rows(0, 0) = -1.0; // routes left -> -1
    bg_rows(1, 0) = 1.0;  // routes right -> 3
    BackgroundSet bg{bg_rows};
    const std::vector<double> x{2.0, 0.0, 0.0}; // routes right
    const Matrix phi = shap_single(e, x, bg);
    const double fx = e.predict_margins(x)[0];
    double mean_bg = 0.0;
    for (std::size_t r = 0; r < 2; ++r) mean_bg += e.predict_margins(bg.rows.row(r))[0] / 2;
    CHECK(phi(0, 0) == doctest::Approx(fx - mean_bg).epsilon(1e-15));
    CHECK(phi(1, 0) == 0.0);
    CHECK(phi(2, 0) == 0.0);
    CHECK(phi(0, 0) > 0.0); // routed to the high leaf: positive contribution
}

TEST_CASE("tree shap equals brute force on seeded random ensembles") {
    RngStream rng(2025, 1);
    double worst = 0.0;
    for (int round = 0; round < 20; ++round) {
        const std::size_t p = 2 + rng.uniform_int(7); // <= 8
        const std::size_t k = round % 2 == 0 ? 1 : 3;
        const int rounds = 1 + static_cast<int>(rng.uniform_int(3));
        const int depth = 1 + static_cast<int>(rng.uniform_int(3));
        const Ensemble e = random_ensemble(p, k, rounds, depth, rng);
        const BackgroundSet bg{random_points(1 + rng.uniform_int(32), p, rng)};
        std::vector<double> x(p);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        const Matrix fast = shap_single(e, x, bg);
        const Matrix slow = brute_force_shapley(ensemble_eval(e), x, bg.rows, k);
        worst = std::max(worst, max_abs_diff(fast, slow));
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("features absent from every split have exactly zero attribution") {
    RngStream rng(55, 3);
    // trees split only on features 0 and 1; feature 2 is a dummy
    Ensemble e = random_ensemble(2, 2, 4, 3, rng);
    e.p = 3;
    e.feature_names.push_back("dummy");
    const BackgroundSet bg{random_points(16, 3, rng)};
    for (int round = 0; round < 10; ++round) {
        std::vector<double> x(3);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        const Matrix phi = shap_single(e, x, bg);
        CHECK(phi(2, 0) == 0.0);
        CHECK(phi(2, 1) == 0.0);
    }
}

TEST_CASE("shap_single validates inputs") {
    RngStream rng(6, 6);
    const Ensemble e = random_ensemble(3, 2, 2, 2, rng);
    const std::vector<double> x{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(shap_single(e, x, BackgroundSet{Matrix(0, 3)}), data_error);
    CHECK_THROWS_AS(shap_single(e, std::vector<double>{1.0}, BackgroundSet{Matrix(2, 3)}),
                    data_error);
}

TEST_CASE("cv_shap: averaging identical runs is exact and additivity holds") {
    const Simulation sim = simulate(160, 11);
    GbtConfig cfg;
    cfg.rounds = 12;
    CvShapParams params;
    params.folds = 4;
    params.repeats = 1;
    params.background_cap = 32;

    const CvShapResult run = cv_shap_single_run(sim.data, cfg, params, RngStream(3, 1));
    for (double r : run.run_additivity_residual) CHECK(r <= 1e-6);

    CvShapResult twice = average_cv_runs({run, run});
    CHECK(twice.tensor.values == run.tensor.values);
    CHECK(twice.tensor.base_values == run.tensor.base_values);

    // determinism of the full protocol
    const CvShapResult a = cv_shap(sim.data, cfg, params, RngStream(9, 2));
    const CvShapResult b = cv_shap(sim.data, cfg, params, RngStream(9, 2));
    CHECK(a.tensor.values == b.tensor.values);
}

TEST_CASE("cv_shap additivity diagnostics stay under 1e-6 across repeats") {
    const Simulation sim = simulate(120, 21);
    GbtConfig cfg;
    cfg.rounds = 10;
    CvShapParams params;
    params.folds = 3;
    params.repeats = 2;
    params.background_cap = 24;
    const CvShapResult result = cv_shap(sim.data, cfg, params, RngStream(8, 0));
    REQUIRE(result.run_additivity_residual.size() == 2);
    for (double r : result.run_additivity_residual) CHECK(r <= 1e-6);
}

TEST_CASE("cv_shap propagates degenerate-fold errors") {
    // n=3, l=2: one complement holds a single sample, too small to train
    const Simulation sim = simulate(3, 3);
    CvShapParams params;
    params.folds = 2;
    CHECK_THROWS_AS(cv_shap(sim.data, GbtConfig{}, params, RngStream(0, 0)), data_error);
}

TEST_CASE("mean_abs_shap basics and permutation invariance") {
    ShapTensor t;
    t.n = 3;
    t.p = 2;
    t.k = 2;
    t.values.assign(12, 0.0);
    t.base_values = {0.0, 0.0};
    t.feature_names = {"f0", "f1"};
    t.class_names = {"c0", "c1"};
    const Matrix zeros = mean_abs_shap(t);
    for (double v : zeros.data()) CHECK(v == 0.0);

    RngStream rng(10, 10);
    for (auto& v : t.values) v = rng.uniform(-2.0, 2.0);
    const Matrix m = mean_abs_shap(t);

    // single sample: equals its own |phi|
    ShapTensor single = t;
    single.n = 1;
    single.values.assign(t.values.begin(), t.values.begin() + 4);
    const Matrix sm = mean_abs_shap(single);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(sm(i, c) == std::abs(single.at(0, i, c)));

    // permuting samples leaves the mean unchanged
    ShapTensor permuted = t;
    for (std::size_t i = 0; i < t.p; ++i)
        for (std::size_t c = 0; c < t.k; ++c) {
            permuted.at(0, i, c) = t.at(2, i, c);
            permuted.at(2, i, c) = t.at(0, i, c);
        }
    const Matrix pm = mean_abs_shap(permuted);
    for (std::size_t i = 0; i < pm.data().size(); ++i)
        CHECK(pm.data()[i] == doctest::Approx(m.data()[i]).epsilon(1e-15));

    const auto totals = mean_abs_shap_totals(t);
    for (std::size_t i = 0; i < t.p; ++i)
        CHECK(totals[i] == doctest::Approx(m(i, 0) + m(i, 1)).epsilon(1e-15));
}

TEST_CASE("flatten uses feature-major class-minor order with named columns") {
    ShapTensor t;
    t.n = 2;
    t.p = 2;
    t.k = 3;
    t.feature_names = {"fa", "fb"};
    t.class_names = {"x", "y", "z"};
    t.base_values = {0, 0, 0};
    t.values.resize(12);
    for (std::size_t i = 0; i < 12; ++i) t.values[i] = static_cast<double>(i);
    const Matrix flat = t.flatten();
    CHECK(flat.rows() == 2);
    CHECK(flat.cols() == 6);
    CHECK(flat(0, 0) == t.at(0, 0, 0));
    CHECK(flat(0, 3) == t.at(0, 1, 0));
    CHECK(flat(1, 5) == t.at(1, 1, 2));
    const auto names = t.flat_column_names();
    CHECK(names[0] == "fa|x");
    CHECK(names[3] == "fb|x");
    CHECK(names[5] == "fb|z");
}
