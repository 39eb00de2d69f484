#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shapcluster/dataset.hpp"
#include "shapcluster/gbt.hpp"
#include "shapcluster/matrix.hpp"
#include "shapcluster/rng.hpp"

namespace shapcluster {

// n x p x k attribution tensor in margin (log-odds) units, plus the per-class
// anchor E[f(X')] the attributions are measured against.
struct ShapTensor {
    std::size_t n = 0, p = 0, k = 0;
    std::vector<double> values;      // flat, index (s*p + i)*k + c
    std::vector<double> base_values; // k entries
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    double& at(std::size_t s, std::size_t i, std::size_t c) {
        return values[(s * p + i) * k + c];
    }
    double at(std::size_t s, std::size_t i, std::size_t c) const {
        return values[(s * p + i) * k + c];
    }

    // p x k attribution matrix of one sample.
    Matrix sample_matrix(std::size_t s) const;

    // n x (p*k) matrix, feature-major / class-minor column order.
    Matrix flatten() const;
    std::vector<std::string> flat_column_names() const; // "<feature>|<class>"
};

// Rows the interventional expectation is taken over; drawn from the training
// data of the model being explained.
struct BackgroundSet {
    Matrix rows; // m x p, m >= 1

    static BackgroundSet sample(const Matrix& features, std::span<const int> candidates,
                                std::size_t cap, RngStream rng);
};

// Exact interventional SHAP values of one sample, per class. For every
// background row and tree the leaf values are attributed along the x-vs-r
// decision-path divergences, then averaged over the background. Satisfies
// sum_i phi[i][c] = margin_c(x) - mean_bg margin_c within 1e-9.
Matrix shap_single(const Ensemble& e, std::span<const double> x, const BackgroundSet& bg);

// Classical weighted-subset Shapley values with coalition value
// v(S) = mean over background rows r of eval(x on S, r off S).
// Testing oracle; refuses p > 20.
Matrix brute_force_shapley(
    const std::function<std::vector<double>(std::span<const double>)>& eval,
    std::span<const double> x, const Matrix& bg, std::size_t k);

struct CvShapParams {
    int folds = 5;
    int repeats = 5;
    std::size_t background_cap = 256;
    int threads = 1;
};

struct CvShapResult {
    ShapTensor tensor;
    // max_{sample, class} |sum_i phi_i - (f_fold(x) - fold base)| per run
    std::vector<double> run_additivity_residual;
};

// Repeated out-of-fold protocol: per repeat draw fresh folds, fit on each
// complement, explain the held-out fold against a background sampled from the
// complement; average tensors and base values across repeats.
CvShapResult cv_shap(const Dataset& d, const GbtConfig& cfg, const CvShapParams& params,
                     RngStream rng);

// Single run with an explicit stream; cv_shap averages `repeats` of these.
CvShapResult cv_shap_single_run(const Dataset& d, const GbtConfig& cfg,
                                const CvShapParams& params, RngStream run_rng);

// Mean of the given runs (values and base values); residuals are concatenated.
CvShapResult average_cv_runs(std::vector<CvShapResult> runs);

// Rebuild a tensor from the flattened shap.csv and base_values.csv files
// (feature and class names recovered from the headers).
ShapTensor load_shap_tensor(const std::filesystem::path& shap_csv,
                            const std::filesystem::path& base_csv);

// Entry (i, c) = mean over samples of |values[s, i, c]|.
Matrix mean_abs_shap(const ShapTensor& t);

// Per-feature importance: mean |SHAP| summed over classes.
std::vector<double> mean_abs_shap_totals(const ShapTensor& t);

} // namespace shapcluster
