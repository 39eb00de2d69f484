#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shapcluster/dataset.hpp"

namespace shapcluster {

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0; // leaf weight, unscaled by eta
    double cover = 0.0; // hessian sum at the node
};

// Binary regression tree with the routing rule x[feature] < threshold -> left.
struct RegressionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    double eval(std::span<const double> x) const {
        int idx = 0;
        while (nodes[idx].feature >= 0)
            idx = x[nodes[idx].feature] < nodes[idx].threshold ? nodes[idx].left
                                                               : nodes[idx].right;
        return nodes[idx].value;
    }
};

struct GbtConfig {
    int rounds = 100;
    double eta = 0.3;
    int max_depth = 4;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;

    void validate() const;
};

// Multi-class boosted ensemble: margin(x)[c] = base_score[c] + eta * sum of the
// class-c trees. The margins are the per-class log-odds scores that SHAP
// decomposes downstream.
struct Ensemble {
    std::vector<double> base_score;                 // k entries
    std::vector<std::vector<RegressionTree>> trees; // rounds x k
    double eta = 0.3;
    std::size_t p = 0;
    std::size_t k = 0;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    std::vector<double> predict_margins(std::span<const double> x) const;
    int predict_class(std::span<const double> x) const; // argmax, ties -> lowest index
};

Ensemble fit(const Dataset& train, const GbtConfig& cfg);

// Stable softmax; out must have the same length as margins.
void softmax(std::span<const double> margins, std::span<double> out);

// Per-class gradient p_c - 1{y=c} and hessian p_c (1 - p_c) of the softmax
// cross-entropy loss at the given margins.
void softmax_gradients(std::span<const double> margins, int label, std::span<double> grad,
                       std::span<double> hess);

// -log p_y at the given margins.
double softmax_log_loss(std::span<const double> margins, int label);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ClassificationReport {
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    std::size_t total = 0;
    ClassMetrics macro_avg;
    ClassMetrics weighted_avg;

    std::string to_table(const std::vector<std::string>& class_names) const;
};

ClassificationReport classification_report(std::span<const int> y_true,
                                           std::span<const int> y_pred, std::size_t k);

// JSON model file, documented in the README.
void save_model(const Ensemble& e, const std::filesystem::path& path);
Ensemble load_model(const std::filesystem::path& path);

} // namespace shapcluster
