#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "shapcluster/dataset.hpp"
#include "shapcluster/hdbscan.hpp"
#include "shapcluster/matrix.hpp"
#include "shapcluster/shap.hpp"

namespace shapcluster {

struct PathSegment {
    std::string feature;
    std::vector<double> delta; // k entries
};

// Explanation of one sample (or cluster mean) as a path of k-vectors: start at
// the base-value anchor and add one segment per feature, largest first.
struct WaterfallPath {
    std::vector<double> anchor;               // k entries
    std::vector<PathSegment> segments;        // ordered by non-increasing |delta|
    std::vector<std::vector<double>> vertices; // (m+1) x k cumulative sums
    std::string tag;
};

// Features are ordered by descending Euclidean norm of their k-vector SHAP
// delta (ties by lower feature index); the top_m largest become segments and
// the remainder collapses into one trailing "other features" aggregate.
WaterfallPath build_path(const Matrix& phi, std::span<const double> base,
                         std::span<const std::string> feature_names, std::size_t top_m = 8,
                         std::string tag = "");

// One path per non-noise cluster, built from the mean SHAP matrix of its
// members; feature ordering is decided per cluster.
std::vector<WaterfallPath> cluster_mean_paths(const ShapTensor& t, const ClusterLabels& labels,
                                              std::size_t top_m = 8);

struct ProjectedPath {
    std::vector<std::array<double, 2>> vertices2d;
    std::array<std::string, 2> axis_labels;
    std::vector<PathSegment> segments; // carried over for labeling
    Matrix loadings;                   // k x 2 class-axis loadings (pca only)
    std::string tag;
};

// Restriction to two class coordinates; exact coordinate selection.
ProjectedPath project_pairwise(const WaterfallPath& path, std::size_t class_a,
                               std::size_t class_b,
                               std::span<const std::string> class_names);

// Top-2 principal directions of all anchor-translated vertices, fit without
// re-centering so the shared anchor stays at the plot origin. Emits class-axis
// loadings for biplot annotation.
std::vector<ProjectedPath> project_pca(std::span<const WaterfallPath> paths);

// Row per non-noise cluster: mean raw feature vector of its members.
Matrix heatmap_data(const Dataset& d, const ClusterLabels& labels);

} // namespace shapcluster
