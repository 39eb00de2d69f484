#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shapcluster/matrix.hpp"

namespace shapcluster {

struct ClusterLabels {
    std::vector<int> labels;         // -1 = noise, clusters 0..c-1 by decreasing size
    std::vector<double> persistence; // per-cluster stability score

    int num_clusters() const { return static_cast<int>(persistence.size()); }
};

// Cluster hierarchy after removing components smaller than min_cluster_size.
// Node 0 is the root; lambda is the inverse-distance scale (capped at 1e12 for
// zero distances).
struct CondensedNode {
    int parent = -1;
    double lambda_birth = 0.0;
    double lambda_death = 0.0;
    int size = 0; // point count at birth
    std::vector<int> children;
    double stability = 0.0;
};

struct CondensedTree {
    std::vector<CondensedNode> nodes;
    std::vector<int> point_cluster;    // condensed node each point exits from
    std::vector<double> point_lambda;  // lambda at which it exits
};

enum class Selection { eom, leaf };

struct HdbscanParams {
    int min_cluster_size = 15;
    int min_samples = 10;
    Selection selection = Selection::eom;
    int threads = 1; // core-distance pass only
};

struct HdbscanResult {
    ClusterLabels labels;
    CondensedTree tree;
};

// Density clustering: core distances, mutual-reachability MST (Prim, exact),
// single-linkage dendrogram, condensation, and excess-of-mass or leaf cluster
// selection. Points outside every selected cluster are labeled -1.
HdbscanResult hdbscan(const Matrix& m, const HdbscanParams& params);

// Same definition computed naively (full distance matrix, Kruskal over all
// n(n-1)/2 edges, recursive condensation). Testing oracle; refuses n > 200.
ClusterLabels reference_hdbscan(const Matrix& m, const HdbscanParams& params);

// Chance-corrected pair-counting agreement. With exclude_noise, samples
// labeled -1 in either labeling are dropped before counting.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b,
                           bool exclude_noise = false);

// Single-column CSV of per-sample cluster ids.
void save_labels_csv(const ClusterLabels& labels, const std::filesystem::path& path);
ClusterLabels load_labels_csv(const std::filesystem::path& path);

} // namespace shapcluster
