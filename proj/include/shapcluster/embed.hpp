#pragma once

#include <array>
#include <string>
#include <utility>

#include "shapcluster/matrix.hpp"
#include "shapcluster/rng.hpp"

namespace shapcluster {

struct Embedding2D {
    Matrix coords;  // n x 2
    std::string method; // "pca" | "neighbor"
    std::array<double, 2> explained_variance{}; // pca only
    Matrix loadings; // q x 2, pca only, columns orthonormal
};

// Top-2 eigenpairs of a symmetric matrix by power iteration with deflation
// (tolerance 1e-10, deterministic start vectors). Shared by pca_embed and the
// waterfall path projection.
struct EigenPair {
    double value = 0.0;
    std::vector<double> vector;
};
std::array<EigenPair, 2> top2_symmetric(const Matrix& s);

// Mean-centered PCA onto the top two principal directions. Sign convention:
// the largest-|loading| entry of each component is positive.
Embedding2D pca_embed(const Matrix& m);

struct NeighborEmbedConfig {
    int neighbors = 15;
    double min_dist = 0.1;
    double spread = 1.0;
    int epochs = 200;
    int negative_samples = 5;
    double learning_rate = 1.0;
    int threads = 1; // used for the k-NN pass only; SGD stays sequential
};

// UMAP-style 2D embedding: exact k-NN graph, per-point bandwidth calibration,
// symmetrized fuzzy memberships, then sequential SGD over edges with negative
// sampling. Deterministic for a fixed (input, config, rng).
Embedding2D neighbor_embed(const Matrix& m, const NeighborEmbedConfig& cfg, RngStream rng);

// Least-squares fit of the low-dimensional affinity 1/(1 + a d^(2b)) to the
// piecewise target curve (1 below min_dist, exponential decay past it) on a
// 300-point grid over [0, 3*spread].
std::pair<double, double> fit_ab(double min_dist, double spread);

} // namespace shapcluster
