#pragma once

// Shared helpers for unit and acceptance tests: seeded random tree/ensemble
// generators and small dataset builders.

#include <string>
#include <vector>

#include "shapcluster/gbt.hpp"
#include "shapcluster/matrix.hpp"
#include "shapcluster/rng.hpp"

namespace shapcluster::testsupport {

// Random binary tree over p features with splits in (-1, 1); every branch is
// grown to `depth` with probability `grow` per node.
inline RegressionTree random_tree(std::size_t p, int depth, RngStream& rng,
                                  double grow = 0.85) {
    RegressionTree tree;
    // recursive lambda via explicit stack of (node index, remaining depth)
    struct Item {
        int node;
        int depth;
    };
    tree.nodes.push_back({});
    std::vector<Item> stack{{0, depth}};
    while (!stack.empty()) {
        const Item item = stack.back();
        stack.pop_back();
        TreeNode& nd = tree.nodes[item.node];
        if (item.depth == 0 || rng.uniform() > grow) {
            nd.feature = -1;
            nd.value = rng.uniform(-2.0, 2.0);
            continue;
        }
        nd.feature = static_cast<int>(rng.uniform_int(p));
        nd.threshold = rng.uniform(-1.0, 1.0);
        nd.cover = 1.0;
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        const int right = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[item.node].left = left;
        tree.nodes[item.node].right = right;
        stack.push_back({left, item.depth - 1});
        stack.push_back({right, item.depth - 1});
    }
    return tree;
}

inline Ensemble random_ensemble(std::size_t p, std::size_t k, int rounds, int depth,
                                RngStream& rng) {
    Ensemble e;
    e.p = p;
    e.k = k;
    e.eta = 0.25 + 0.5 * rng.uniform();
    for (std::size_t c = 0; c < k; ++c) e.base_score.push_back(rng.uniform(-1.0, 1.0));
    for (std::size_t j = 0; j < p; ++j) e.feature_names.push_back("f" + std::to_string(j));
    for (std::size_t c = 0; c < k; ++c) e.class_names.push_back("c" + std::to_string(c));
    for (int r = 0; r < rounds; ++r) {
        std::vector<RegressionTree> round;
        for (std::size_t c = 0; c < k; ++c) round.push_back(random_tree(p, depth, rng));
        e.trees.push_back(std::move(round));
    }
    return e;
}

inline Matrix random_points(std::size_t n, std::size_t p, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
    Matrix m(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

} // namespace shapcluster::testsupport
