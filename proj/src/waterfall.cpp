#include "shapcluster/waterfall.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shapcluster/embed.hpp"
#include "shapcluster/errors.hpp"

namespace shapcluster {

WaterfallPath build_path(const Matrix& phi, std::span<const double> base,
                         std::span<const std::string> feature_names, std::size_t top_m,
                         std::string tag) {
    const std::size_t p = phi.rows(), k = phi.cols();
    if (base.size() != k) throw data_error("build_path: base size mismatch");
    if (feature_names.size() != p) throw data_error("build_path: feature name count mismatch");
    if (top_m < 1) throw data_error("build_path: top_m must be >= 1");
    top_m = std::min(top_m, p);

    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> norms(p);
    for (std::size_t i = 0; i < p; ++i) norms[i] = std::sqrt(dot(phi.row(i), phi.row(i)));
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return norms[a] != norms[b] ? norms[a] > norms[b] : a < b;
    });

    WaterfallPath path;
    path.tag = std::move(tag);
    path.anchor.assign(base.begin(), base.end());
    for (std::size_t rank = 0; rank < top_m; ++rank) {
        const std::size_t i = order[rank];
        PathSegment seg;
        seg.feature = feature_names[i];
        seg.delta.assign(phi.row(i).begin(), phi.row(i).end());
        path.segments.push_back(std::move(seg));
    }
    if (top_m < p) {
        PathSegment rest;
        rest.feature = "other features";
        rest.delta.assign(k, 0.0);
        for (std::size_t rank = top_m; rank < p; ++rank)
            for (std::size_t c = 0; c < k; ++c) rest.delta[c] += phi(order[rank], c);
        path.segments.push_back(std::move(rest));
    }

    path.vertices.push_back(path.anchor);
    for (const PathSegment& seg : path.segments) {
        std::vector<double> next = path.vertices.back();
        for (std::size_t c = 0; c < k; ++c) next[c] += seg.delta[c];
        path.vertices.push_back(std::move(next));
    }
    return path;
}

std::vector<WaterfallPath> cluster_mean_paths(const ShapTensor& t, const ClusterLabels& labels,
                                              std::size_t top_m) {
    if (labels.labels.size() != t.n) throw data_error("cluster_mean_paths: label count mismatch");
    const int c_count = labels.num_clusters();
    if (c_count == 0) throw data_error("cluster_mean_paths: all points are noise");

    std::vector<WaterfallPath> paths;
    for (int cid = 0; cid < c_count; ++cid) {
        Matrix mean(t.p, t.k);
        std::size_t members = 0;
        for (std::size_t s = 0; s < t.n; ++s) {
            if (labels.labels[s] != cid) continue;
            ++members;
            for (std::size_t i = 0; i < t.p; ++i)
                for (std::size_t c = 0; c < t.k; ++c) mean(i, c) += t.at(s, i, c);
        }
        for (double& v : mean.data()) v /= static_cast<double>(members);
        paths.push_back(build_path(mean, t.base_values, t.feature_names, top_m,
                                   "Cluster " + std::to_string(cid)));
    }
    return paths;
}

ProjectedPath project_pairwise(const WaterfallPath& path, std::size_t class_a,
                               std::size_t class_b,
                               std::span<const std::string> class_names) {
    const std::size_t k = path.anchor.size();
    if (class_a >= k || class_b >= k)
        throw data_error("project_pairwise: class index out of range");
    if (class_a == class_b) throw data_error("project_pairwise: classes must differ");
    ProjectedPath out;
    out.tag = path.tag;
    out.segments = path.segments;
    out.axis_labels = {class_names[class_a], class_names[class_b]};
    for (const auto& v : path.vertices) out.vertices2d.push_back({v[class_a], v[class_b]});
    return out;
}

std::vector<ProjectedPath> project_pca(std::span<const WaterfallPath> paths) {
    if (paths.empty()) throw data_error("project_pca: no paths");
    const std::size_t k = paths[0].anchor.size();
    if (k < 2) throw data_error("project_pca: need at least 2 classes");

    // second-moment matrix of all anchor-translated vertices, no re-centering
    Matrix moment(k, k);
    std::size_t count = 0;
    for (const WaterfallPath& path : paths) {
        for (const auto& v : path.vertices) {
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = 0; b < k; ++b)
                    moment(a, b) += (v[a] - path.anchor[a]) * (v[b] - path.anchor[b]);
            ++count;
        }
    }
    double total = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) moment(a, b) /= static_cast<double>(count);
        total += moment(a, a);
    }
    if (total <= 0.0) throw data_error("project_pca: all vertices identical (rank 0)");

    const auto pairs = top2_symmetric(moment);
    Matrix loadings(k, 2);
    for (std::size_t c = 0; c < k; ++c) {
        loadings(c, 0) = pairs[0].vector[c];
        loadings(c, 1) = pairs[1].vector[c];
    }
    std::vector<ProjectedPath> out;
    for (const WaterfallPath& path : paths) {
        ProjectedPath proj;
        proj.tag = path.tag;
        proj.segments = path.segments;
        proj.axis_labels = {"PC1", "PC2"};
        proj.loadings = loadings;
        for (const auto& v : path.vertices) {
            double x = 0.0, y = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double t = v[c] - path.anchor[c];
                x += t * pairs[0].vector[c];
                y += t * pairs[1].vector[c];
            }
            proj.vertices2d.push_back({x, y});
        }
        out.push_back(std::move(proj));
    }
    return out;
}

Matrix heatmap_data(const Dataset& d, const ClusterLabels& labels) {
    if (labels.labels.size() != d.n()) throw data_error("heatmap_data: label count mismatch");
    const int c_count = labels.num_clusters();
    if (c_count == 0) throw data_error("heatmap_data: all points are noise");
    Matrix out(c_count, d.p());
    std::vector<std::size_t> counts(c_count, 0);
    for (std::size_t s = 0; s < d.n(); ++s) {
        const int cid = labels.labels[s];
        if (cid < 0) continue;
        ++counts[cid];
        for (std::size_t j = 0; j < d.p(); ++j) out(cid, j) += d.features(s, j);
    }
    for (int cid = 0; cid < c_count; ++cid)
        for (std::size_t j = 0; j < d.p(); ++j) out(cid, j) /= static_cast<double>(counts[cid]);
    return out;
}

} // namespace shapcluster
