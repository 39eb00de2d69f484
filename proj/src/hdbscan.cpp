#include "shapcluster/hdbscan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

#include "shapcluster/errors.hpp"

namespace shapcluster {

namespace {

constexpr double kLambdaCap = 1e12; // 1/distance with zero distances floored at 1e-12

double to_lambda(double dist) { return 1.0 / std::max(dist, 1e-12); }

// The point itself counts among its min_samples nearest neighbors (the
// convention of the reference implementations), so min_samples = 1 gives a
// zero core distance and plain Euclidean mutual reachability.
std::vector<double> core_distances(const Matrix& m, int min_samples, int threads) {
    const std::size_t n = m.rows();
    std::vector<double> core(n);
    auto one = [&](std::size_t i) {
        if (min_samples == 1) {
            core[i] = 0.0;
            return;
        }
        std::vector<double> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d.push_back(squared_distance(m.row(i), m.row(j)));
        std::nth_element(d.begin(), d.begin() + (min_samples - 2), d.end());
        core[i] = std::sqrt(d[min_samples - 2]);
    };
    if (threads <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) one(i);
    } else {
        std::atomic<std::size_t> cursor{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = cursor.fetch_add(1);
                    if (i >= n) break;
                    one(i);
                }
            });
        for (auto& t : pool) t.join();
    }
    return core;
}

struct MstEdge {
    int a, b;
    double w;
};

bool edge_less(const MstEdge& x, const MstEdge& y) {
    if (x.w != y.w) return x.w < y.w;
    const int xa = std::min(x.a, x.b), xb = std::max(x.a, x.b);
    const int ya = std::min(y.a, y.b), yb = std::max(y.a, y.b);
    return xa != ya ? xa < ya : xb < yb;
}

// Exact Prim over the implicit complete mutual-reachability graph.
std::vector<MstEdge> prim_mst(const Matrix& m, const std::vector<double>& core) {
    const std::size_t n = m.rows();
    std::vector<bool> in_tree(n, false);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<int> best_from(n, 0);
    std::vector<MstEdge> edges;
    edges.reserve(n - 1);
    int current = 0;
    in_tree[0] = true;
    for (std::size_t added = 1; added < n; ++added) {
        for (std::size_t j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            const double d = std::sqrt(squared_distance(m.row(current), m.row(j)));
            const double mr = std::max({core[current], core[j], d});
            if (mr < best[j]) {
                best[j] = mr;
                best_from[j] = current;
            }
        }
        int next = -1;
        for (std::size_t j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            if (next < 0 || best[j] < best[next]) next = static_cast<int>(j);
        }
        edges.push_back({best_from[next], next, best[next]});
        in_tree[next] = true;
        current = next;
    }
    return edges;
}

struct DendroNode {
    int left = -1, right = -1; // children (point ids < n, merges >= n)
    double dist = 0.0;
    int size = 1;
};

// Single-linkage dendrogram from MST edges sorted ascending; node 2n-2 is the root.
std::vector<DendroNode> build_dendrogram(std::vector<MstEdge> edges, std::size_t n) {
    std::sort(edges.begin(), edges.end(), edge_less);
    std::vector<DendroNode> nodes(2 * n - 1);
    std::vector<int> top(2 * n - 1); // current top node of each component
    std::vector<int> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    std::iota(top.begin(), top.end(), 0);
    int next_id = static_cast<int>(n);
    for (const MstEdge& e : edges) {
        const int ra = find(e.a), rb = find(e.b);
        const int ta = top[ra], tb = top[rb];
        DendroNode& merged = nodes[next_id];
        merged.left = ta;
        merged.right = tb;
        merged.dist = e.w;
        merged.size = nodes[ta].size + nodes[tb].size;
        parent[ra] = rb;
        top[find(rb)] = next_id;
        ++next_id;
    }
    return nodes;
}

void collect_points(const std::vector<DendroNode>& dendro, int node, std::size_t n,
                    std::vector<int>& out) {
    std::vector<int> stack{node};
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        if (cur < static_cast<int>(n)) {
            out.push_back(cur);
        } else {
            stack.push_back(dendro[cur].left);
            stack.push_back(dendro[cur].right);
        }
    }
}

CondensedTree condense(const std::vector<DendroNode>& dendro, std::size_t n,
                       int min_cluster_size) {
    CondensedTree tree;
    tree.point_cluster.assign(n, 0);
    tree.point_lambda.assign(n, 0.0);
    tree.nodes.push_back({-1, 0.0, 0.0, static_cast<int>(n), {}, 0.0});

    const int root = static_cast<int>(2 * n - 2);
    if (n == 1) {
        tree.point_lambda[0] = kLambdaCap;
        return tree;
    }

    std::vector<std::pair<int, int>> stack{{root, 0}}; // (dendro node, condensed id)
    std::vector<int> fallen;
    while (!stack.empty()) {
        const auto [d, cid] = stack.back();
        stack.pop_back();
        const DendroNode& nd = dendro[d];
        const double lambda = to_lambda(nd.dist);
        const int l = nd.left, r = nd.right;
        const int sl = dendro[l].size, sr = dendro[r].size;
        const bool l_ok = sl >= min_cluster_size && l >= static_cast<int>(n);
        const bool r_ok = sr >= min_cluster_size && r >= static_cast<int>(n);
        auto fall_out = [&](int node) {
            fallen.clear();
            collect_points(dendro, node, n, fallen);
            for (int pt : fallen) {
                tree.point_cluster[pt] = cid;
                tree.point_lambda[pt] = lambda;
            }
        };
        if (l_ok && r_ok) {
            const int a = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({cid, lambda, 0.0, sl, {}, 0.0});
            const int b = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({cid, lambda, 0.0, sr, {}, 0.0});
            tree.nodes[cid].children = {a, b};
            tree.nodes[cid].lambda_death = lambda;
            stack.emplace_back(l, a);
            stack.emplace_back(r, b);
        } else if (l_ok) {
            fall_out(r);
            stack.emplace_back(l, cid);
        } else if (r_ok) {
            fall_out(l);
            stack.emplace_back(r, cid);
        } else {
            fall_out(l);
            fall_out(r);
            tree.nodes[cid].lambda_death = lambda;
        }
    }

    for (std::size_t pt = 0; pt < n; ++pt) {
        const CondensedNode& c = tree.nodes[tree.point_cluster[pt]];
        tree.nodes[tree.point_cluster[pt]].stability +=
            tree.point_lambda[pt] - c.lambda_birth;
    }
    for (std::size_t cid = 1; cid < tree.nodes.size(); ++cid) {
        const CondensedNode& c = tree.nodes[cid];
        tree.nodes[c.parent].stability +=
            c.size * (c.lambda_birth - tree.nodes[c.parent].lambda_birth);
    }
    return tree;
}

std::vector<int> select_clusters(const CondensedTree& tree, Selection selection) {
    const std::size_t m = tree.nodes.size();
    std::vector<bool> selected(m, false);
    if (selection == Selection::leaf) {
        for (std::size_t cid = 1; cid < m; ++cid)
            if (tree.nodes[cid].children.empty()) selected[cid] = true;
    } else {
        // excess of mass, bottom-up (children always have larger ids)
        std::vector<double> score(m, 0.0);
        for (std::size_t i = m; i-- > 1;) {
            const CondensedNode& c = tree.nodes[i];
            if (c.children.empty()) {
                selected[i] = true;
                score[i] = c.stability;
                continue;
            }
            double child_sum = 0.0;
            for (int ch : c.children) child_sum += score[ch];
            if (c.stability >= child_sum) {
                selected[i] = true;
                score[i] = c.stability;
            } else {
                score[i] = child_sum;
            }
        }
    }
    // keep only selected nodes with no selected ancestor (root never selected)
    std::vector<int> result;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int cid = stack.back();
        stack.pop_back();
        if (cid != 0 && selected[cid]) {
            result.push_back(cid);
            continue;
        }
        for (int ch : tree.nodes[cid].children) stack.push_back(ch);
    }
    std::sort(result.begin(), result.end());
    return result;
}

// Shared repackaging: assign 0..c-1 by decreasing member count (ties by
// smallest member index).
ClusterLabels finalize_labels(const std::vector<std::vector<int>>& members,
                              const std::vector<double>& stabilities, std::size_t n) {
    std::vector<int> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        if (members[x].size() != members[y].size())
            return members[x].size() > members[y].size();
        return members[x].front() < members[y].front();
    });
    ClusterLabels out;
    out.labels.assign(n, -1);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        for (int pt : members[order[rank]]) out.labels[pt] = static_cast<int>(rank);
        out.persistence.push_back(stabilities[order[rank]]);
    }
    return out;
}

} // namespace

HdbscanResult hdbscan(const Matrix& m, const HdbscanParams& params) {
    const std::size_t n = m.rows();
    if (params.min_cluster_size < 2) throw data_error("hdbscan: min_cluster_size must be >= 2");
    if (params.min_samples < 1) throw data_error("hdbscan: min_samples must be >= 1");
    if (n <= static_cast<std::size_t>(params.min_samples))
        throw data_error("hdbscan: need more than min_samples (" +
                         std::to_string(params.min_samples) + ") points, got " +
                         std::to_string(n));

    const std::vector<double> core = core_distances(m, params.min_samples, params.threads);
    const std::vector<MstEdge> mst = prim_mst(m, core);
    const std::vector<DendroNode> dendro = build_dendrogram(mst, n);

    HdbscanResult result;
    result.tree = condense(dendro, n, params.min_cluster_size);
    const CondensedTree& tree = result.tree;
    const std::vector<int> chosen = select_clusters(tree, params.selection);

    std::vector<int> owner(tree.nodes.size(), -1); // index into chosen, else -1
    for (std::size_t ci = 0; ci < chosen.size(); ++ci) owner[chosen[ci]] = static_cast<int>(ci);

    std::vector<std::vector<int>> members(chosen.size());
    std::vector<double> stabilities(chosen.size());
    for (std::size_t ci = 0; ci < chosen.size(); ++ci)
        stabilities[ci] = tree.nodes[chosen[ci]].stability;
    for (std::size_t pt = 0; pt < n; ++pt) {
        int cid = tree.point_cluster[pt];
        while (cid != -1) {
            if (owner[cid] >= 0) {
                members[owner[cid]].push_back(static_cast<int>(pt));
                break;
            }
            cid = tree.nodes[cid].parent;
        }
    }
    result.labels = finalize_labels(members, stabilities, n);
    return result;
}

// ---------------------------------------------------------------------------
// reference implementation (tests only)

namespace {

struct RefCluster {
    double birth = 0.0;
    std::vector<std::pair<int, double>> exits; // (point, lambda)
    std::vector<int> children;
    int size = 0;
    double stability = 0.0;
};

struct RefBuilder {
    const std::vector<DendroNode>& dendro;
    std::size_t n;
    int mcs;
    std::vector<RefCluster> clusters;

    void gather(int node, double lambda, std::vector<std::pair<int, double>>& exits) const {
        if (node < static_cast<int>(n)) {
            exits.emplace_back(node, lambda);
            return;
        }
        gather(dendro[node].left, lambda, exits);
        gather(dendro[node].right, lambda, exits);
    }

    int process(int node, double birth) {
        const int id = static_cast<int>(clusters.size());
        clusters.push_back({});
        clusters[id].birth = birth;
        clusters[id].size = dendro[node].size;
        int cur = node;
        while (true) {
            const DendroNode& nd = dendro[cur];
            const double lambda = to_lambda(nd.dist);
            const int l = nd.left, r = nd.right;
            const bool l_ok = l >= static_cast<int>(n) && dendro[l].size >= mcs;
            const bool r_ok = r >= static_cast<int>(n) && dendro[r].size >= mcs;
            if (l_ok && r_ok) {
                const int a = process(l, lambda);
                const int b = process(r, lambda);
                clusters[id].children = {a, b};
                break;
            }
            if (l_ok) {
                gather(r, lambda, clusters[id].exits);
                cur = l;
            } else if (r_ok) {
                gather(l, lambda, clusters[id].exits);
                cur = r;
            } else {
                gather(l, lambda, clusters[id].exits);
                gather(r, lambda, clusters[id].exits);
                break;
            }
        }
        double s = 0.0;
        for (const auto& [pt, lambda] : clusters[id].exits) s += lambda - birth;
        for (int ch : clusters[id].children)
            s += clusters[ch].size * (clusters[ch].birth - birth);
        clusters[id].stability = s;
        return id;
    }

    // excess-of-mass: returns (selected ids, subtree score)
    std::pair<std::vector<int>, double> select(int id) const {
        const RefCluster& c = clusters[id];
        if (c.children.empty()) {
            if (id == 0) return {{}, 0.0}; // root alone is never a cluster
            return {{id}, c.stability};
        }
        std::vector<int> kids;
        double child_score = 0.0;
        for (int ch : c.children) {
            auto [ids, score] = select(ch);
            kids.insert(kids.end(), ids.begin(), ids.end());
            child_score += score;
        }
        if (id != 0 && c.stability >= child_score) return {{id}, c.stability};
        return {kids, child_score};
    }

    void collect_exits(int id, std::vector<int>& out) const {
        for (const auto& [pt, lambda] : clusters[id].exits) out.push_back(pt);
        for (int ch : clusters[id].children) collect_exits(ch, out);
    }
};

} // namespace

ClusterLabels reference_hdbscan(const Matrix& m, const HdbscanParams& params) {
    const std::size_t n = m.rows();
    if (n > 200) throw data_error("reference_hdbscan: n too large (max 200)");
    if (params.min_cluster_size < 2)
        throw data_error("reference_hdbscan: min_cluster_size must be >= 2");
    if (n <= static_cast<std::size_t>(params.min_samples))
        throw data_error("reference_hdbscan: need more than min_samples points");

    // full distance matrix and per-point sorted rows for core distances
    Matrix dist(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist(i, j) = dist(j, i) = std::sqrt(squared_distance(m.row(i), m.row(j)));
    std::vector<double> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (params.min_samples == 1) {
            core[i] = 0.0; // the point itself is its first neighbor
            continue;
        }
        std::vector<double> row;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) row.push_back(dist(i, j));
        std::sort(row.begin(), row.end());
        core[i] = row[params.min_samples - 2];
    }

    // Kruskal over every pair
    std::vector<MstEdge> all;
    all.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            all.push_back({static_cast<int>(i), static_cast<int>(j),
                           std::max({core[i], core[j], dist(i, j)})});
    std::sort(all.begin(), all.end(), edge_less);
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    std::vector<MstEdge> mst;
    for (const MstEdge& e : all) {
        const int ra = find(e.a), rb = find(e.b);
        if (ra == rb) continue;
        parent[ra] = rb;
        mst.push_back(e);
        if (mst.size() == n - 1) break;
    }

    const std::vector<DendroNode> dendro = build_dendrogram(std::move(mst), n);
    RefBuilder builder{dendro, n, params.min_cluster_size, {}};
    builder.process(static_cast<int>(2 * n - 2), 0.0);

    std::vector<int> chosen;
    if (params.selection == Selection::leaf) {
        for (std::size_t id = 1; id < builder.clusters.size(); ++id)
            if (builder.clusters[id].children.empty()) chosen.push_back(static_cast<int>(id));
    } else {
        chosen = builder.select(0).first;
    }
    std::sort(chosen.begin(), chosen.end());

    std::vector<std::vector<int>> members(chosen.size());
    std::vector<double> stabilities(chosen.size());
    for (std::size_t ci = 0; ci < chosen.size(); ++ci) {
        builder.collect_exits(chosen[ci], members[ci]);
        std::sort(members[ci].begin(), members[ci].end());
        stabilities[ci] = builder.clusters[chosen[ci]].stability;
    }
    return finalize_labels(members, stabilities, n);
}

void save_labels_csv(const ClusterLabels& labels, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path.string());
    out << "cluster\n";
    for (int v : labels.labels) out << v << '\n';
    if (!out) throw data_error("write failed: " + path.string());
}

ClusterLabels load_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw data_error("empty cluster file: " + path.string());
    ClusterLabels labels;
    int max_id = -1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        labels.labels.push_back(std::stoi(line));
        max_id = std::max(max_id, labels.labels.back());
    }
    labels.persistence.assign(static_cast<std::size_t>(max_id + 1), 0.0);
    return labels;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b,
                           bool exclude_noise) {
    if (a.size() != b.size()) throw data_error("adjusted_rand_index: length mismatch");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!exclude_noise || (a[i] != -1 && b[i] != -1)) keep.push_back(i);

    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    for (std::size_t i : keep) {
        cells[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, v] : cells) sum_cells += choose2(v);
    for (const auto& [key, v] : rows) sum_rows += choose2(v);
    for (const auto& [key, v] : cols) sum_cols += choose2(v);
    const double total = choose2(static_cast<double>(keep.size()));
    if (total == 0.0) return 1.0;
    const double expected = sum_rows * sum_cols / total;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    const double denom = max_index - expected;
    if (denom == 0.0) return 1.0;
    return (sum_cells - expected) / denom;
}

} // namespace shapcluster
