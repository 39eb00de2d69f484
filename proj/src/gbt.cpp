#include "shapcluster/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "shapcluster/errors.hpp"

namespace shapcluster {

void GbtConfig::validate() const {
    if (rounds < 1) throw config_error("gbt: rounds must be >= 1");
    if (!(eta > 0.0 && eta <= 1.0)) throw config_error("gbt: eta must be in (0, 1]");
    if (max_depth < 1) throw config_error("gbt: max_depth must be >= 1");
    if (lambda < 0.0) throw config_error("gbt: lambda must be >= 0");
    if (gamma < 0.0) throw config_error("gbt: gamma must be >= 0");
    if (min_child_weight < 0.0) throw config_error("gbt: min_child_weight must be >= 0");
}

void softmax(std::span<const double> margins, std::span<double> out) {
    double hi = margins[0];
    for (double m : margins) hi = std::max(hi, m);
    double z = 0.0;
    for (std::size_t c = 0; c < margins.size(); ++c) {
        out[c] = std::exp(margins[c] - hi);
        z += out[c];
    }
    for (std::size_t c = 0; c < margins.size(); ++c) out[c] /= z;
}

void softmax_gradients(std::span<const double> margins, int label, std::span<double> grad,
                       std::span<double> hess) {
    softmax(margins, grad); // reuse as probability buffer
    for (std::size_t c = 0; c < margins.size(); ++c) {
        const double pc = grad[c];
        hess[c] = pc * (1.0 - pc);
        grad[c] = pc - (static_cast<int>(c) == label ? 1.0 : 0.0);
    }
}

double softmax_log_loss(std::span<const double> margins, int label) {
    double hi = margins[0];
    for (double m : margins) hi = std::max(hi, m);
    double z = 0.0;
    for (double m : margins) z += std::exp(m - hi);
    return std::log(z) - (margins[label] - hi);
}

namespace {

// Per-node state for exact greedy growth: one list of row indices per feature,
// each sorted by that feature's value (ties by row index). Splitting a node
// partitions every list stably, so child lists stay sorted without re-sorting.
struct NodeRows {
    std::vector<std::vector<int>> order; // p lists
    std::size_t size() const { return order.empty() ? 0 : order[0].size(); }
};

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    bool valid = false;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const GbtConfig& cfg, std::span<const double> grad,
                std::span<const double> hess)
        : x_(x), cfg_(cfg), grad_(grad), hess_(hess) {}

    RegressionTree build(const NodeRows& root) {
        tree_.nodes.clear();
        grow(root, 0);
        return std::move(tree_);
    }

private:
    int grow(const NodeRows& rows, int depth) {
        double g = 0.0, h = 0.0;
        for (int i : rows.order[0]) {
            g += grad_[i];
            h += hess_[i];
        }
        const int node_id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});
        tree_.nodes[node_id].cover = h;

        SplitChoice best;
        if (depth < cfg_.max_depth && rows.size() >= 2) best = find_split(rows, g, h);
        if (!best.valid) {
            tree_.nodes[node_id].value = -g / (h + cfg_.lambda);
            return node_id;
        }

        NodeRows left, right;
        left.order.resize(rows.order.size());
        right.order.resize(rows.order.size());
        for (std::size_t f = 0; f < rows.order.size(); ++f) {
            for (int i : rows.order[f]) {
                if (x_(i, best.feature) < best.threshold)
                    left.order[f].push_back(i);
                else
                    right.order[f].push_back(i);
            }
        }
        tree_.nodes[node_id].feature = best.feature;
        tree_.nodes[node_id].threshold = best.threshold;
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        tree_.nodes[node_id].left = l;
        tree_.nodes[node_id].right = r;
        return node_id;
    }

    SplitChoice find_split(const NodeRows& rows, double g_total, double h_total) const {
        SplitChoice best;
        const double parent_score = g_total * g_total / (h_total + cfg_.lambda);
        for (std::size_t f = 0; f < rows.order.size(); ++f) {
            const std::vector<int>& order = rows.order[f];
            double gl = 0.0, hl = 0.0;
            for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
                const int i = order[pos];
                gl += grad_[i];
                hl += hess_[i];
                const double v = x_(i, f);
                const double v_next = x_(order[pos + 1], f);
                if (v == v_next) continue; // candidate thresholds sit between distinct values
                const double gr = g_total - gl;
                const double hr = h_total - hl;
                if (hl < cfg_.min_child_weight || hr < cfg_.min_child_weight) continue;
                const double gain = 0.5 * (gl * gl / (hl + cfg_.lambda) +
                                           gr * gr / (hr + cfg_.lambda) - parent_score) -
                                    cfg_.gamma;
                if (gain <= 0.0) continue;
                const double threshold = v + 0.5 * (v_next - v);
                // ties broken by lowest feature index, then lowest threshold
                if (!best.valid || gain > best.gain ||
                    (gain == best.gain && (static_cast<int>(f) < best.feature ||
                                           (static_cast<int>(f) == best.feature &&
                                            threshold < best.threshold)))) {
                    best = {gain, static_cast<int>(f), threshold, true};
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const GbtConfig& cfg_;
    std::span<const double> grad_;
    std::span<const double> hess_;
    RegressionTree tree_;
};

} // namespace

Ensemble fit(const Dataset& train, const GbtConfig& cfg) {
    cfg.validate();
    if (!train.labels) throw data_error("fit: training data has no labels");
    const std::size_t n = train.n();
    const std::size_t p = train.p();
    const std::size_t k = train.k();
    if (n < 2) throw data_error("fit: need at least 2 training samples");
    if (k < 2) throw data_error("fit: need at least 2 classes");
    const std::vector<int>& y = *train.labels;
    {
        std::set<int> distinct(y.begin(), y.end());
        if (distinct.size() < 2)
            throw data_error("fit: training labels contain a single class");
    }

    Ensemble e;
    e.eta = cfg.eta;
    e.p = p;
    e.k = k;
    e.feature_names = train.feature_names;
    e.class_names = train.class_names;
    e.base_score.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto count = std::count(y.begin(), y.end(), static_cast<int>(c));
        const double prior = static_cast<double>(count) / static_cast<double>(n);
        e.base_score[c] = std::log(std::max(prior, 1e-12));
    }

    // One argsort per feature, shared by every tree of the fit.
    NodeRows root;
    root.order.resize(p);
    for (std::size_t f = 0; f < p; ++f) {
        std::vector<int>& order = root.order[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double va = train.features(a, f), vb = train.features(b, f);
            return va < vb || (va == vb && a < b);
        });
    }

    Matrix margins(n, k);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(e.base_score.begin(), e.base_score.end(), margins.row(i).begin());

    Matrix grad(n, k), hess(n, k);
    std::vector<double> g_col(n), h_col(n);
    e.trees.resize(cfg.rounds);
    for (int round = 0; round < cfg.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i)
            softmax_gradients(margins.row(i), y[i], grad.row(i), hess.row(i));
        e.trees[round].reserve(k);
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                g_col[i] = grad(i, c);
                h_col[i] = hess(i, c);
            }
            TreeBuilder builder(train.features, cfg, g_col, h_col);
            RegressionTree tree = builder.build(root);
            for (std::size_t i = 0; i < n; ++i)
                margins(i, c) += cfg.eta * tree.eval(train.features.row(i));
            e.trees[round].push_back(std::move(tree));
        }
    }
    return e;
}

std::vector<double> Ensemble::predict_margins(std::span<const double> x) const {
    if (x.size() != p)
        throw data_error("predict_margins: expected " + std::to_string(p) +
                         " features, got " + std::to_string(x.size()));
    std::vector<double> m = base_score;
    for (const auto& round : trees)
        for (std::size_t c = 0; c < k; ++c) m[c] += eta * round[c].eval(x);
    return m;
}

int Ensemble::predict_class(std::span<const double> x) const {
    const std::vector<double> m = predict_margins(x);
    return static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
}

ClassificationReport classification_report(std::span<const int> y_true,
                                           std::span<const int> y_pred, std::size_t k) {
    if (y_true.size() != y_pred.size())
        throw data_error("classification_report: length mismatch");
    for (std::size_t i = 0; i < y_true.size(); ++i)
        if (y_true[i] < 0 || y_true[i] >= static_cast<int>(k) || y_pred[i] < 0 ||
            y_pred[i] >= static_cast<int>(k))
            throw data_error("classification_report: label out of range at index " +
                             std::to_string(i));

    ClassificationReport r;
    r.total = y_true.size();
    std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == y_pred[i]) {
            ++tp[y_true[i]];
            ++correct;
        } else {
            ++fp[y_pred[i]];
            ++fn[y_true[i]];
        }
    }
    r.accuracy = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
    r.per_class.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics& m = r.per_class[c];
        m.support = tp[c] + fn[c];
        const std::size_t predicted = tp[c] + fp[c];
        m.precision = predicted ? static_cast<double>(tp[c]) / predicted : 0.0;
        m.recall = m.support ? static_cast<double>(tp[c]) / m.support : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
    }
    r.macro_avg.support = r.total;
    r.weighted_avg.support = r.total;
    for (std::size_t c = 0; c < k; ++c) {
        const ClassMetrics& m = r.per_class[c];
        r.macro_avg.precision += m.precision / k;
        r.macro_avg.recall += m.recall / k;
        r.macro_avg.f1 += m.f1 / k;
        if (r.total) {
            const double w = static_cast<double>(m.support) / r.total;
            r.weighted_avg.precision += w * m.precision;
            r.weighted_avg.recall += w * m.recall;
            r.weighted_avg.f1 += w * m.f1;
        }
    }
    return r;
}

std::string ClassificationReport::to_table(const std::vector<std::string>& class_names) const {
    auto fmt = [](double v) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %9s %9s %9s %9s\n", "Class", "Precision",
                  "Recall", "F1-score", "Support");
    out += line;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const ClassMetrics& m = per_class[c];
        std::snprintf(line, sizeof line, "%-14s %9s %9s %9s %9zu\n", class_names[c].c_str(),
                      fmt(m.precision).c_str(), fmt(m.recall).c_str(), fmt(m.f1).c_str(),
                      m.support);
        out += line;
    }
    std::snprintf(line, sizeof line, "%-14s %9s %9s %9s %9zu\n", "accuracy", "", "",
                  fmt(accuracy).c_str(), total);
    out += line;
    std::snprintf(line, sizeof line, "%-14s %9s %9s %9s %9zu\n", "macro avg",
                  fmt(macro_avg.precision).c_str(), fmt(macro_avg.recall).c_str(),
                  fmt(macro_avg.f1).c_str(), total);
    out += line;
    std::snprintf(line, sizeof line, "%-14s %9s %9s %9s %9zu\n", "weighted avg",
                  fmt(weighted_avg.precision).c_str(), fmt(weighted_avg.recall).c_str(),
                  fmt(weighted_avg.f1).c_str(), total);
    out += line;
    return out;
}

void save_model(const Ensemble& e, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "shapcluster-gbt-1";
    j["eta"] = e.eta;
    j["p"] = e.p;
    j["k"] = e.k;
    j["base_score"] = e.base_score;
    j["feature_names"] = e.feature_names;
    j["class_names"] = e.class_names;
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& round : e.trees) {
        nlohmann::json per_class = nlohmann::json::array();
        for (const auto& tree : round) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const TreeNode& nd : tree.nodes) {
                nodes.push_back({{"feature", nd.feature},
                                 {"threshold", nd.threshold},
                                 {"left", nd.left},
                                 {"right", nd.right},
                                 {"value", nd.value},
                                 {"cover", nd.cover}});
            }
            per_class.push_back({{"nodes", std::move(nodes)}});
        }
        rounds.push_back(std::move(per_class));
    }
    j["trees"] = std::move(rounds);
    std::ofstream out(path);
    if (!out) throw data_error("cannot write model file: " + path.string());
    out << j.dump(1) << '\n';
}

Ensemble load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open model file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw data_error("model file is not valid JSON: " + std::string(ex.what()));
    }
    if (j.value("format", "") != "shapcluster-gbt-1")
        throw data_error("unrecognized model format in " + path.string());
    Ensemble e;
    e.eta = j.at("eta").get<double>();
    e.p = j.at("p").get<std::size_t>();
    e.k = j.at("k").get<std::size_t>();
    e.base_score = j.at("base_score").get<std::vector<double>>();
    e.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    e.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& round : j.at("trees")) {
        std::vector<RegressionTree> per_class;
        for (const auto& tree_json : round) {
            RegressionTree tree;
            for (const auto& nd : tree_json.at("nodes")) {
                tree.nodes.push_back({nd.at("feature").get<int>(),
                                      nd.at("threshold").get<double>(),
                                      nd.at("left").get<int>(), nd.at("right").get<int>(),
                                      nd.at("value").get<double>(),
                                      nd.at("cover").get<double>()});
            }
            per_class.push_back(std::move(tree));
        }
        e.trees.push_back(std::move(per_class));
    }
    return e;
}

} // namespace shapcluster
