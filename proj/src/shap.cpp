#include "shapcluster/shap.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <thread>

#include "shapcluster/errors.hpp"

namespace shapcluster {

Matrix ShapTensor::sample_matrix(std::size_t s) const {
    Matrix m(p, k);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t c = 0; c < k; ++c) m(i, c) = at(s, i, c);
    return m;
}

Matrix ShapTensor::flatten() const {
    Matrix m(n, p * k);
    std::copy(values.begin(), values.end(), m.data().begin());
    return m;
}

std::vector<std::string> ShapTensor::flat_column_names() const {
    std::vector<std::string> names;
    names.reserve(p * k);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t c = 0; c < k; ++c)
            names.push_back(feature_names[i] + "|" + class_names[c]);
    return names;
}

BackgroundSet BackgroundSet::sample(const Matrix& features, std::span<const int> candidates,
                                    std::size_t cap, RngStream rng) {
    if (candidates.empty()) throw data_error("background: no candidate rows");
    std::vector<int> pool(candidates.begin(), candidates.end());
    const std::size_t m = std::min(cap, pool.size());
    // partial Fisher-Yates: the first m slots become the sample
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    BackgroundSet bg;
    bg.rows = Matrix(m, features.cols());
    for (std::size_t i = 0; i < m; ++i) {
        const auto src = features.row(pool[i]);
        std::copy(src.begin(), src.end(), bg.rows.row(i).begin());
    }
    return bg;
}

namespace {

// Shapley weights for the divergence game: a leaf whose path diverged on a
// features toward x and b features toward the background row contributes
//   +value * (a-1)! b! / (a+b)!   to each x-side feature,
//   -value * a! (b-1)! / (a+b)!   to each background-side feature.
class DivergenceWeights {
public:
    explicit DivergenceWeights(std::size_t max_depth) {
        fact_.resize(2 * max_depth + 2, 1.0);
        for (std::size_t i = 1; i < fact_.size(); ++i)
            fact_[i] = fact_[i - 1] * static_cast<double>(i);
    }
    double x_side(std::size_t a, std::size_t b) const {
        return fact_[a - 1] * fact_[b] / fact_[a + b];
    }
    double bg_side(std::size_t a, std::size_t b) const {
        return fact_[a] * fact_[b - 1] / fact_[a + b];
    }

private:
    std::vector<double> fact_;
};

std::size_t tree_depth(const RegressionTree& t, int idx = 0) {
    const TreeNode& nd = t.nodes[idx];
    if (nd.feature < 0) return 0;
    return 1 + std::max(tree_depth(t, nd.left), tree_depth(t, nd.right));
}

// Two-path traversal for a single (tree, x, background row) triple. Tracks
// which side each diverged feature was pinned to so repeated splits on the
// same feature follow the pinned point.
class Traverser {
public:
    Traverser(std::size_t p, const DivergenceWeights& w) : side_(p, 0), weights_(w) {}

    // Accumulates scale * phi into out (stride k between features).
    void run(const RegressionTree& tree, std::span<const double> x,
             std::span<const double> z, double scale, double* out, std::size_t stride) {
        tree_ = &tree;
        x_ = x.data();
        z_ = z.data();
        scale_ = scale;
        out_ = out;
        stride_ = stride;
        x_path_.clear();
        z_path_.clear();
        recurse(0);
    }

private:
    void recurse(int idx) {
        const TreeNode& nd = tree_->nodes[idx];
        if (nd.feature < 0) {
            const std::size_t a = x_path_.size(), b = z_path_.size();
            if (a == 0 && b == 0) return; // reached by every hybrid: no attribution
            const double v = scale_ * nd.value;
            if (a > 0) {
                const double w = v * weights_.x_side(a, b);
                for (int f : x_path_) out_[f * stride_] += w;
            }
            if (b > 0) {
                const double w = v * weights_.bg_side(a, b);
                for (int f : z_path_) out_[f * stride_] -= w;
            }
            return;
        }
        const int f = nd.feature;
        const bool x_left = x_[f] < nd.threshold;
        const bool z_left = z_[f] < nd.threshold;
        if (side_[f] == 1) {
            recurse(x_left ? nd.left : nd.right);
        } else if (side_[f] == 2) {
            recurse(z_left ? nd.left : nd.right);
        } else if (x_left == z_left) {
            recurse(x_left ? nd.left : nd.right);
        } else {
            side_[f] = 1;
            x_path_.push_back(f);
            recurse(x_left ? nd.left : nd.right);
            x_path_.pop_back();
            side_[f] = 2;
            z_path_.push_back(f);
            recurse(z_left ? nd.left : nd.right);
            z_path_.pop_back();
            side_[f] = 0;
        }
    }

    const RegressionTree* tree_ = nullptr;
    const double* x_ = nullptr;
    const double* z_ = nullptr;
    double scale_ = 1.0;
    double* out_ = nullptr;
    std::size_t stride_ = 1;
    std::vector<std::uint8_t> side_;
    std::vector<int> x_path_;
    std::vector<int> z_path_;
    const DivergenceWeights& weights_;
};

std::size_t ensemble_depth(const Ensemble& e) {
    std::size_t d = 1;
    for (const auto& round : e.trees)
        for (const auto& tree : round) d = std::max(d, tree_depth(tree));
    return d;
}

} // namespace

Matrix shap_single(const Ensemble& e, std::span<const double> x, const BackgroundSet& bg) {
    if (x.size() != e.p) throw data_error("shap_single: feature count mismatch");
    if (bg.rows.rows() == 0) throw data_error("shap_single: empty background");
    if (bg.rows.cols() != e.p) throw data_error("shap_single: background width mismatch");

    const DivergenceWeights weights(std::max<std::size_t>(1, ensemble_depth(e)));
    Traverser traverser(e.p, weights);
    Matrix phi(e.p, e.k);
    // fixed accumulation order: trees outer, background rows inner
    for (const auto& round : e.trees) {
        for (std::size_t c = 0; c < e.k; ++c) {
            double* col = phi.data().data() + c;
            for (std::size_t r = 0; r < bg.rows.rows(); ++r)
                traverser.run(round[c], x, bg.rows.row(r), e.eta, col, e.k);
        }
    }
    const double inv_m = 1.0 / static_cast<double>(bg.rows.rows());
    for (double& v : phi.data()) v *= inv_m;
    return phi;
}

Matrix brute_force_shapley(
    const std::function<std::vector<double>(std::span<const double>)>& eval,
    std::span<const double> x, const Matrix& bg, std::size_t k) {
    const std::size_t p = x.size();
    if (p > 20)
        throw data_error("brute_force_shapley: refusing p = " + std::to_string(p) +
                         " (> 20, 2^p enumeration)");
    if (bg.rows() == 0) throw data_error("brute_force_shapley: empty background");
    if (bg.cols() != p) throw data_error("brute_force_shapley: background width mismatch");

    const std::size_t n_masks = std::size_t{1} << p;
    const double m = static_cast<double>(bg.rows());

    // v(S) for every coalition, k values each
    std::vector<double> value(n_masks * k, 0.0);
    std::vector<double> composite(p);
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        for (std::size_t r = 0; r < bg.rows(); ++r) {
            const auto z = bg.row(r);
            for (std::size_t i = 0; i < p; ++i)
                composite[i] = (mask >> i) & 1 ? x[i] : z[i];
            const std::vector<double> out = eval(composite);
            for (std::size_t c = 0; c < k; ++c) value[mask * k + c] += out[c] / m;
        }
    }

    std::vector<double> fact(p + 1, 1.0);
    for (std::size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
    std::vector<double> weight(p); // weight[|S|] for S not containing i
    for (std::size_t s = 0; s < p; ++s) weight[s] = fact[s] * fact[p - s - 1] / fact[p];

    Matrix phi(p, k);
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        const std::size_t s = static_cast<std::size_t>(std::popcount(mask));
        for (std::size_t i = 0; i < p; ++i) {
            if ((mask >> i) & 1) continue;
            const std::size_t with_i = mask | (std::size_t{1} << i);
            for (std::size_t c = 0; c < k; ++c)
                phi(i, c) += weight[s] * (value[with_i * k + c] - value[mask * k + c]);
        }
    }
    return phi;
}

namespace {

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min<int>(threads, static_cast<int>(count));
    std::vector<std::thread> pool;
    std::atomic<std::size_t> cursor{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= count) break;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace

CvShapResult cv_shap_single_run(const Dataset& d, const GbtConfig& cfg,
                                const CvShapParams& params, RngStream run_rng) {
    if (!d.labels) throw data_error("cv_shap: dataset has no labels");
    if (params.folds < 2) throw data_error("cv_shap: need at least 2 folds");
    const std::size_t n = d.n(), p = d.p(), k = d.k();

    CvShapResult result;
    ShapTensor& t = result.tensor;
    t.n = n;
    t.p = p;
    t.k = k;
    t.values.assign(n * p * k, 0.0);
    t.base_values.assign(k, 0.0);
    t.feature_names = d.feature_names;
    t.class_names = d.class_names;

    const FoldAssignment folds = make_folds(n, params.folds, run_rng.derive(0));
    double max_residual = 0.0;
    for (int fold = 0; fold < params.folds; ++fold) {
        std::vector<int> train_rows, held_out;
        for (std::size_t i = 0; i < n; ++i)
            (folds.fold_of[i] == fold ? held_out : train_rows).push_back(static_cast<int>(i));
        if (train_rows.size() < 2)
            throw data_error("cv_shap: fold complement too small to train");

        Dataset train;
        train.features = Matrix(train_rows.size(), p);
        std::vector<int> train_labels(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            const auto src = d.features.row(train_rows[i]);
            std::copy(src.begin(), src.end(), train.features.row(i).begin());
            train_labels[i] = (*d.labels)[train_rows[i]];
        }
        train.labels = std::move(train_labels);
        train.feature_names = d.feature_names;
        train.class_names = d.class_names;

        const Ensemble model = fit(train, cfg);
        const BackgroundSet bg = BackgroundSet::sample(
            d.features, train_rows, params.background_cap,
            run_rng.derive(1 + static_cast<std::uint64_t>(fold)));

        std::vector<double> fold_base(k, 0.0);
        for (std::size_t r = 0; r < bg.rows.rows(); ++r) {
            const std::vector<double> m = model.predict_margins(bg.rows.row(r));
            for (std::size_t c = 0; c < k; ++c) fold_base[c] += m[c] / bg.rows.rows();
        }
        for (std::size_t c = 0; c < k; ++c)
            t.base_values[c] += fold_base[c] / params.folds;

        std::vector<double> residuals(held_out.size(), 0.0);
        parallel_for(held_out.size(), params.threads, [&](std::size_t idx) {
            const int s = held_out[idx];
            const Matrix phi = shap_single(model, d.features.row(s), bg);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t c = 0; c < k; ++c) t.at(s, i, c) = phi(i, c);
            const std::vector<double> margins = model.predict_margins(d.features.row(s));
            double r = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                double total = 0.0;
                for (std::size_t i = 0; i < p; ++i) total += phi(i, c);
                r = std::max(r, std::abs(total - (margins[c] - fold_base[c])));
            }
            residuals[idx] = r;
        });
        for (double r : residuals) max_residual = std::max(max_residual, r);
    }
    result.run_additivity_residual.push_back(max_residual);
    return result;
}

CvShapResult average_cv_runs(std::vector<CvShapResult> runs) {
    if (runs.empty()) throw data_error("average_cv_runs: no runs");
    CvShapResult total = std::move(runs[0]);
    for (std::size_t r = 1; r < runs.size(); ++r) {
        const CvShapResult& run = runs[r];
        for (std::size_t i = 0; i < total.tensor.values.size(); ++i)
            total.tensor.values[i] += run.tensor.values[i];
        for (std::size_t c = 0; c < total.tensor.k; ++c)
            total.tensor.base_values[c] += run.tensor.base_values[c];
        total.run_additivity_residual.push_back(run.run_additivity_residual[0]);
    }
    const double inv = 1.0 / static_cast<double>(runs.size());
    for (double& v : total.tensor.values) v *= inv;
    for (double& b : total.tensor.base_values) b *= inv;
    return total;
}

CvShapResult cv_shap(const Dataset& d, const GbtConfig& cfg, const CvShapParams& params,
                     RngStream rng) {
    if (params.repeats < 1) throw data_error("cv_shap: repeats must be >= 1");
    std::vector<CvShapResult> runs;
    runs.reserve(params.repeats);
    for (int rep = 0; rep < params.repeats; ++rep)
        runs.push_back(cv_shap_single_run(d, cfg, params, rng.derive(rep)));
    return average_cv_runs(std::move(runs));
}

ShapTensor load_shap_tensor(const std::filesystem::path& shap_csv,
                            const std::filesystem::path& base_csv) {
    ShapTensor t;
    std::vector<std::string> base_header;
    const Matrix base = load_matrix_csv(base_csv, &base_header);
    if (base.rows() != 1 || base.cols() == 0)
        throw data_error("base values file must hold exactly one row");
    t.k = base.cols();
    t.class_names = base_header;
    t.base_values.assign(base.row(0).begin(), base.row(0).end());

    std::vector<std::string> columns;
    Matrix flat = load_matrix_csv(shap_csv, &columns);
    if (columns.size() % t.k != 0)
        throw data_error("shap column count is not a multiple of the class count");
    t.n = flat.rows();
    t.p = columns.size() / t.k;
    t.feature_names.reserve(t.p);
    for (std::size_t i = 0; i < t.p; ++i) {
        const std::string& col = columns[i * t.k];
        const auto bar = col.rfind('|');
        t.feature_names.push_back(bar == std::string::npos ? col : col.substr(0, bar));
    }
    t.values = std::move(flat.data());
    return t;
}

Matrix mean_abs_shap(const ShapTensor& t) {
    Matrix m(t.p, t.k);
    if (t.n == 0) return m;
    for (std::size_t s = 0; s < t.n; ++s)
        for (std::size_t i = 0; i < t.p; ++i)
            for (std::size_t c = 0; c < t.k; ++c) m(i, c) += std::abs(t.at(s, i, c));
    for (double& v : m.data()) v /= static_cast<double>(t.n);
    return m;
}

std::vector<double> mean_abs_shap_totals(const ShapTensor& t) {
    const Matrix m = mean_abs_shap(t);
    std::vector<double> totals(t.p, 0.0);
    for (std::size_t i = 0; i < t.p; ++i)
        for (std::size_t c = 0; c < t.k; ++c) totals[i] += m(i, c);
    return totals;
}

} // namespace shapcluster
