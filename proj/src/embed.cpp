#include "shapcluster/embed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

#include "shapcluster/errors.hpp"

namespace shapcluster {

namespace {

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void normalize(std::span<double> v) {
    const double n = norm(v);
    if (n > 0.0)
        for (double& x : v) x /= n;
}

void mat_vec(const Matrix& s, std::span<const double> v, std::span<double> out) {
    for (std::size_t i = 0; i < s.rows(); ++i) out[i] = dot(s.row(i), v);
}

void subtract_projection(std::span<double> v, std::span<const double> dir) {
    const double c = dot(v, dir);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * dir[i];
}

EigenPair dominant_eigenpair(const Matrix& s, const std::vector<double>& init,
                             const std::vector<double>* orthogonal_to) {
    constexpr double tol = 1e-10;
    constexpr int max_iters = 100000;
    const std::size_t q = s.rows();
    std::vector<double> v = init;
    if (orthogonal_to) subtract_projection(v, *orthogonal_to);
    normalize(v);
    std::vector<double> w(q);
    for (int iter = 0; iter < max_iters; ++iter) {
        mat_vec(s, v, w);
        if (orthogonal_to) subtract_projection(w, *orthogonal_to);
        const double wn = norm(w);
        if (wn <= 1e-300) break; // (near-)null direction: keep current v, eigenvalue ~0
        for (double& x : w) x /= wn;
        // sign-aligned direction change
        double delta = 0.0;
        const double sign = dot(w, v) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < q; ++i)
            delta = std::max(delta, std::abs(w[i] - sign * v[i]));
        v = w;
        if (delta <= tol) break;
    }
    EigenPair pair;
    std::vector<double> sv(q);
    mat_vec(s, v, sv);
    pair.value = dot(sv, v);
    pair.vector = std::move(v);
    return pair;
}

void apply_sign_convention(std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& x : v) x = -x;
}

} // namespace

std::array<EigenPair, 2> top2_symmetric(const Matrix& s) {
    const std::size_t q = s.rows();
    // deterministic pseudo-random start vector, identical on every platform
    RngStream init_rng(0x5ca1ab1eULL, q);
    std::vector<double> init(q);
    for (double& x : init) x = init_rng.uniform(-1.0, 1.0);

    EigenPair first = dominant_eigenpair(s, init, nullptr);
    apply_sign_convention(first.vector);

    // deflate and re-run, keeping the iterate orthogonal to the first direction
    Matrix deflated = s;
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j)
            deflated(i, j) -= first.value * first.vector[i] * first.vector[j];
    for (double& x : init) x = init_rng.uniform(-1.0, 1.0);
    EigenPair second = dominant_eigenpair(deflated, init, &first.vector);
    apply_sign_convention(second.vector);
    // eigenvalue w.r.t. the original matrix
    std::vector<double> sv(q);
    mat_vec(s, second.vector, sv);
    second.value = dot(sv, second.vector);
    return {std::move(first), std::move(second)};
}

Embedding2D pca_embed(const Matrix& m) {
    const std::size_t n = m.rows(), q = m.cols();
    if (n < 2) throw data_error("pca_embed: need at least 2 rows");
    if (q < 2) throw data_error("pca_embed: need at least 2 columns");

    std::vector<double> mean(q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) mean[j] += m(i, j) / static_cast<double>(n);
    Matrix centered(n, q);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) centered(i, j) = m(i, j) - mean[j];

    Matrix cov(q, q);
    for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = a; b < q; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += centered(i, a) * centered(i, b);
            cov(a, b) = cov(b, a) = s / static_cast<double>(n - 1);
        }
    double total_variance = 0.0;
    for (std::size_t j = 0; j < q; ++j) total_variance += cov(j, j);
    if (total_variance <= 0.0) throw data_error("pca_embed: all rows identical (rank 0)");

    const auto pairs = top2_symmetric(cov);
    Embedding2D e;
    e.method = "pca";
    e.explained_variance = {pairs[0].value, pairs[1].value};
    e.loadings = Matrix(q, 2);
    for (std::size_t j = 0; j < q; ++j) {
        e.loadings(j, 0) = pairs[0].vector[j];
        e.loadings(j, 1) = pairs[1].vector[j];
    }
    e.coords = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        e.coords(i, 0) = dot(centered.row(i), pairs[0].vector);
        e.coords(i, 1) = dot(centered.row(i), pairs[1].vector);
    }
    return e;
}

std::pair<double, double> fit_ab(double min_dist, double spread) {
    constexpr int grid = 300;
    std::vector<double> xs(grid), ys(grid);
    for (int i = 0; i < grid; ++i) {
        const double x = 3.0 * spread * static_cast<double>(i) / (grid - 1);
        xs[i] = x;
        ys[i] = x < min_dist ? 1.0 : std::exp(-(x - min_dist) / spread);
    }

    double a = 1.0, b = 1.0;
    auto sse = [&](double aa, double bb) {
        double s = 0.0;
        for (int i = 0; i < grid; ++i) {
            const double f = 1.0 / (1.0 + aa * std::pow(xs[i], 2.0 * bb));
            const double r = f - ys[i];
            s += r * r;
        }
        return s;
    };

    // Levenberg-Marquardt on the two parameters; the 2x2 normal equations are
    // solved in closed form.
    double mu = 1e-3;
    double current = sse(a, b);
    for (int iter = 0; iter < 200; ++iter) {
        double jtj00 = 0.0, jtj01 = 0.0, jtj11 = 0.0, jtr0 = 0.0, jtr1 = 0.0;
        for (int i = 0; i < grid; ++i) {
            const double x = xs[i];
            const double xp = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
            const double denom = 1.0 + a * xp;
            const double f = 1.0 / denom;
            const double r = f - ys[i];
            const double da = -xp / (denom * denom);
            const double db = x > 0.0 ? -2.0 * a * xp * std::log(x) / (denom * denom) : 0.0;
            jtj00 += da * da;
            jtj01 += da * db;
            jtj11 += db * db;
            jtr0 += da * r;
            jtr1 += db * r;
        }
        bool stepped = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            const double g00 = jtj00 * (1.0 + mu), g11 = jtj11 * (1.0 + mu);
            const double det = g00 * g11 - jtj01 * jtj01;
            if (det == 0.0) break;
            const double step_a = (-jtr0 * g11 + jtr1 * jtj01) / det;
            const double step_b = (jtr0 * jtj01 - jtr1 * g00) / det;
            const double na = a + step_a, nb = b + step_b;
            if (na > 0.0 && nb > 0.0) {
                const double next = sse(na, nb);
                if (next < current) {
                    if (std::abs(step_a) < 1e-12 && std::abs(step_b) < 1e-12) {
                        a = na;
                        b = nb;
                        return {a, b};
                    }
                    a = na;
                    b = nb;
                    current = next;
                    mu = std::max(mu / 3.0, 1e-12);
                    stepped = true;
                    break;
                }
            }
            mu *= 3.0;
        }
        if (!stepped) break;
    }
    return {a, b};
}

namespace {

void parallel_rows(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min<int>(threads, static_cast<int>(count)); ++w)
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= count) break;
                fn(i);
            }
        });
    for (auto& t : pool) t.join();
}

struct GraphEdge {
    int i, j;
    double weight;
};

} // namespace

Embedding2D neighbor_embed(const Matrix& m, const NeighborEmbedConfig& cfg, RngStream rng) {
    const std::size_t n = m.rows();
    const std::size_t k = static_cast<std::size_t>(cfg.neighbors);
    if (cfg.neighbors < 2) throw data_error("neighbor_embed: neighbors must be >= 2");
    if (k >= n)
        throw data_error("neighbor_embed: neighbors (" + std::to_string(k) +
                         ") must be < sample count (" + std::to_string(n) + ")");
    if (cfg.epochs < 1) throw data_error("neighbor_embed: epochs must be >= 1");

    // exact k-NN, ties broken by index
    Matrix knn_dist(n, k);
    std::vector<std::vector<int>> knn_idx(n);
    parallel_rows(n, cfg.threads, [&](std::size_t i) {
        std::vector<std::pair<double, int>> dists;
        dists.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dists.emplace_back(std::sqrt(squared_distance(m.row(i), m.row(j))),
                               static_cast<int>(j));
        }
        std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
        knn_idx[i].resize(k);
        for (std::size_t a = 0; a < k; ++a) {
            knn_idx[i][a] = dists[a].second;
            knn_dist(i, a) = std::max(dists[a].first, 1e-12);
        }
    });

    // per-point calibration: rho = nearest distance, sigma solved by bisection
    // so the smoothed neighbor mass hits log2(k)
    const double target = std::log2(static_cast<double>(k));
    std::vector<double> rho(n), sigma(n);
    for (std::size_t i = 0; i < n; ++i) {
        rho[i] = knn_dist(i, 0);
        auto mass = [&](double s) {
            double total = 0.0;
            for (std::size_t a = 0; a < k; ++a)
                total += std::exp(-std::max(0.0, knn_dist(i, a) - rho[i]) / s);
            return total;
        };
        double hi = 1.0;
        while (mass(hi) < target && hi < 1e12) hi *= 2.0;
        double lo = 0.0;
        for (int it = 0; it < 64; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mass(std::max(mid, 1e-12)) >= target)
                hi = mid;
            else
                lo = mid;
        }
        sigma[i] = std::max(0.5 * (lo + hi), 1e-10);
    }

    // directed memberships, symmetrized as a + b - a*b
    std::vector<std::vector<std::pair<int, double>>> directed(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < k; ++a)
            directed[i].emplace_back(
                knn_idx[i][a],
                std::exp(-std::max(0.0, knn_dist(i, a) - rho[i]) / sigma[i]));
    std::vector<GraphEdge> edges;
    {
        // weight(i->j) looked up both ways; each unordered pair emitted once
        std::vector<std::vector<std::pair<int, double>>> lookup(n);
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& [j, w] : directed[i]) lookup[i].emplace_back(j, w);
        auto weight_of = [&](int from, int to) {
            for (const auto& [j, w] : lookup[from])
                if (j == to) return w;
            return 0.0;
        };
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& [j, wij] : directed[i]) {
                if (static_cast<std::size_t>(j) < i) continue; // handled from j's side
                const double wji = weight_of(j, static_cast<int>(i));
                const double w = wij + wji - wij * wji;
                if (w > 0.0) edges.push_back({static_cast<int>(i), j, w});
            }
        // pairs where only j->i exists (i<j but i not in j's list handled above;
        // the reverse case: j<i edges skipped above get added from j's iteration)
        for (std::size_t j = 0; j < n; ++j)
            for (const auto& [i, wji] : directed[j]) {
                if (static_cast<std::size_t>(i) >= j) continue;
                if (weight_of(i, static_cast<int>(j)) > 0.0) continue; // already emitted
                edges.push_back({i, static_cast<int>(j), wji});
            }
    }

    const auto [a_param, b_param] = fit_ab(cfg.min_dist, cfg.spread);

    // init from PCA scaled to unit variance; identical-point inputs fall back
    // to seeded jitter
    Matrix coords(n, 2);
    try {
        Embedding2D pca = pca_embed(m);
        coords = std::move(pca.coords);
        for (int col = 0; col < 2; ++col) {
            double mean = 0.0, var = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += coords(i, col) / n;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = coords(i, col) - mean;
                var += d * d / n;
            }
            const double sd = std::sqrt(var);
            if (sd > 1e-12)
                for (std::size_t i = 0; i < n; ++i) coords(i, col) /= sd;
        }
    } catch (const data_error&) {
        for (std::size_t i = 0; i < n; ++i) {
            coords(i, 0) = rng.uniform(-0.01, 0.01);
            coords(i, 1) = rng.uniform(-0.01, 0.01);
        }
    }

    auto clip4 = [](double v) { return std::clamp(v, -4.0, 4.0); };
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double alpha =
            cfg.learning_rate * (1.0 - static_cast<double>(epoch) / cfg.epochs);
        for (const GraphEdge& e : edges) {
            double* yi = &coords(e.i, 0);
            double* yj = &coords(e.j, 0);
            const double dx = yi[0] - yj[0], dy = yi[1] - yj[1];
            const double d2 = std::max(dx * dx + dy * dy, 1e-12);
            const double pw = std::pow(d2, b_param);
            const double attract = -2.0 * a_param * b_param * pw / (d2 * (1.0 + a_param * pw));
            const double gx = clip4(attract * dx) * alpha * e.weight;
            const double gy = clip4(attract * dy) * alpha * e.weight;
            yi[0] += gx;
            yi[1] += gy;
            yj[0] -= gx;
            yj[1] -= gy;
            for (int neg = 0; neg < cfg.negative_samples; ++neg) {
                const std::size_t r = static_cast<std::size_t>(rng.uniform_int(n));
                if (static_cast<int>(r) == e.i) continue;
                const double* yr = &coords(r, 0);
                const double rx = yi[0] - yr[0], ry = yi[1] - yr[1];
                const double rd2 = std::max(rx * rx + ry * ry, 1e-12);
                const double rpw = std::pow(rd2, b_param);
                const double repel =
                    2.0 * b_param / ((0.001 + rd2) * (1.0 + a_param * rpw));
                yi[0] += clip4(repel * rx) * alpha * e.weight;
                yi[1] += clip4(repel * ry) * alpha * e.weight;
            }
        }
    }

    Embedding2D out;
    out.method = "neighbor";
    out.coords = std::move(coords);
    return out;
}

} // namespace shapcluster
