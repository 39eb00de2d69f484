#include <doctest.h>

#include <cmath>

#include "shapcluster/embed.hpp"
#include "shapcluster/errors.hpp"
#include "test_support.hpp"

using namespace shapcluster;
using namespace shapcluster::testsupport;

namespace {

double column_variance(const Matrix& m, const std::vector<double>& dir) {
    // variance of the projection of mean-centered rows onto dir
    const std::size_t n = m.rows(), q = m.cols();
    std::vector<double> mean(q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) mean[j] += m(i, j) / n;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double proj = 0.0;
        for (std::size_t j = 0; j < q; ++j) proj += (m(i, j) - mean[j]) * dir[j];
        var += proj * proj;
    }
    return var / (n - 1);
}

} // namespace

TEST_CASE("pca on collinear points concentrates all variance on PC1") {
    RngStream rng(3, 0);
    const std::size_t n = 40, q = 5;
    std::vector<double> dir(q);
    for (auto& v : dir) v = rng.uniform(-1.0, 1.0);
    Matrix m(n, q);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.uniform(-3.0, 3.0);
        for (std::size_t j = 0; j < q; ++j) m(i, j) = 0.5 + t * dir[j];
    }
    const Embedding2D e = pca_embed(m);
    // projections onto the unnormalized direction scale by |dir|^2, so divide
    // once to get the variance along the unit direction
    const double total = column_variance(m, dir) / dot(dir, dir);
    CHECK(e.explained_variance[0] == doctest::Approx(total).epsilon(1e-8));
    CHECK(std::abs(e.explained_variance[1]) <= 1e-10);
}

TEST_CASE("pca of 2D data is lossless") {
    RngStream rng(11, 4);
    const Matrix m = random_points(60, 2, rng, -2.0, 5.0);
    const Embedding2D e = pca_embed(m);
    // reconstruct centered data from coords and loadings
    std::vector<double> mean(2, 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < 2; ++j) mean[j] += m(i, j) / m.rows();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double rec =
                e.coords(i, 0) * e.loadings(j, 0) + e.coords(i, 1) * e.loadings(j, 1);
            CHECK(std::abs(rec - (m(i, j) - mean[j])) <= 1e-10);
        }
}

TEST_CASE("pca principal directions beat random orthogonal directions") {
    RngStream rng(21, 9);
    const Matrix m = random_points(50, 6, rng);
    const Embedding2D e = pca_embed(m);
    std::vector<double> pc1(6), pc2(6);
    for (std::size_t j = 0; j < 6; ++j) {
        pc1[j] = e.loadings(j, 0);
        pc2[j] = e.loadings(j, 1);
    }
    const double v1 = column_variance(m, pc1);
    const double v2 = column_variance(m, pc2);
    CHECK(v1 == doctest::Approx(e.explained_variance[0]).epsilon(1e-8));
    CHECK(v2 == doctest::Approx(e.explained_variance[1]).epsilon(1e-8));
    CHECK(v1 >= v2 - 1e-12);
    for (int round = 0; round < 100; ++round) {
        std::vector<double> dir(6);
        for (auto& v : dir) v = rng.normal();
        // orthogonalize against PC1, normalize
        const double c = dot(dir, pc1);
        for (std::size_t j = 0; j < 6; ++j) dir[j] -= c * pc1[j];
        const double norm = std::sqrt(dot(dir, dir));
        for (auto& v : dir) v /= norm;
        CHECK(column_variance(m, dir) <= v2 + 1e-8);
    }
}

TEST_CASE("pca loadings are orthonormal and sign-fixed") {
    RngStream rng(7, 2);
    const Matrix m = random_points(80, 9, rng);
    const Embedding2D e = pca_embed(m);
    std::vector<double> pc1(9), pc2(9);
    for (std::size_t j = 0; j < 9; ++j) {
        pc1[j] = e.loadings(j, 0);
        pc2[j] = e.loadings(j, 1);
    }
    CHECK(std::abs(dot(pc1, pc1) - 1.0) <= 1e-8);
    CHECK(std::abs(dot(pc2, pc2) - 1.0) <= 1e-8);
    CHECK(std::abs(dot(pc1, pc2)) <= 1e-8);
    for (const auto& pc : {pc1, pc2}) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < 9; ++j)
            if (std::abs(pc[j]) > std::abs(pc[arg])) arg = j;
        CHECK(pc[arg] > 0.0);
    }
}

TEST_CASE("pca is invariant to row permutation and scales with the data") {
    RngStream rng(15, 15);
    const Matrix m = random_points(30, 4, rng);
    const Embedding2D e = pca_embed(m);

    Matrix shuffled = m;
    std::vector<int> perm(30);
    for (int i = 0; i < 30; ++i) perm[i] = (i * 7 + 3) % 30;
    for (int i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 4; ++j) shuffled(i, j) = m(perm[i], j);
    const Embedding2D es = pca_embed(shuffled);
    for (int i = 0; i < 30; ++i)
        for (int c = 0; c < 2; ++c)
            CHECK(es.coords(i, c) == doctest::Approx(e.coords(perm[i], c)).epsilon(1e-9));

    Matrix scaled = m;
    for (double& v : scaled.data()) v *= 3.0;
    const Embedding2D e3 = pca_embed(scaled);
    for (std::size_t j = 0; j < 4; ++j)
        for (int c = 0; c < 2; ++c)
            CHECK(std::abs(e3.loadings(j, c) - e.loadings(j, c)) <= 1e-7);
    for (int i = 0; i < 30; ++i)
        for (int c = 0; c < 2; ++c)
            CHECK(e3.coords(i, c) == doctest::Approx(3.0 * e.coords(i, c)).epsilon(1e-7));
}

TEST_CASE("pca rejects degenerate inputs") {
    CHECK_THROWS_AS(pca_embed(Matrix(1, 3)), data_error);
    CHECK_THROWS_AS(pca_embed(Matrix(5, 1)), data_error);
    Matrix identical(6, 3);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) identical(i, j) = 2.5;
    CHECK_THROWS_AS(pca_embed(identical), data_error);
}

TEST_CASE("affinity curve constants match the frozen least-squares fit") {
    // frozen output of the documented fit procedure, computed once with an
    // independent optimizer on the same 300-point grid
    const auto [a, b] = fit_ab(0.1, 1.0);
    CHECK(a == doctest::Approx(1.5769434602697652).epsilon(1e-4));
    CHECK(b == doctest::Approx(0.8950608778515733).epsilon(1e-4));
    const auto [a2, b2] = fit_ab(0.5, 1.0);
    CHECK(a2 == doctest::Approx(0.5830300203414425).epsilon(1e-4));
    CHECK(b2 == doctest::Approx(1.3341669924314914).epsilon(1e-4));
}

TEST_CASE("neighbor embedding separates two far clusters") {
    RngStream rng(40, 1);
    const std::size_t per = 50;
    Matrix m(2 * per, 4);
    for (std::size_t i = 0; i < per; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            m(i, j) = rng.uniform(-0.5, 0.5);               // cluster A around 0
            m(per + i, j) = 100.0 + rng.uniform(-0.5, 0.5); // cluster B far away
        }
    NeighborEmbedConfig cfg;
    cfg.neighbors = 10;
    cfg.epochs = 400;
    const Embedding2D e = neighbor_embed(m, cfg, RngStream(4, 4));

    auto centroid = [&](std::size_t from) {
        std::array<double, 2> c{};
        for (std::size_t i = from; i < from + per; ++i) {
            c[0] += e.coords(i, 0) / per;
            c[1] += e.coords(i, 1) / per;
        }
        return c;
    };
    const auto ca = centroid(0), cb = centroid(per);
    double max_radius = 0.0;
    for (std::size_t i = 0; i < 2 * per; ++i) {
        const auto& c = i < per ? ca : cb;
        const double dx = e.coords(i, 0) - c[0], dy = e.coords(i, 1) - c[1];
        max_radius = std::max(max_radius, std::sqrt(dx * dx + dy * dy));
    }
    const double dx = ca[0] - cb[0], dy = ca[1] - cb[1];
    CHECK(std::sqrt(dx * dx + dy * dy) > 3.0 * max_radius);
}

TEST_CASE("neighbor embedding is deterministic and rejects k >= n") {
    RngStream rng(2, 2);
    const Matrix m = random_points(40, 3, rng);
    NeighborEmbedConfig cfg;
    cfg.neighbors = 8;
    cfg.epochs = 30;
    const Embedding2D a = neighbor_embed(m, cfg, RngStream(77, 0));
    const Embedding2D b = neighbor_embed(m, cfg, RngStream(77, 0));
    CHECK(a.coords == b.coords);

    NeighborEmbedConfig bad;
    bad.neighbors = 40;
    CHECK_THROWS_AS(neighbor_embed(m, bad, RngStream(0, 0)), data_error);
}

TEST_CASE("neighbor embedding never yields NaN, duplicates included") {
    RngStream rng(13, 3);
    for (int round = 0; round < 3; ++round) {
        Matrix m = random_points(120, 8, rng);
        // inject exact duplicates
        for (int d = 0; d < 10; ++d)
            for (std::size_t j = 0; j < 8; ++j) m(d + 20, j) = m(d, j);
        NeighborEmbedConfig cfg;
        cfg.neighbors = 12;
        cfg.epochs = 60;
        const Embedding2D e = neighbor_embed(m, cfg, RngStream(7, round));
        for (double v : e.coords.data()) CHECK(std::isfinite(v));
    }
}
