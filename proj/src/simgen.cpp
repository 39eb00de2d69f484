#include "shapcluster/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "shapcluster/errors.hpp"

namespace shapcluster {

ResponseModel ResponseModel::draw(RngStream rng) {
    ResponseModel m;
    for (double& b : m.beta1) b = rng.normal();
    for (double& b : m.beta2) b = rng.normal();
    return m;
}

Dataset sample_inputs(std::size_t n, RngStream rng) {
    if (n == 0) throw data_error("sample_inputs: n must be at least 1");
    Dataset d;
    d.features = Matrix(n, 10);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 10; ++j)
            d.features(i, j) = rng.uniform(-5.0, 5.0);
    for (int j = 0; j < 10; ++j) d.feature_names.push_back("Feature " + std::to_string(j));
    return d;
}

std::array<double, 3> class_probabilities(std::span<const double> x, const ResponseModel& m) {
    double f1 = 4.0 * x[0] * x[1] + 4.0 * x[0] + 4.0 * x[1];
    double f2 = 4.0 * x[0] * x[1] - 4.0 * x[0] - 4.0 * x[1];
    for (std::size_t i = 2; i < 10; ++i) {
        f1 += m.beta1[i - 2] * x[i];
        f2 += m.beta2[i - 2] * x[i];
    }
    // Scores reach +-180 at the corners of the input hyperrectangle; shift by
    // the max so no exponential overflows.
    const double shift = std::max({0.0, f1, f2});
    const double e0 = std::exp(-shift);
    const double e1 = std::exp(f1 - shift);
    const double e2 = std::exp(f2 - shift);
    const double z = e0 + e1 + e2;
    return {e1 / z, e2 / z, e0 / z};
}

std::vector<int> sample_labels(const Matrix& probs, RngStream rng) {
    const std::size_t k = probs.cols();
    std::vector<int> labels(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) sum += probs(i, c);
        if (std::abs(sum - 1.0) > 1e-9)
            throw data_error("sample_labels: row " + std::to_string(i) + " sums to " +
                             std::to_string(sum));
        const double u = rng.uniform();
        double cdf = 0.0;
        int label = static_cast<int>(k) - 1;
        for (std::size_t c = 0; c < k; ++c) {
            cdf += probs(i, c);
            if (u < cdf) {
                label = static_cast<int>(c);
                break;
            }
        }
        labels[i] = label;
    }
    return labels;
}

Dataset make_smoke_cohort(std::size_t n, std::size_t p, std::uint64_t seed) {
    RngStream rng(seed, streams::smoke_data);
    const std::size_t k = 3;
    const std::size_t informative = std::min<std::size_t>(12, p);

    // class prototypes on the informative columns, shared means elsewhere
    Matrix proto(k, p);
    for (std::size_t j = 0; j < p; ++j) {
        const double shared = rng.uniform();
        for (std::size_t c = 0; c < k; ++c)
            proto(c, j) = j < informative ? rng.uniform() : shared;
    }

    Dataset d;
    d.features = Matrix(n, p);
    std::vector<int> labels(n);
    const double cut1 = 0.40, cut2 = 0.80; // class proportions 0.40 / 0.40 / 0.20
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        labels[i] = u < cut1 ? 0 : (u < cut2 ? 1 : 2);
        for (std::size_t j = 0; j < p; ++j)
            d.features(i, j) = proto(labels[i], j) + 0.18 * rng.normal();
    }
    d.labels = std::move(labels);
    for (std::size_t j = 0; j < p; ++j) {
        char name[32];
        std::snprintf(name, sizeof name, "Var%02zu", j + 1);
        d.feature_names.push_back(name);
    }
    d.class_names = {"Group A", "Group B", "Group C"};
    return minmax_scale(d);
}

Simulation simulate(std::size_t n, std::uint64_t seed) {
    Simulation sim;
    sim.data = sample_inputs(n, RngStream(seed, streams::sim_inputs));
    sim.model = ResponseModel::draw(RngStream(seed, streams::sim_beta));
    Matrix probs(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = class_probabilities(sim.data.features.row(i), sim.model);
        std::copy(p.begin(), p.end(), probs.row(i).begin());
    }
    sim.data.labels = sample_labels(probs, RngStream(seed, streams::sim_labels));
    sim.data.class_names = {"Class 0", "Class 1", "Class 2"};
    return sim;
}

} // namespace shapcluster
