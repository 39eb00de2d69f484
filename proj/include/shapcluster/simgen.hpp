#pragma once

#include <array>
#include <span>

#include "shapcluster/dataset.hpp"
#include "shapcluster/rng.hpp"

namespace shapcluster {

// Three-class multinomial logistic response on ten uniform inputs. The scores
// share a 4*x0*x1 interaction; the main effects of x0 and x1 enter with +4 in
// the first score and -4 in the second, so the class argmax is driven by the
// sign pattern of the first two features. The remaining eight features carry
// standard-normal coefficients drawn once per experiment.
struct ResponseModel {
    std::array<double, 8> beta1{}; // coefficients of features 2..9 in score 1
    std::array<double, 8> beta2{}; // coefficients of features 2..9 in score 2

    static ResponseModel draw(RngStream rng);
};

// n x 10 matrix of i.i.d. Unif([-5, 5]) entries, feature names "Feature 0".."Feature 9".
Dataset sample_inputs(std::size_t n, RngStream rng);

// Stable softmax-style probabilities (p1, p2, p3) for one input row.
std::array<double, 3> class_probabilities(std::span<const double> x, const ResponseModel& m);

// One multinomial draw per row by inverse CDF in class order; rows must sum to
// 1 within 1e-9.
std::vector<int> sample_labels(const Matrix& probs, RngStream rng);

// Full experiment: inputs, a fresh beta draw, labels; class names "Class 0..2".
struct Simulation {
    Dataset data;
    ResponseModel model;
};
Simulation simulate(std::size_t n, std::uint64_t seed);

// Synthetic cohort-style smoke dataset: three latent groups with class-shifted
// means on a subset of columns, everything min-max scaled to [0, 1] and
// labeled with class-name strings. Exercises the CSV ingestion path at a
// clinical-table shape (defaults 2422 x 39).
Dataset make_smoke_cohort(std::size_t n, std::size_t p, std::uint64_t seed);

} // namespace shapcluster
