#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shapcluster/matrix.hpp"
#include "shapcluster/rng.hpp"

namespace shapcluster {

// Labeled (or unlabeled) feature table. Immutable by convention once built;
// all downstream modules share it by const reference.
struct Dataset {
    Matrix features;                        // n x p
    std::optional<std::vector<int>> labels; // n entries in {0..k-1} when present
    std::vector<std::string> feature_names; // p entries, unique
    std::vector<std::string> class_names;   // k entries when labels present

    std::size_t n() const { return features.rows(); }
    std::size_t p() const { return features.cols(); }
    std::size_t k() const { return class_names.size(); }

    // Throws data_error if any declared invariant is violated.
    void validate() const;
};

// CSV contract: UTF-8, comma separated, one header row, '.' decimal separator,
// no quoting. The label column may hold integers or class-name strings; names
// are assigned class indices in first-appearance order.
Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<std::string>& label_column = std::nullopt);

// Writes features (and the label column, when present) back out. Numeric cells
// are printed with enough digits to round-trip bit-for-bit.
void save_csv(const Dataset& d, const std::filesystem::path& path,
              const std::string& label_column = "label");

// Helpers for plain numeric matrices (coords, SHAP values, ...).
Matrix load_matrix_csv(const std::filesystem::path& path,
                       std::vector<std::string>* header = nullptr);
void save_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                     const std::filesystem::path& path);

// Per-column (x - min) / (max - min); constant columns map to all zeros.
Dataset minmax_scale(const Dataset& d);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

struct FoldAssignment {
    std::vector<int> fold_of; // n entries in {0..l-1}
    int l = 0;
};

// Uniformly random balanced partition: fold sizes differ by at most one.
FoldAssignment make_folds(std::size_t n, int l, RngStream rng);

} // namespace shapcluster
