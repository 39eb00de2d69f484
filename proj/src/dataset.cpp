#include "shapcluster/dataset.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "shapcluster/errors.hpp"

namespace shapcluster {

void Dataset::validate() const {
    for (std::size_t i = 0; i < features.rows(); ++i)
        for (std::size_t j = 0; j < features.cols(); ++j)
            if (!std::isfinite(features(i, j)))
                throw data_error("non-finite feature value at row " + std::to_string(i) +
                                 ", column " + std::to_string(j));
    if (feature_names.size() != features.cols())
        throw data_error("feature_names size does not match column count");
    std::set<std::string> uniq(feature_names.begin(), feature_names.end());
    if (uniq.size() != feature_names.size())
        throw data_error("duplicate feature names");
    if (labels) {
        if (labels->size() != features.rows())
            throw data_error("label count does not match row count");
        const int k = static_cast<int>(class_names.size());
        for (int y : *labels)
            if (y < 0 || y >= k)
                throw data_error("label " + std::to_string(y) + " outside {0.." +
                                 std::to_string(k - 1) + "}");
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

bool parse_double(const std::string& cell, double& out) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !cell.empty();
}

bool parse_int(const std::string& cell, long& out) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !cell.empty();
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace

std::string format_double(double v) {
    // %.17g always round-trips IEEE doubles; prefer the shorter %.15g / %.16g
    // form when it already parses back exactly.
    char buf[40];
    for (int prec : {15, 16, 17}) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        if (parse_double(buf, back) && back == v) return buf;
    }
    return buf;
}

Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<std::string>& label_column) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw data_error("empty file: " + path.string());
    const std::vector<std::string> header = split_line(strip_cr(line));

    std::size_t label_idx = header.size();
    if (label_column) {
        const auto it = std::find(header.begin(), header.end(), *label_column);
        if (it == header.end())
            throw data_error("label column '" + *label_column + "' not found in header");
        label_idx = static_cast<std::size_t>(it - header.begin());
    }

    Dataset d;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (j != label_idx) d.feature_names.push_back(header[j]);

    std::vector<double> values;
    std::vector<std::string> raw_labels;
    std::size_t rows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty() && in.peek() == EOF) break; // trailing newline
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw data_error("ragged row at line " + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (j == label_idx) {
                raw_labels.push_back(cells[j]);
                continue;
            }
            double v = 0.0;
            if (!parse_double(cells[j], v))
                throw data_error("non-numeric cell '" + cells[j] + "' at line " +
                                 std::to_string(lineno) + ", column '" + header[j] + "'");
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw data_error("empty dataset: " + path.string());

    const std::size_t p = d.feature_names.size();
    d.features = Matrix(rows, p);
    std::copy(values.begin(), values.end(), d.features.data().begin());

    if (label_column) {
        // Integer labels are taken literally; anything else is treated as a
        // class name and indexed in first-appearance order.
        bool all_int = true;
        long max_label = -1;
        std::vector<long> as_int(raw_labels.size());
        for (std::size_t i = 0; i < raw_labels.size(); ++i) {
            if (!parse_int(raw_labels[i], as_int[i])) {
                all_int = false;
                break;
            }
            max_label = std::max(max_label, as_int[i]);
        }
        std::vector<int> labels(rows);
        if (all_int) {
            for (long v : as_int)
                if (v < 0) throw data_error("negative integer label " + std::to_string(v));
            for (std::size_t i = 0; i < rows; ++i) labels[i] = static_cast<int>(as_int[i]);
            for (long c = 0; c <= max_label; ++c)
                d.class_names.push_back(std::to_string(c));
        } else {
            std::unordered_map<std::string, int> index;
            for (std::size_t i = 0; i < rows; ++i) {
                auto [it, inserted] =
                    index.emplace(raw_labels[i], static_cast<int>(d.class_names.size()));
                if (inserted) d.class_names.push_back(raw_labels[i]);
                labels[i] = it->second;
            }
        }
        d.labels = std::move(labels);
    }
    d.validate();
    return d;
}

void save_csv(const Dataset& d, const std::filesystem::path& path,
              const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path.string());
    for (std::size_t j = 0; j < d.feature_names.size(); ++j) {
        if (j) out << ',';
        out << d.feature_names[j];
    }
    if (d.labels) out << (d.feature_names.empty() ? "" : ",") << label_column;
    out << '\n';
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t j = 0; j < d.p(); ++j) {
            if (j) out << ',';
            out << format_double(d.features(i, j));
        }
        if (d.labels) {
            if (d.p()) out << ',';
            out << d.class_names[(*d.labels)[i]];
        }
        out << '\n';
    }
    if (!out) throw data_error("write failed: " + path.string());
}

Matrix load_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header) {
    Dataset d = load_csv(path);
    if (header) *header = d.feature_names;
    return std::move(d.features);
}

void save_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file: " + path.string());
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out << ',';
        out << header[j];
    }
    out << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw data_error("write failed: " + path.string());
}

Dataset minmax_scale(const Dataset& d) {
    Dataset out = d;
    if (d.n() == 0) return out;
    for (std::size_t j = 0; j < d.p(); ++j) {
        double lo = d.features(0, j), hi = d.features(0, j);
        for (std::size_t i = 1; i < d.n(); ++i) {
            lo = std::min(lo, d.features(i, j));
            hi = std::max(hi, d.features(i, j));
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < d.n(); ++i)
            out.features(i, j) = range == 0.0 ? 0.0 : (d.features(i, j) - lo) / range;
    }
    return out;
}

FoldAssignment make_folds(std::size_t n, int l, RngStream rng) {
    if (l < 2) throw data_error("fold count must be at least 2, got " + std::to_string(l));
    if (static_cast<std::size_t>(l) > n)
        throw data_error("fold count " + std::to_string(l) + " exceeds sample count " +
                         std::to_string(n));
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    rng.shuffle(std::span<int>(order));
    FoldAssignment f;
    f.l = l;
    f.fold_of.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos)
        f.fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(l));
    return f;
}

} // namespace shapcluster
