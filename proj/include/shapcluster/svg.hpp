#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shapcluster/matrix.hpp"
#include "shapcluster/waterfall.hpp"

namespace shapcluster {

// Minimal SVG 1.1 writer. All coordinates are printed with fixed precision so
// identical inputs produce byte-identical documents.
class SvgDocument {
public:
    SvgDocument(double width, double height);

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "none", double stroke_width = 1.0,
              double opacity = 1.0);
    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0, const std::string& dash = "");
    void circle(double cx, double cy, double r, const std::string& fill,
                double opacity = 1.0);
    void polyline(std::span<const std::pair<double, double>> pts, const std::string& stroke,
                  double width = 1.5);
    // anchor: start | middle | end
    void text(double x, double y, const std::string& s, double size = 11.0,
              const std::string& anchor = "start", const std::string& fill = "#333333",
              bool bold = false);

    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    double width_, height_;
    std::string body_;
};

// Fixed 10-color palette used for cluster / class coloring everywhere.
const std::string& palette_color(int index); // index >= 0; -1 handled by callers as noise
inline constexpr const char* kNoiseColor = "#999999";

// Cumulative bar levels of a classic waterfall: levels[0] = base,
// levels[j] = levels[j-1] + deltas[j-1].
std::vector<double> cumulative_levels(double base, std::span<const double> deltas);

// Scatter of 2D points colored by integer id (-1 = noise, gray). Renders a
// frame with ticks even when there are no points.
void render_scatter_svg(const Matrix& coords, std::span<const int> color_ids,
                        std::span<const std::string> legend_names, const std::string& title,
                        const std::filesystem::path& out);

// Horizontal stacked bars of per-feature, per-class magnitudes, sorted by
// total, largest on top.
void render_bars_svg(const Matrix& values, std::span<const std::string> feature_names,
                     std::span<const std::string> class_names, const std::string& title,
                     const std::filesystem::path& out);

void render_heatmap_svg(const Matrix& data, std::span<const std::string> row_names,
                        std::span<const std::string> col_names, const std::string& title,
                        const std::filesystem::path& out);

// Classic one-dimensional waterfall: each bar starts at the end of the
// previous one; a final tick marks the resulting prediction.
void render_classic_waterfall_svg(double base, std::span<const double> deltas,
                                  std::span<const std::string> names,
                                  const std::string& title,
                                  const std::filesystem::path& out);

// Projected k-dimensional waterfall paths, one polyline per path, with
// class-axis biplot arrows when loadings are present. class_names label the
// biplot arrows when given.
void render_paths_svg(std::span<const ProjectedPath> paths, const std::string& title,
                      const std::filesystem::path& out,
                      std::span<const std::string> class_names = {});

} // namespace shapcluster
