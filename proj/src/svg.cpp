#include "shapcluster/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "shapcluster/errors.hpp"

namespace shapcluster {

namespace {

std::string fnum(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string flabel(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

// 1-2-5 tick spacing over [lo, hi]
std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * mult >= raw) {
            step = mag * mult;
            break;
        }
    }
    std::vector<double> ticks;
    double t = std::ceil(lo / step) * step;
    while (t <= hi + 1e-9 * step) {
        ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
        t += step;
    }
    return ticks;
}

struct Range {
    double lo = 0.0, hi = 1.0;
    void expand(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad(double frac) {
        const double span = hi - lo;
        if (span <= 0.0) {
            lo -= 0.5;
            hi += 0.5;
        } else {
            lo -= frac * span;
            hi += frac * span;
        }
    }
};

Range data_range(std::span<const double> values) {
    Range r;
    if (values.empty()) return r;
    r.lo = r.hi = values[0];
    for (double v : values) r.expand(v);
    return r;
}

// Plot area with margins and linear data->pixel mapping.
struct Frame {
    double left = 60, top = 40, right = 780, bottom = 540;
    Range x, y;

    double px(double v) const { return left + (v - x.lo) / (x.hi - x.lo) * (right - left); }
    double py(double v) const { return bottom - (v - y.lo) / (y.hi - y.lo) * (bottom - top); }

    void draw(SvgDocument& doc, const std::string& title) const {
        doc.rect(left, top, right - left, bottom - top, "none", "#444444", 1.0);
        for (double t : nice_ticks(x.lo, x.hi)) {
            const double xx = px(t);
            doc.line(xx, bottom, xx, bottom + 5, "#444444");
            doc.text(xx, bottom + 18, flabel(t), 10, "middle");
        }
        for (double t : nice_ticks(y.lo, y.hi)) {
            const double yy = py(t);
            doc.line(left - 5, yy, left, yy, "#444444");
            doc.text(left - 8, yy + 3, flabel(t), 10, "end");
        }
        if (!title.empty()) doc.text((left + right) / 2, top - 14, title, 14, "middle", "#111111", true);
    }
};

void legend_box(SvgDocument& doc, std::span<const std::pair<std::string, std::string>> entries,
                double x, double y) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double yy = y + 16.0 * static_cast<double>(i);
        doc.rect(x, yy - 8, 10, 10, entries[i].second);
        doc.text(x + 14, yy, entries[i].first, 10);
    }
}

} // namespace

SvgDocument::SvgDocument(double width, double height) : width_(width), height_(height) {}

void SvgDocument::rect(double x, double y, double w, double h, const std::string& fill,
                       const std::string& stroke, double stroke_width, double opacity) {
    body_ += "<rect x=\"" + fnum(x) + "\" y=\"" + fnum(y) + "\" width=\"" + fnum(w) +
             "\" height=\"" + fnum(h) + "\" fill=\"" + fill + "\"";
    if (stroke != "none")
        body_ += " stroke=\"" + stroke + "\" stroke-width=\"" + fnum(stroke_width) + "\"";
    if (opacity != 1.0) body_ += " fill-opacity=\"" + fnum(opacity) + "\"";
    body_ += "/>\n";
}

void SvgDocument::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                       double width, const std::string& dash) {
    body_ += "<line x1=\"" + fnum(x1) + "\" y1=\"" + fnum(y1) + "\" x2=\"" + fnum(x2) +
             "\" y2=\"" + fnum(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
             fnum(width) + "\"";
    if (!dash.empty()) body_ += " stroke-dasharray=\"" + dash + "\"";
    body_ += "/>\n";
}

void SvgDocument::circle(double cx, double cy, double r, const std::string& fill,
                         double opacity) {
    body_ += "<circle cx=\"" + fnum(cx) + "\" cy=\"" + fnum(cy) + "\" r=\"" + fnum(r) +
             "\" fill=\"" + fill + "\"";
    if (opacity != 1.0) body_ += " fill-opacity=\"" + fnum(opacity) + "\"";
    body_ += "/>\n";
}

void SvgDocument::polyline(std::span<const std::pair<double, double>> pts,
                           const std::string& stroke, double width) {
    body_ += "<polyline points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) body_ += ' ';
        body_ += fnum(pts[i].first) + "," + fnum(pts[i].second);
    }
    body_ += "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + fnum(width) +
             "\"/>\n";
}

void SvgDocument::text(double x, double y, const std::string& s, double size,
                       const std::string& anchor, const std::string& fill, bool bold) {
    body_ += "<text x=\"" + fnum(x) + "\" y=\"" + fnum(y) + "\" font-size=\"" + fnum(size) +
             "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\" fill=\"" + fill +
             "\"";
    if (bold) body_ += " font-weight=\"bold\"";
    body_ += ">" + escape(s) + "</text>\n";
}

std::string SvgDocument::str() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
           "version=\"1.1\" width=\"" +
           fnum(width_) + "\" height=\"" + fnum(height_) + "\" viewBox=\"0 0 " + fnum(width_) +
           " " + fnum(height_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n" +
           body_ + "</svg>\n";
}

void SvgDocument::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path.string());
    out << str();
    if (!out) throw data_error("write failed: " + path.string());
}

const std::string& palette_color(int index) {
    static const std::vector<std::string> palette = {
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
        "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return palette[static_cast<std::size_t>(index) % palette.size()];
}

std::vector<double> cumulative_levels(double base, std::span<const double> deltas) {
    std::vector<double> levels{base};
    for (double d : deltas) levels.push_back(levels.back() + d);
    return levels;
}

void render_scatter_svg(const Matrix& coords, std::span<const int> color_ids,
                        std::span<const std::string> legend_names, const std::string& title,
                        const std::filesystem::path& out) {
    SvgDocument doc(800, 600);
    Frame frame;
    if (coords.rows() > 0) {
        frame.x.lo = frame.x.hi = coords(0, 0);
        frame.y.lo = frame.y.hi = coords(0, 1);
        for (std::size_t i = 0; i < coords.rows(); ++i) {
            frame.x.expand(coords(i, 0));
            frame.y.expand(coords(i, 1));
        }
    }
    frame.x.pad(0.05);
    frame.y.pad(0.05);
    frame.draw(doc, title);
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        const int id = i < color_ids.size() ? color_ids[i] : 0;
        const std::string& color = id < 0 ? kNoiseColor : palette_color(id);
        doc.circle(frame.px(coords(i, 0)), frame.py(coords(i, 1)), 3.0, color, 0.75);
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (std::size_t i = 0; i < legend_names.size(); ++i)
        entries.emplace_back(legend_names[i], palette_color(static_cast<int>(i)));
    bool has_noise = false;
    for (int id : color_ids) has_noise |= id < 0;
    if (has_noise) entries.emplace_back("noise", kNoiseColor);
    legend_box(doc, entries, frame.right - 120, frame.top + 14);
    doc.write(out);
}

void render_bars_svg(const Matrix& values, std::span<const std::string> feature_names,
                     std::span<const std::string> class_names, const std::string& title,
                     const std::filesystem::path& out) {
    const std::size_t p = values.rows(), k = values.cols();
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> totals(p, 0.0);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t c = 0; c < k; ++c) totals[i] += values(i, c);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return totals[a] != totals[b] ? totals[a] > totals[b] : a < b;
    });

    const double height = std::max(240.0, 90.0 + 22.0 * static_cast<double>(p));
    SvgDocument doc(800, height);
    const double left = 150, right = 640, top = 50, row_h = 22.0;
    const double max_total = p ? std::max(1e-300, *std::max_element(totals.begin(), totals.end())) : 1.0;
    doc.text((left + right) / 2, top - 20, title, 14, "middle", "#111111", true);
    for (std::size_t rank = 0; rank < p; ++rank) {
        const std::size_t i = order[rank];
        const double y = top + row_h * static_cast<double>(rank);
        doc.text(left - 8, y + 13, feature_names[i], 10, "end");
        double x = left;
        for (std::size_t c = 0; c < k; ++c) {
            const double w = values(i, c) / max_total * (right - left);
            if (w > 0.0) doc.rect(x, y + 3, w, row_h - 7, palette_color(static_cast<int>(c)));
            x += w;
        }
        doc.text(x + 5, y + 13, flabel(totals[i]), 9);
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (std::size_t c = 0; c < k; ++c)
        entries.emplace_back(class_names[c], palette_color(static_cast<int>(c)));
    legend_box(doc, entries, 660, top + 14);
    doc.write(out);
}

namespace {

// diverging blue -> white -> red
std::string diverging_color(double v, double lo, double hi) {
    double t;
    if (lo < 0.0 && hi > 0.0) {
        const double m = std::max(-lo, hi);
        t = (v / m + 1.0) / 2.0;
    } else {
        t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    }
    t = std::clamp(t, 0.0, 1.0);
    auto lerp = [](int a, int b, double f) { return static_cast<int>(std::lround(a + (b - a) * f)); };
    int r, g, b;
    if (t < 0.5) {
        const double f = t * 2.0;
        r = lerp(0x31, 0xf7, f);
        g = lerp(0x69, 0xf7, f);
        b = lerp(0xb1, 0xf7, f);
    } else {
        const double f = (t - 0.5) * 2.0;
        r = lerp(0xf7, 0xb2, f);
        g = lerp(0xf7, 0x18, f);
        b = lerp(0xf7, 0x2e, f);
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace

void render_heatmap_svg(const Matrix& data, std::span<const std::string> row_names,
                        std::span<const std::string> col_names, const std::string& title,
                        const std::filesystem::path& out) {
    const std::size_t rows = data.rows(), cols = data.cols();
    const double cell_w = std::min(60.0, 640.0 / std::max<std::size_t>(1, cols));
    const double cell_h = 28.0;
    const double left = 110, top = 60;
    const double width = std::max(800.0, left + cell_w * cols + 60.0);
    const double height = top + cell_h * rows + 90.0;
    SvgDocument doc(width, height);
    const Range r = data_range(data.data());
    doc.text(left + cell_w * cols / 2, top - 24, title, 14, "middle", "#111111", true);
    for (std::size_t i = 0; i < rows; ++i) {
        doc.text(left - 8, top + cell_h * i + cell_h / 2 + 4, row_names[i], 10, "end");
        for (std::size_t j = 0; j < cols; ++j) {
            doc.rect(left + cell_w * j, top + cell_h * i, cell_w, cell_h,
                     diverging_color(data(i, j), r.lo, r.hi), "#ffffff", 0.5);
        }
    }
    for (std::size_t j = 0; j < cols; ++j)
        doc.text(left + cell_w * j + cell_w / 2, top + cell_h * rows + 14, col_names[j], 9,
                 "middle");
    // color scale
    const double bar_y = top + cell_h * rows + 34;
    for (int s = 0; s < 100; ++s) {
        const double v = r.lo + (r.hi - r.lo) * s / 99.0;
        doc.rect(left + 2.0 * s, bar_y, 2.0, 12, diverging_color(v, r.lo, r.hi));
    }
    doc.text(left, bar_y + 26, flabel(r.lo), 9, "middle");
    doc.text(left + 200, bar_y + 26, flabel(r.hi), 9, "middle");
    doc.write(out);
}

void render_classic_waterfall_svg(double base, std::span<const double> deltas,
                                  std::span<const std::string> names,
                                  const std::string& title,
                                  const std::filesystem::path& out) {
    const std::vector<double> levels = cumulative_levels(base, deltas);
    SvgDocument doc(800, 600);
    Frame frame;
    frame.x = {-0.6, static_cast<double>(deltas.size()) + 0.6};
    frame.y = data_range(levels);
    frame.y.pad(0.15);
    frame.draw(doc, title);

    // anchor line at the base value
    doc.line(frame.left, frame.py(base), frame.right, frame.py(base), "#aaaaaa", 1.0, "4,3");
    doc.text(frame.right - 4, frame.py(base) - 4, "base " + flabel(base), 9, "end", "#777777");
    const double slot = (frame.right - frame.left) / (static_cast<double>(deltas.size()) + 1.2);
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        const double x0 = frame.px(static_cast<double>(j)) - slot * 0.35;
        const double y_from = frame.py(levels[j]);
        const double y_to = frame.py(levels[j + 1]);
        const std::string color = deltas[j] >= 0.0 ? "#d62728" : "#1f77b4";
        doc.rect(x0, std::min(y_from, y_to), slot * 0.7, std::max(1.0, std::abs(y_to - y_from)),
                 color);
        if (j + 1 < deltas.size())
            doc.line(x0 + slot * 0.7, y_to, frame.px(static_cast<double>(j + 1)) - slot * 0.35,
                     y_to, "#888888", 0.8, "3,2");
        doc.text(frame.px(static_cast<double>(j)), frame.bottom + 32,
                 j < names.size() ? names[j] : "", 9, "middle");
        doc.text(x0 + slot * 0.35, std::min(y_from, y_to) - 4, flabel(deltas[j]), 9, "middle",
                 "#555555");
    }
    // final tick marks the resulting prediction
    const double yf = frame.py(levels.back());
    doc.line(frame.left, yf, frame.right, yf, "#d62728", 1.0, "6,3");
    doc.text(frame.right - 4, yf - 4, "f(x) = " + flabel(levels.back()), 9, "end", "#d62728");
    doc.write(out);
}

void render_paths_svg(std::span<const ProjectedPath> paths, const std::string& title,
                      const std::filesystem::path& out,
                      std::span<const std::string> class_names) {
    SvgDocument doc(800, 600);
    Frame frame;
    bool first = true;
    for (const ProjectedPath& p : paths)
        for (const auto& v : p.vertices2d) {
            if (first) {
                frame.x.lo = frame.x.hi = v[0];
                frame.y.lo = frame.y.hi = v[1];
                first = false;
            }
            frame.x.expand(v[0]);
            frame.y.expand(v[1]);
        }
    frame.x.pad(0.1);
    frame.y.pad(0.1);
    frame.draw(doc, title);

    const double span_x = frame.x.hi - frame.x.lo, span_y = frame.y.hi - frame.y.lo;

    // biplot class axes (present for PCA projections)
    if (!paths.empty() && paths[0].loadings.rows() > 0) {
        const Matrix& loadings = paths[0].loadings;
        const double scale = 0.25 * std::min(span_x, span_y);
        for (std::size_t c = 0; c < loadings.rows(); ++c) {
            const double ax = loadings(c, 0) * scale, ay = loadings(c, 1) * scale;
            doc.line(frame.px(0), frame.py(0), frame.px(ax), frame.py(ay), "#bbbbbb", 1.2);
            const std::string label =
                c < class_names.size() ? class_names[c] : "axis " + std::to_string(c);
            doc.text(frame.px(ax), frame.py(ay) - 4, label, 9, "middle", "#888888");
        }
    }

    for (std::size_t pi = 0; pi < paths.size(); ++pi) {
        const ProjectedPath& p = paths[pi];
        const std::string& color = palette_color(static_cast<int>(pi));
        std::vector<std::pair<double, double>> pts;
        for (const auto& v : p.vertices2d) pts.emplace_back(frame.px(v[0]), frame.py(v[1]));
        doc.polyline(pts, color, 2.0);
        for (std::size_t j = 0; j < pts.size(); ++j)
            doc.circle(pts[j].first, pts[j].second, j == 0 ? 4.0 : 2.5, color);
        // label segments that are long enough to read
        for (std::size_t j = 0; j + 1 < p.vertices2d.size() && j < p.segments.size(); ++j) {
            const double dx = p.vertices2d[j + 1][0] - p.vertices2d[j][0];
            const double dy = p.vertices2d[j + 1][1] - p.vertices2d[j][1];
            if (std::abs(dx) / span_x + std::abs(dy) / span_y < 0.08) continue;
            doc.text((pts[j].first + pts[j + 1].first) / 2,
                     (pts[j].second + pts[j + 1].second) / 2 - 3, p.segments[j].feature, 8,
                     "middle", "#555555");
        }
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (std::size_t pi = 0; pi < paths.size(); ++pi)
        entries.emplace_back(paths[pi].tag, palette_color(static_cast<int>(pi)));
    legend_box(doc, entries, frame.right - 120, frame.top + 14);
    if (!paths.empty())
        doc.text(frame.left + 8, frame.bottom - 8,
                 paths[0].axis_labels[0] + " vs " + paths[0].axis_labels[1], 10, "start",
                 "#777777");
    doc.write(out);
}

} // namespace shapcluster
