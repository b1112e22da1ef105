#include "dfecs/io/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dfecs/error.hpp"
#include "dfecs/layout.hpp"

namespace dfecs::io {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", std::abs(v) < 5e-3 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

struct Box {
    double x0 = std::numeric_limits<double>::infinity();
    double y0 = std::numeric_limits<double>::infinity();
    double x1 = -std::numeric_limits<double>::infinity();
    double y1 = -std::numeric_limits<double>::infinity();

    void add(double x, double y) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
    }
    bool empty() const { return !(x1 >= x0); }
};

/// Maps keypoint coordinates (image convention, y down) into a panel, preserving aspect ratio.
struct Viewport {
    double scale = 1, ox = 0, oy = 0;

    Viewport(const Box& box, double left, double top, double width, double height) {
        if (box.empty()) return;
        const double w = std::max(box.x1 - box.x0, 1e-9);
        const double h = std::max(box.y1 - box.y0, 1e-9);
        scale = std::min(width / w, height / h);
        ox = left + 0.5 * (width - scale * w) - scale * box.x0;
        oy = top + 0.5 * (height - scale * h) - scale * box.y0;
    }
    double x(double v) const { return ox + scale * v; }
    double y(double v) const { return oy + scale * v; }
};

Box face_box(const Eigen::MatrixXd& aus, const Points& neutral, const ValidityMask& validity, double scale) {
    Box box;
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (!validity[i]) continue;
        box.add(neutral(0, i), neutral(1, i));
        for (Eigen::Index j = 0; j < aus.cols(); ++j) {
            box.add(neutral(0, i) + scale * aus(2 * i, j), neutral(1, i) + scale * aus(2 * i + 1, j));
        }
    }
    return box;
}

std::string arrow_defs(const AuSvgOptions& o) {
    return "<defs><marker id=\"arrowhead\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" "
           "markerHeight=\"6\" orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"" +
           o.arrow_color + "\"/></marker></defs>\n";
}

void draw_panel(std::string& out, const Eigen::VectorXd& au, const Points& neutral, const ValidityMask& validity,
                const AuSvgOptions& o, const Viewport& vp) {
    std::string arrows, neutral_marks, displaced_marks;
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (!validity[i]) continue;
        const double nx = neutral(0, i), ny = neutral(1, i);
        const double dx = o.scale * au(2 * i), dy = o.scale * au(2 * i + 1);
        neutral_marks += "<circle cx=\"" + fmt(vp.x(nx)) + "\" cy=\"" + fmt(vp.y(ny)) + "\" r=\"" +
                         fmt(o.marker_radius) + "\"/>\n";
        displaced_marks += "<circle cx=\"" + fmt(vp.x(nx + dx)) + "\" cy=\"" + fmt(vp.y(ny + dy)) + "\" r=\"" +
                           fmt(o.marker_radius) + "\"/>\n";
        if (std::hypot(dx, dy) > o.arrow_threshold) {
            arrows += "<line class=\"arrow\" data-keypoint=\"" + std::to_string(i) + "\" x1=\"" + fmt(vp.x(nx)) +
                      "\" y1=\"" + fmt(vp.y(ny)) + "\" x2=\"" + fmt(vp.x(nx + dx)) + "\" y2=\"" +
                      fmt(vp.y(ny + dy)) + "\" marker-end=\"url(#arrowhead)\"/>\n";
        }
    }
    out += "<g class=\"neutral\" fill=\"" + o.neutral_color + "\">\n" + neutral_marks + "</g>\n";
    out += "<g class=\"displaced\" fill=\"" + o.displaced_color + "\">\n" + displaced_marks + "</g>\n";
    out += "<g class=\"arrows\" stroke=\"" + o.arrow_color + "\" stroke-width=\"1.2\">\n" + arrows + "</g>\n";
}

std::string svg_open(double width, double height) {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           fmt(width) + "\" height=\"" + fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string export_au_svg(const Eigen::VectorXd& au, const Points& neutral, const ValidityMask& validity,
                          const AuSvgOptions& o) {
    if (au.size() != kKpmDim) throw Error(ErrorKind::ShapeError, "AU vector must have 136 entries");
    const double title_space = o.title.empty() ? 0.0 : 20.0;
    std::string out = svg_open(o.width, o.height);
    out += arrow_defs(o);
    if (!o.title.empty()) {
        out += "<text x=\"" + fmt(o.width / 2) + "\" y=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"14\">" + escape(o.title) + "</text>\n";
    }
    const Viewport vp(face_box(au, neutral, validity, o.scale), o.margin, o.margin + title_space,
                      o.width - 2 * o.margin, o.height - 2 * o.margin - title_space);
    draw_panel(out, au, neutral, validity, o, vp);
    out += "</svg>\n";
    return out;
}

std::string export_au_svg(const Eigen::VectorXd& au, const StandardizedFrame& neutral, const AuSvgOptions& options) {
    return export_au_svg(au, neutral.coords, neutral.validity, options);
}

std::string export_au_gallery(const Eigen::MatrixXd& aus, const Points& neutral, const ValidityMask& validity,
                              const AuSvgOptions& o, int columns) {
    if (aus.rows() != kKpmDim) throw Error(ErrorKind::ShapeError, "AU matrix must have 136 rows");
    columns = std::max(1, columns);
    const Eigen::Index n = aus.cols();
    const int rows = static_cast<int>((n + columns - 1) / columns);
    const double label = 18.0;
    const double width = columns * o.width;
    const double height = std::max(1, rows) * (o.height + label);
    std::string out = svg_open(width, height);
    out += arrow_defs(o);
    const Box box = face_box(aus, neutral, validity, o.scale);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double left = static_cast<double>(j % columns) * o.width;
        const double top = static_cast<double>(j / columns) * (o.height + label);
        out += "<g class=\"panel\" data-au=\"" + std::to_string(j + 1) + "\">\n";
        out += "<text x=\"" + fmt(left + o.width / 2) + "\" y=\"" + fmt(top + 14) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
               escape(o.title.empty() ? "AU " + std::to_string(j + 1) : o.title + " " + std::to_string(j + 1)) +
               "</text>\n";
        const Viewport vp(box, left + o.margin, top + label + o.margin, o.width - 2 * o.margin,
                          o.height - 2 * o.margin);
        draw_panel(out, aus.col(j), neutral, validity, o, vp);
        out += "</g>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string render_curves_svg(const std::vector<std::pair<std::string, VarianceCurve>>& curves,
                              const PlotOptions& o) {
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const double left = 64, right = 150, top = 36, bottom = 48;
    const double pw = o.width - left - right, ph = o.height - top - bottom;

    auto tx = [&](double x) { return o.log_x ? std::log10(x) : x; };
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = 0, ymax = 100;
    for (const auto& [name, c] : curves) {
        for (std::size_t i = 0; i < c.axis_values.size(); ++i) {
            if (c.sample_counts[i] == 0 || (o.log_x && c.axis_values[i] <= 0)) continue;
            xmin = std::min(xmin, tx(c.axis_values[i]));
            xmax = std::max(xmax, tx(c.axis_values[i]));
            ymin = std::min(ymin, c.mean_ve[i]);
            ymax = std::max(ymax, c.mean_ve[i]);
        }
    }
    if (!(xmax > xmin)) {
        xmin = std::isfinite(xmin) ? xmin - 1 : 0;
        xmax = xmin + 2;
    }
    auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::string out = svg_open(o.width, o.height);
    out += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    if (!o.title.empty()) {
        out += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
               escape(o.title) + "</text>\n";
    }
    out += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double yv = ymin + (ymax - ymin) * t / 5.0;
        out += "<line x1=\"" + fmt(left - 4) + "\" y1=\"" + fmt(py(yv)) + "\" x2=\"" + fmt(left) + "\" y2=\"" +
               fmt(py(yv)) + "\" stroke=\"black\"/><text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(yv) + 4) +
               "\" text-anchor=\"end\">" + fmt(yv) + "</text>\n";
        const double xv = xmin + (xmax - xmin) * t / 5.0;
        const double xs = left + (xv - xmin) / (xmax - xmin) * pw;
        out += "<line x1=\"" + fmt(xs) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(xs) + "\" y2=\"" +
               fmt(top + ph + 4) + "\" stroke=\"black\"/><text x=\"" + fmt(xs) + "\" y=\"" + fmt(top + ph + 16) +
               "\" text-anchor=\"middle\">" + (o.log_x ? "1e" + fmt(xv) : fmt(xv)) + "</text>\n";
    }
    out += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(o.height - 10) + "\" text-anchor=\"middle\">" +
           escape(o.x_label) + "</text>\n";
    out += "<text transform=\"translate(16 " + fmt(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape(o.y_label) + "</text>\n";

    for (std::size_t s = 0; s < curves.size(); ++s) {
        const auto& [name, c] = curves[s];
        const std::string color = palette[s % 10];
        std::string points;
        for (std::size_t i = 0; i < c.axis_values.size(); ++i) {
            if (c.sample_counts[i] == 0 || (o.log_x && c.axis_values[i] <= 0)) continue;
            points += fmt(px(c.axis_values[i])) + "," + fmt(py(c.mean_ve[i])) + " ";
        }
        if (!points.empty()) points.pop_back();
        out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
        const double ly = top + 12 + 16 * static_cast<double>(s);
        out += "<line x1=\"" + fmt(left + pw + 10) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(left + pw + 30) +
               "\" y2=\"" + fmt(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/><text x=\"" +
               fmt(left + pw + 34) + "\" y=\"" + fmt(ly + 4) + "\">" + escape(name) + "</text>\n";
    }
    out += "</g>\n</svg>\n";
    return out;
}

}  // namespace dfecs::io
