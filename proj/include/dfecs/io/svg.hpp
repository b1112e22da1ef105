#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dfecs/eval.hpp"
#include "dfecs/geometry.hpp"

namespace dfecs::io {

struct AuSvgOptions {
    /// Displacement multiplier applied to the AU before drawing.
    double scale = 1.0;
    /// Arrows are drawn only where |scale * displacement| exceeds this, in standardized units.
    double arrow_threshold = 1e-6;
    double width = 400;
    double height = 400;
    double margin = 20;
    double marker_radius = 2.5;
    std::string title;
    std::string neutral_color = "#d62728";
    std::string displaced_color = "#2ca02c";
    std::string arrow_color = "#1f77b4";
};

/// Neutral keypoints as one marker color, neutral + scale * au as another, arrows between pairs that
/// move more than the threshold. Invalid neutral keypoints are not drawn. Output depends only on inputs.
std::string export_au_svg(const Eigen::VectorXd& au, const Points& neutral, const ValidityMask& validity,
                          const AuSvgOptions& options = {});
std::string export_au_svg(const Eigen::VectorXd& au, const StandardizedFrame& neutral, const AuSvgOptions& options = {});

/// All AUs in a grid of panels, `columns` per row, sharing one coordinate frame.
std::string export_au_gallery(const Eigen::MatrixXd& aus, const Points& neutral, const ValidityMask& validity,
                              const AuSvgOptions& options = {}, int columns = 4);

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label = "mean VE (%)";
    bool log_x = false;
    double width = 640;
    double height = 420;
};

/// Line plot of one or more curves (name, curve). Points with no samples are skipped; on a log axis
/// nonpositive x values are skipped.
std::string render_curves_svg(const std::vector<std::pair<std::string, VarianceCurve>>& curves,
                              const PlotOptions& options = {});

}  // namespace dfecs::io
