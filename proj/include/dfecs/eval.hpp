#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dfecs/solvers/lasso_path.hpp"

namespace dfecs {

/// Variance explained in percent: 100 (1 - ||X - Xhat||_F^2 / ||X||_F^2). Not clamped; throws ZeroData
/// when X is all zeros.
double variance_explained(const Eigen::MatrixXd& data, const Eigen::MatrixXd& approx);

enum class AuProvenance { Dfecs, PcaExpanded, ExternalFacs, Other };

std::string_view to_string(AuProvenance provenance);
AuProvenance provenance_from_string(std::string_view text);

/// A named action-unit matrix: one 136-dimensional KPM basis vector per column.
struct AuMatrix {
    std::string name;
    Eigen::MatrixXd units;
    AuProvenance provenance = AuProvenance::Other;
};

struct EncodingOptions {
    /// Fixed-alpha encoding when set; otherwise every column gets its full solution path.
    std::optional<double> alpha;
    /// In path mode, the codes matrix holds the path evaluated at this alpha.
    double path_alpha = 0.0;
    int threads = 1;
};

/// Nonnegative encodings of a dataset against fixed action units. The alpha here weights
/// ||y - U v||^2 + alpha ||v||_1 (no 1/2 factor), unlike the part-model alpha.
struct EncodingResult {
    Eigen::MatrixXd codes;  // k x m, nonnegative
    std::vector<LassoPath<double>> paths;
    std::optional<double> alpha;
    std::vector<int> support_sizes;
    AuProvenance provenance = AuProvenance::Other;
    double max_kkt_violation = 0;
};

EncodingResult encode_dataset(const Eigen::MatrixXd& data, const AuMatrix& aus, const EncodingOptions& options = {});

enum class CurveAxis { NumComponents, L1Norm };

struct VeSummary {
    double min = 0;
    double q25 = 0;
    double median = 0;
    double q75 = 0;
    double max = 0;
};

/// Mean per-sample VE along an axis. Samples with a zero KPM have no defined VE and are left out of
/// the mean; `sample_counts` records how many entered each point.
struct VarianceCurve {
    CurveAxis axis = CurveAxis::NumComponents;
    std::vector<double> axis_values;
    std::vector<double> mean_ve;
    std::vector<std::size_t> sample_counts;
    std::vector<VeSummary> distribution;
};

/// For k = 0..num_units: each sample's best path point using k or fewer units, i.e. the knot with the
/// smallest residual among knots whose support size is at most k.
VarianceCurve ve_curve_by_k(const Eigen::MatrixXd& data, const Eigen::MatrixXd& units,
                            const std::vector<LassoPath<double>>& paths);

/// For each L1 budget: each sample's path point with the largest coefficient L1 norm not exceeding the
/// budget (interpolated inside a segment). Budgets must be ascending.
VarianceCurve ve_curve_by_l1(const Eigen::MatrixXd& data, const Eigen::MatrixXd& units,
                             const std::vector<LassoPath<double>>& paths, const std::vector<double>& budgets);

/// 0 followed by 100 log-spaced budgets from 0.01 to 1000.
std::vector<double> default_l1_grid();

/// Rows of "axis value, mean VE, sample count", preceded by a header line.
std::string curve_to_delimited(const VarianceCurve& curve);

struct InterpretabilityRecord {
    std::vector<std::string> unit_names;
    /// labels[u][r] is true when rater r marked unit u interpretable.
    std::vector<std::vector<bool>> labels;
};

struct InterpretabilityReport {
    std::vector<bool> majority_interpretable;
    int non_interpretable = 0;
    /// (k - ni) / k * 100
    double metric = 0;
    std::vector<double> per_rater;
};

/// A unit is non-interpretable when at least two of its three raters say so.
InterpretabilityReport interpretability_metric(const InterpretabilityRecord& record);

struct AuSetCurves {
    std::string name;
    AuProvenance provenance = AuProvenance::Other;
    Eigen::Index num_units = 0;
    VarianceCurve by_k;
    VarianceCurve by_l1;
    double max_kkt_violation = 0;
};

std::vector<AuSetCurves> compare_au_sets(const Eigen::MatrixXd& data, const std::vector<AuMatrix>& sets,
                                         const std::vector<double>& l1_budgets, int threads = 1);

/// Tab-free comparison table: one row per set with VE at selected k and the asymptotic value.
std::string comparison_table(const std::vector<AuSetCurves>& curves);

}  // namespace dfecs
