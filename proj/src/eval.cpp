#include "dfecs/eval.hpp"

#include <algorithm>
#include <numeric>
#include <charconv>
#include <cmath>
#include <sstream>

#include "dfecs/error.hpp"
#include "dfecs/layout.hpp"
#include "dfecs/parallel.hpp"
#include "dfecs/solvers/positive_lasso.hpp"

namespace dfecs {

double variance_explained(const Eigen::MatrixXd& data, const Eigen::MatrixXd& approx) {
    if (data.rows() != approx.rows() || data.cols() != approx.cols()) {
        throw Error(ErrorKind::ShapeError, "VE needs matrices of the same shape");
    }
    const double total = data.squaredNorm();
    if (!(total > 0.0)) throw Error(ErrorKind::ZeroData, "VE is undefined for an all-zero matrix");
    return 100.0 * (1.0 - (data - approx).squaredNorm() / total);
}

std::string_view to_string(AuProvenance provenance) {
    switch (provenance) {
        case AuProvenance::Dfecs: return "dfecs";
        case AuProvenance::PcaExpanded: return "pca-expanded";
        case AuProvenance::ExternalFacs: return "external-facs";
        case AuProvenance::Other: return "other";
    }
    return "other";
}

AuProvenance provenance_from_string(std::string_view text) {
    if (text == "dfecs") return AuProvenance::Dfecs;
    if (text == "pca-expanded") return AuProvenance::PcaExpanded;
    if (text == "external-facs") return AuProvenance::ExternalFacs;
    return AuProvenance::Other;
}

EncodingResult encode_dataset(const Eigen::MatrixXd& data, const AuMatrix& aus, const EncodingOptions& options) {
    const Eigen::MatrixXd& u = aus.units;
    if (u.rows() != kKpmDim) throw Error(ErrorKind::ShapeError, "action-unit matrix must have 136 rows");
    if (data.rows() != u.rows()) throw Error(ErrorKind::ShapeError, "data must have 136 rows");
    detail::require_finite(u, "action-unit matrix");
    detail::require_finite(data, "data");
    if (options.alpha && !(*options.alpha >= 0.0)) throw Error(ErrorKind::ConfigError, "alpha must be nonnegative");

    const Eigen::Index m = data.cols();
    const Eigen::Index k = u.cols();
    const Eigen::MatrixXd gram = u.transpose() * u;
    const Eigen::MatrixXd correlations = u.transpose() * data;
    const double alpha = options.alpha.value_or(options.path_alpha);

    EncodingResult out;
    out.alpha = options.alpha;
    out.provenance = aus.provenance;
    out.codes = Eigen::MatrixXd::Zero(k, m);
    out.support_sizes.assign(static_cast<std::size_t>(m), 0);
    std::vector<double> violations(static_cast<std::size_t>(m), 0.0);

    if (options.alpha) {
        const GramPositiveLasso<double> solver(gram);
        parallel_for(static_cast<std::size_t>(m), options.threads, [&](std::size_t c) {
            const auto col = static_cast<Eigen::Index>(c);
            out.codes.col(col) = solver.solve(correlations.col(col), alpha);
        });
    } else {
        out.paths.resize(static_cast<std::size_t>(m));
        parallel_for(static_cast<std::size_t>(m), options.threads, [&](std::size_t c) {
            const auto col = static_cast<Eigen::Index>(c);
            out.paths[c] = positive_lasso_path_gram<double>(gram, correlations.col(col));
            out.codes.col(col) = out.paths[c].at(alpha);
        });
    }
    parallel_for(static_cast<std::size_t>(m), options.threads, [&](std::size_t c) {
        const auto col = static_cast<Eigen::Index>(c);
        out.support_sizes[c] = static_cast<int>((out.codes.col(col).array() > 0.0).count());
        violations[c] = lasso_kkt_violation(u, data.col(col), out.codes.col(col), alpha);
    });
    out.max_kkt_violation = violations.empty() ? 0.0 : *std::max_element(violations.begin(), violations.end());
    return out;
}

namespace {

VeSummary summarize(std::vector<double> values) {
    VeSummary s;
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(values.size() - 1, lo + 1);
        const double t = pos - static_cast<double>(lo);
        return values[lo] * (1.0 - t) + values[hi] * t;
    };
    s.min = values.front();
    s.q25 = quantile(0.25);
    s.median = quantile(0.5);
    s.q75 = quantile(0.75);
    s.max = values.back();
    return s;
}

// Squared residuals along one sample's path. Within segment i the residual is
// a_i - 2 t b_i + t^2 c_i for the interpolation parameter t in [0, 1].
struct PathResiduals {
    double norm2 = 0;
    std::vector<double> knot_residual;
    std::vector<double> cross;
    std::vector<double> curvature;
    std::vector<double> knot_l1;
    std::vector<Eigen::Index> knot_support;
};

PathResiduals path_residuals(const Eigen::MatrixXd& units, const Eigen::VectorXd& y, const LassoPath<double>& path) {
    PathResiduals r;
    r.norm2 = y.squaredNorm();
    const Eigen::Index n = path.num_knots();
    Eigen::MatrixXd errors(y.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        errors.col(i) = y - units * path.coefficients.col(i);
        r.knot_residual.push_back(errors.col(i).squaredNorm());
        r.knot_l1.push_back(path.coefficients.col(i).sum());
        r.knot_support.push_back(path.support_size(i));
    }
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const Eigen::VectorXd step = errors.col(i) - errors.col(i + 1);  // = U d_i
        r.cross.push_back(errors.col(i).dot(step));
        r.curvature.push_back(step.squaredNorm());
    }
    return r;
}

double sample_ve(double residual, double norm2) { return 100.0 * (1.0 - residual / norm2); }

void check_paths(const Eigen::MatrixXd& data, const Eigen::MatrixXd& units, const std::vector<LassoPath<double>>& paths) {
    if (data.rows() != units.rows()) throw Error(ErrorKind::ShapeError, "data and units row counts differ");
    if (static_cast<Eigen::Index>(paths.size()) != data.cols()) {
        throw Error(ErrorKind::ShapeError, "one solution path per data column is required");
    }
}

}  // namespace

VarianceCurve ve_curve_by_k(const Eigen::MatrixXd& data, const Eigen::MatrixXd& units,
                            const std::vector<LassoPath<double>>& paths) {
    check_paths(data, units, paths);
    const Eigen::Index num_units = units.cols();
    const auto axis_len = static_cast<std::size_t>(num_units) + 1;

    // per_sample[s][k] = best VE of sample s with at most k units.
    std::vector<std::vector<double>> per_sample;
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
        const PathResiduals r = path_residuals(units, data.col(c), paths[static_cast<std::size_t>(c)]);
        if (!(r.norm2 > 0.0)) continue;
        std::vector<double> best(axis_len, 0.0);
        for (std::size_t i = 0; i < r.knot_residual.size(); ++i) {
            const auto s = static_cast<std::size_t>(r.knot_support[i]);
            best[s] = std::max(best[s], sample_ve(r.knot_residual[i], r.norm2));
        }
        for (std::size_t k = 1; k < axis_len; ++k) best[k] = std::max(best[k], best[k - 1]);
        best[0] = 0.0;
        per_sample.push_back(std::move(best));
    }

    VarianceCurve curve;
    curve.axis = CurveAxis::NumComponents;
    for (std::size_t k = 0; k < axis_len; ++k) {
        std::vector<double> column;
        column.reserve(per_sample.size());
        for (const auto& s : per_sample) column.push_back(s[k]);
        const double mean = column.empty() ? 0.0
                                           : std::accumulate(column.begin(), column.end(), 0.0) /
                                                 static_cast<double>(column.size());
        curve.axis_values.push_back(static_cast<double>(k));
        curve.mean_ve.push_back(mean);
        curve.sample_counts.push_back(column.size());
        curve.distribution.push_back(summarize(std::move(column)));
    }
    return curve;
}

VarianceCurve ve_curve_by_l1(const Eigen::MatrixXd& data, const Eigen::MatrixXd& units,
                             const std::vector<LassoPath<double>>& paths, const std::vector<double>& budgets) {
    check_paths(data, units, paths);
    if (!std::is_sorted(budgets.begin(), budgets.end())) {
        throw Error(ErrorKind::ConfigError, "L1 budgets must be ascending");
    }
    std::vector<std::vector<double>> per_budget(budgets.size());
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
        const PathResiduals r = path_residuals(units, data.col(c), paths[static_cast<std::size_t>(c)]);
        if (!(r.norm2 > 0.0)) continue;
        const std::size_t n = r.knot_residual.size();
        std::size_t seg = 0;
        for (std::size_t b = 0; b < budgets.size(); ++b) {
            const double budget = budgets[b];
            double residual = r.norm2;
            if (budget >= r.knot_l1.back()) {
                residual = r.knot_residual.back();
            } else {
                while (seg + 1 < n && r.knot_l1[seg + 1] <= budget) ++seg;
                if (seg + 1 < n && r.knot_l1[seg] <= budget) {
                    const double span = r.knot_l1[seg + 1] - r.knot_l1[seg];
                    const double t = span > 0.0 ? (budget - r.knot_l1[seg]) / span : 0.0;
                    residual = r.knot_residual[seg] - 2.0 * t * r.cross[seg] + t * t * r.curvature[seg];
                } else {
                    residual = r.knot_residual[seg];
                }
            }
            per_budget[b].push_back(sample_ve(std::max(0.0, residual), r.norm2));
        }
    }

    VarianceCurve curve;
    curve.axis = CurveAxis::L1Norm;
    for (std::size_t b = 0; b < budgets.size(); ++b) {
        auto& column = per_budget[b];
        const double mean = column.empty() ? 0.0
                                           : std::accumulate(column.begin(), column.end(), 0.0) /
                                                 static_cast<double>(column.size());
        curve.axis_values.push_back(budgets[b]);
        curve.mean_ve.push_back(mean);
        curve.sample_counts.push_back(column.size());
        curve.distribution.push_back(summarize(std::move(column)));
    }
    return curve;
}

std::vector<double> default_l1_grid() {
    std::vector<double> grid = {0.0};
    for (int i = 0; i <= 100; ++i) grid.push_back(std::pow(10.0, -2.0 + 5.0 * i / 100.0));
    return grid;
}

namespace {

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string curve_to_delimited(const VarianceCurve& curve) {
    std::ostringstream out;
    out << (curve.axis == CurveAxis::NumComponents ? "k" : "l1") << ",mean_ve,sample_count\n";
    for (std::size_t i = 0; i < curve.axis_values.size(); ++i) {
        out << format_number(curve.axis_values[i]) << ',' << format_number(curve.mean_ve[i]) << ','
            << curve.sample_counts[i] << '\n';
    }
    return out.str();
}

InterpretabilityReport interpretability_metric(const InterpretabilityRecord& record) {
    if (record.labels.empty()) throw Error(ErrorKind::IncompleteLabels, "no units labelled");
    constexpr std::size_t kRaters = 3;
    InterpretabilityReport report;
    std::vector<int> rater_ok(kRaters, 0);
    for (std::size_t u = 0; u < record.labels.size(); ++u) {
        const auto& votes = record.labels[u];
        if (votes.size() != kRaters) {
            throw Error(ErrorKind::IncompleteLabels, "unit " + std::to_string(u + 1) + " has " +
                                                         std::to_string(votes.size()) + " labels, expected 3");
        }
        int against = 0;
        for (std::size_t r = 0; r < kRaters; ++r) {
            if (votes[r]) ++rater_ok[r];
            else ++against;
        }
        const bool interpretable = against < 2;
        report.majority_interpretable.push_back(interpretable);
        if (!interpretable) ++report.non_interpretable;
    }
    const auto k = static_cast<double>(record.labels.size());
    report.metric = (k - report.non_interpretable) / k * 100.0;
    for (int ok : rater_ok) report.per_rater.push_back(ok / k * 100.0);
    return report;
}

std::vector<AuSetCurves> compare_au_sets(const Eigen::MatrixXd& data, const std::vector<AuMatrix>& sets,
                                         const std::vector<double>& l1_budgets, int threads) {
    std::vector<AuSetCurves> out;
    for (const AuMatrix& set : sets) {
        EncodingOptions opts;
        opts.threads = threads;
        const EncodingResult enc = encode_dataset(data, set, opts);
        AuSetCurves curves;
        curves.name = set.name;
        curves.provenance = set.provenance;
        curves.num_units = set.units.cols();
        curves.by_k = ve_curve_by_k(data, set.units, enc.paths);
        curves.by_l1 = ve_curve_by_l1(data, set.units, enc.paths, l1_budgets);
        curves.max_kkt_violation = enc.max_kkt_violation;
        out.push_back(std::move(curves));
    }
    return out;
}

std::string comparison_table(const std::vector<AuSetCurves>& curves) {
    static constexpr int kColumnsAt[] = {1, 2, 4, 8, 16, 32};
    std::ostringstream out;
    out << "name,provenance,units";
    for (int k : kColumnsAt) out << ",ve_k" << k;
    out << ",ve_all,samples\n";
    for (const AuSetCurves& c : curves) {
        out << c.name << ',' << to_string(c.provenance) << ',' << c.num_units;
        for (int k : kColumnsAt) {
            const auto idx = std::min<std::size_t>(static_cast<std::size_t>(k), c.by_k.mean_ve.size() - 1);
            out << ',' << format_number(c.by_k.mean_ve[idx]);
        }
        out << ',' << format_number(c.by_k.mean_ve.back()) << ',' << c.by_k.sample_counts.back() << '\n';
    }
    return out.str();
}

}  // namespace dfecs
