#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dfecs/geometry.hpp"
#include "dfecs/layout.hpp"
#include "dfecs/solvers.hpp"

namespace dfecs {

/// Hyperparameter grids. Empty rank lists mean the full range (1..p for parts, 1..k for the hierarchy).
struct GridSpec {
    std::vector<int> part_ranks;
    std::vector<double> alphas;
    std::vector<int> hier_ranks;
    std::vector<double> alphas_basis;
    std::vector<double> alphas_encoding;

    /// alpha from 5 down to 0.5 in steps of 0.5 on every axis.
    static GridSpec defaults();
    /// Default grid extended with 0.1, 1.15, 2.1 and 2.5 so the published final hyperparameters are reachable.
    static GridSpec paper_si();

    void validate() const;
};

struct FitOptions {
    SolverConfig solver;
    int threads = 1;
    /// Skip ranks whose best unconstrained rank-r approximation already misses the target.
    bool prune_by_rank = true;
};

/// One evaluated grid cell.
struct GridCell {
    int rank = 0;
    double alpha = 0;
    double alpha_encoding = 0;
    double ve = 0;
    bool fitted = false;
};

struct PartModel {
    FacePart part = FacePart::Lips;
    DictionaryModel<double> model;
    int rank = 0;
    double alpha = 0;
    double ve = 0;
    bool grid_exhausted = false;
    /// Part carried no motion (all-zero rows); it contributes no atoms.
    bool skipped = false;
    std::vector<GridCell> cells;
};

struct HierModel {
    NmfModel<double> model;
    int rank = 0;
    double alpha_basis = 0;
    double alpha_encoding = 0;
    /// VE between X and U A B; the selection criterion.
    double ve_full = 0;
    /// VE between V and A B; diagnostics only.
    double ve_codes = 0;
    bool grid_exhausted = false;
    std::vector<GridCell> cells;
};

struct PartSummary {
    FacePart part = FacePart::Lips;
    int rank = 0;
    double alpha = 0;
    double ve = 0;
    bool grid_exhausted = false;
    bool skipped = false;
};

struct HierSummary {
    int rank = 0;
    double alpha_basis = 0;
    double alpha_encoding = 0;
    double ve_full = 0;
    double ve_codes = 0;
    bool grid_exhausted = false;
};

/// The two-level model X ~ U A B. Columns of `aus` (U' = U A) are the learned action units.
struct FullFaceModel {
    Eigen::MatrixXd part_basis;  // U: 136 x k
    Eigen::MatrixXd hier_basis;  // A: k x q
    Eigen::MatrixXd encoding;    // B: q x m
    Eigen::MatrixXd aus;         // U': 136 x q
    double beta = 0.05;
    double ve_train = 0;
    std::vector<PartSummary> parts;
    HierSummary hier;
    Template face_template;
    AnchorChoice anchors = AnchorChoice::Default;
    std::uint64_t seed = 0;
    std::string grid_preset = "default";
    std::size_t train_columns = 0;
    /// Optional PCA baseline stored alongside ([U -U], 136 x 2c).
    std::optional<Eigen::MatrixXd> pca_expanded;
};

/// Upper bound on the VE reachable by any rank-r approximation, for r = 0..rows.
std::vector<double> rank_ve_bounds(const Eigen::MatrixXd& data);

PartModel fit_pfm(const Eigen::MatrixXd& part_data, FacePart part, double beta, const GridSpec& grid,
                  const FitOptions& options);

struct StackedParts {
    Eigen::MatrixXd basis;  // 136 x k
    Eigen::MatrixXd codes;  // k x m
    /// Part that contributed each column of `basis`.
    std::vector<FacePart> column_parts;
};

StackedParts stack_parts(const std::vector<PartModel>& parts);

HierModel fit_hfm(const Eigen::MatrixXd& data, const Eigen::MatrixXd& part_basis, const Eigen::MatrixXd& codes,
                  double beta, const GridSpec& grid, const FitOptions& options);

FullFaceModel fit_ffm(const Eigen::MatrixXd& data, double beta, const GridSpec& grid, const FitOptions& options);

/// Throws unless U' equals U A within 1e-12 (relative to the magnitudes involved) and factors are nonnegative.
void check_model_consistency(const FullFaceModel& model);

struct PcaModel {
    Eigen::MatrixXd components;  // 136 x c, orthonormal
    Eigen::VectorXd singular_values;
    Eigen::MatrixXd expanded;    // [U  -U]
    bool centered = false;
    Eigen::VectorXd mean;
    double train_ve = 0;
};

struct PcaOptions {
    /// Either a VE target in percent or a fixed component count.
    std::optional<double> target_ve = 95.0;
    std::optional<int> components;
    bool center = false;
};

PcaModel fit_pca_baseline(const Eigen::MatrixXd& data, const PcaOptions& options = {});

}  // namespace dfecs
