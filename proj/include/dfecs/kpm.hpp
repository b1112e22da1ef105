#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dfecs/geometry.hpp"
#include "dfecs/layout.hpp"

namespace dfecs {

using KpmColumn = Eigen::Matrix<double, kKpmDim, 1>;

/// Displacement of every keypoint from the subject's neutral frame.
struct KpmVector {
    KpmColumn values = KpmColumn::Zero();
    std::string subject_id;
    std::size_t frame_index = 0;
    /// Keypoints valid in both frames; the rest carry exact zeros.
    ValidityMask valid;
};

struct KpmColumnInfo {
    std::string subject_id;
    std::size_t frame_index = 0;
    ValidityMask valid;
};

/// Data matrix with one KPM per column (136 x m).
struct KpmMatrix {
    Eigen::MatrixXd data;
    std::vector<KpmColumnInfo> columns;
    /// Set when the matrix was subsampled: the requested count and the seed used.
    std::optional<std::size_t> sampled_count;
    std::optional<std::uint64_t> sample_seed;

    Eigen::Index cols() const { return data.cols(); }
};

struct SampleRequest {
    std::size_t count = 0;
    std::uint64_t seed = 0;
};

KpmVector compute_kpm(const StandardizedFrame& neutral, const StandardizedFrame& frame);

/// Columns keep input order; a sample is drawn uniformly without replacement and keeps input order too.
KpmMatrix build_matrix(const std::vector<KpmVector>& vectors, std::optional<SampleRequest> sample = std::nullopt);

/// Rows of one part, interleaved (x, y) in ascending keypoint order.
Eigen::MatrixXd extract_part(const Eigen::MatrixXd& data, FacePart part);

/// Scatters a part-local vector into a full-face vector, zeros elsewhere.
KpmColumn expand_to_full(const Eigen::VectorXd& part_component, FacePart part);

/// Result of grouping standardized frames by subject and taking displacements from each neutral.
struct KpmAssembly {
    std::vector<KpmVector> vectors;
    std::vector<std::string> excluded_subjects;
    std::vector<std::string> warnings;
};

/// Picks each subject's neutral (first is_neutral frame by frame_index) and emits one KPM per frame,
/// the neutral included. Subjects without a neutral frame are excluded.
KpmAssembly assemble_kpms(const std::vector<StandardizedFrame>& frames);

}  // namespace dfecs
