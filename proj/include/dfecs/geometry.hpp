#pragma once

#include <bitset>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dfecs/layout.hpp"

namespace dfecs {

using Points = Eigen::Matrix<double, 2, kNumKeypoints>;
using ValidityMask = std::bitset<kNumKeypoints>;

/// Keypoints of one frame as read from a dataset. Missing keypoints sit at (0, 0) and are flagged invalid.
struct RawFrame {
    std::string subject_id;
    std::size_t frame_index = 0;
    bool is_neutral = false;
    Points coords = Points::Zero();
    ValidityMask validity;
};

/// Keypoints after frontalization, whole-face affine and per-part similarity registration.
struct StandardizedFrame {
    std::string subject_id;
    std::size_t frame_index = 0;
    bool is_neutral = false;
    Points coords = Points::Zero();
    ValidityMask validity;
    /// Registration steps that were skipped or substituted for this frame.
    std::vector<std::string> warnings;
};

/// Target space for registration: a full 68-point face in standardized units.
struct Template {
    Points coords = Points::Zero();
    ValidityMask validity;
};

/// Affine anchors used by default.
inline constexpr std::array<int, 6> kDefaultAffineAnchors = {0, 16, 27, 33, 39, 42};
/// Affine anchors for datasets without jawline keypoints.
inline constexpr std::array<int, 6> kNoJawlineAffineAnchors = {27, 33, 39, 42, 36, 45};

struct AnchorSet {
    std::vector<int> indices;
    Eigen::Matrix2Xd template_coords;

    /// Takes anchor targets from a template; throws MissingAnchor if the template lacks one.
    static AnchorSet from_template(std::span<const int> indices, const Template& target);
};

struct AffineParams {
    Eigen::Matrix2d linear = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    Eigen::Vector2d operator()(const Eigen::Vector2d& p) const { return linear * p + translation; }
    AffineParams inverse() const;
    AffineParams then(const AffineParams& next) const;
};

struct SimilarityParams {
    double scale = 1.0;
    /// Radians, counter-clockwise in the coordinate frame of the points.
    double angle = 0.0;
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    Eigen::Matrix2d linear() const;
    Eigen::Vector2d operator()(const Eigen::Vector2d& p) const { return linear() * p + translation; }
};

/// Least-squares affine map taking the frame's anchor keypoints onto the anchor targets.
AffineParams estimate_affine(const RawFrame& frame, const AnchorSet& anchors);
AffineParams estimate_affine(const Points& coords, const ValidityMask& validity, const AnchorSet& anchors);

/// Maps every valid keypoint; invalid keypoints stay at (0, 0).
RawFrame apply_affine(const RawFrame& frame, const AffineParams& params);

/// Least-squares similarity over the valid anchors (closed form, exact for two points).
SimilarityParams estimate_similarity(const RawFrame& frame, std::span<const int> part_anchors,
                                     const Eigen::Matrix2Xd& template_coords);
SimilarityParams estimate_similarity(const Points& coords, const ValidityMask& validity,
                                     std::span<const int> part_anchors, const Eigen::Matrix2Xd& template_coords);

enum class AnchorChoice { Default, NoJawline };

using FrontalizationHook = std::function<Points(const Points&)>;

struct StandardizeConfig {
    AnchorChoice anchors = AnchorChoice::Default;
    /// Switch to the no-jawline affine anchors when a default anchor is missing in the frame.
    bool fallback_to_alternate = true;
    /// Empty means identity.
    FrontalizationHook frontalize;
};

std::span<const int> affine_anchor_indices(AnchorChoice choice);

StandardizedFrame standardize_frame(const RawFrame& frame, const Template& target,
                                    const StandardizeConfig& config = {});

/// Builds the registration template from a reference subject's neutral frame: the frame is moved so the
/// affine-anchor centroid is at the origin and the anchors' RMS radius equals `scale`.
Template make_template(const RawFrame& reference_neutral, AnchorChoice anchors = AnchorChoice::Default,
                       double scale = 100.0);

RawFrame to_raw(const StandardizedFrame& frame);

}  // namespace dfecs
