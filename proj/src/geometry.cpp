#include "dfecs/geometry.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dfecs/error.hpp"

namespace dfecs {

namespace {

struct PartRegistration {
    std::string_view name;
    std::vector<FacePart> parts;
    std::vector<int> anchors;
};

// Lips have no stationary keypoints and are left as the affine step placed them.
const std::vector<PartRegistration>& similarity_steps() {
    static const std::vector<PartRegistration> steps = {
        {"left eyebrow + left eye", {FacePart::LeftEyebrow, FacePart::LeftEye}, {42, 45}},
        {"right eyebrow + right eye", {FacePart::RightEyebrow, FacePart::RightEye}, {36, 39}},
        {"jawline", {FacePart::Jawline}, {0, 16}},
    };
    return steps;
}

constexpr int kNoseAnchor = 27;

void zero_invalid(Points& coords, const ValidityMask& validity) {
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (!validity[i]) coords.col(i).setZero();
    }
}

template <class Map>
void map_keypoints(Points& coords, const ValidityMask& validity, const Map& map, int first, int last) {
    for (int i = first; i <= last; ++i) {
        if (validity[i]) coords.col(i) = map(Eigen::Vector2d(coords.col(i)));
    }
}

}  // namespace

AnchorSet AnchorSet::from_template(std::span<const int> indices, const Template& target) {
    AnchorSet set;
    set.indices.assign(indices.begin(), indices.end());
    set.template_coords.resize(2, static_cast<Eigen::Index>(indices.size()));
    for (std::size_t a = 0; a < indices.size(); ++a) {
        const int index = indices[a];
        if (index < 0 || index >= kNumKeypoints) {
            throw Error(ErrorKind::ConfigError, "anchor index out of range: " + std::to_string(index));
        }
        for (std::size_t b = 0; b < a; ++b) {
            if (indices[b] == index) {
                throw Error(ErrorKind::ConfigError, "duplicate anchor index: " + std::to_string(index));
            }
        }
        if (!target.validity[index]) {
            throw Error(ErrorKind::MissingAnchor, "template lacks anchor keypoint " + std::to_string(index));
        }
        set.template_coords.col(static_cast<Eigen::Index>(a)) = target.coords.col(index);
    }
    return set;
}

AffineParams AffineParams::inverse() const {
    AffineParams inv;
    inv.linear = linear.inverse();
    inv.translation = -inv.linear * translation;
    return inv;
}

AffineParams AffineParams::then(const AffineParams& next) const {
    AffineParams out;
    out.linear = next.linear * linear;
    out.translation = next.linear * translation + next.translation;
    return out;
}

Eigen::Matrix2d SimilarityParams::linear() const {
    const double c = scale * std::cos(angle);
    const double s = scale * std::sin(angle);
    Eigen::Matrix2d m;
    m << c, -s, s, c;
    return m;
}

AffineParams estimate_affine(const Points& coords, const ValidityMask& validity, const AnchorSet& anchors) {
    const auto n = static_cast<Eigen::Index>(anchors.indices.size());
    if (n < 3) throw Error(ErrorKind::DegenerateAnchors, "affine registration needs at least 3 anchors");
    Eigen::Matrix2Xd src(2, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const int index = anchors.indices[static_cast<std::size_t>(a)];
        if (!validity[index]) {
            throw Error(ErrorKind::MissingAnchor, "anchor keypoint " + std::to_string(index) + " is missing");
        }
        src.col(a) = coords.col(index);
    }
    const Eigen::Matrix2Xd& dst = anchors.template_coords;

    // The normal equations of the 12x6 system split into one 3x3 block per output coordinate;
    // centring removes the translation column and leaves the 2x2 anchor scatter.
    const Eigen::Vector2d src_mean = src.rowwise().mean();
    const Eigen::Vector2d dst_mean = dst.rowwise().mean();
    const Eigen::Matrix2Xd src_c = src.colwise() - src_mean;
    const Eigen::Matrix2Xd dst_c = dst.colwise() - dst_mean;
    const Eigen::Matrix2d scatter = src_c * src_c.transpose();
    const Eigen::Matrix2d cross = dst_c * src_c.transpose();

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues()(1);
    const double lmin = eig.eigenvalues()(0);
    if (!(lmax > 0.0) || lmin <= 1e-12 * lmax) {
        throw Error(ErrorKind::DegenerateAnchors, "anchor keypoints are collinear or coincident");
    }

    AffineParams params;
    params.linear = cross * scatter.inverse();
    params.translation = dst_mean - params.linear * src_mean;
    if (!(std::abs(params.linear.determinant()) > 1e-12)) {
        throw Error(ErrorKind::DegenerateAnchors, "estimated affine map is not invertible");
    }
    return params;
}

AffineParams estimate_affine(const RawFrame& frame, const AnchorSet& anchors) {
    return estimate_affine(frame.coords, frame.validity, anchors);
}

RawFrame apply_affine(const RawFrame& frame, const AffineParams& params) {
    RawFrame out = frame;
    map_keypoints(out.coords, out.validity, params, 0, kNumKeypoints - 1);
    zero_invalid(out.coords, out.validity);
    return out;
}

SimilarityParams estimate_similarity(const Points& coords, const ValidityMask& validity,
                                     std::span<const int> part_anchors, const Eigen::Matrix2Xd& template_coords) {
    if (template_coords.cols() != static_cast<Eigen::Index>(part_anchors.size())) {
        throw Error(ErrorKind::ShapeError, "one template point is required per part anchor");
    }
    std::vector<Eigen::Index> used;
    for (std::size_t a = 0; a < part_anchors.size(); ++a) {
        if (validity[part_anchors[a]]) used.push_back(static_cast<Eigen::Index>(a));
    }
    if (used.size() < 2) {
        throw Error(ErrorKind::InsufficientAnchors, "similarity registration needs two valid anchors");
    }
    const auto n = static_cast<Eigen::Index>(used.size());
    Eigen::Matrix2Xd src(2, n), dst(2, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        src.col(a) = coords.col(part_anchors[static_cast<std::size_t>(used[static_cast<std::size_t>(a)])]);
        dst.col(a) = template_coords.col(used[static_cast<std::size_t>(a)]);
    }
    const Eigen::Vector2d src_mean = src.rowwise().mean();
    const Eigen::Vector2d dst_mean = dst.rowwise().mean();
    const Eigen::Matrix2Xd src_c = src.colwise() - src_mean;
    const Eigen::Matrix2Xd dst_c = dst.colwise() - dst_mean;

    const double spread = src_c.squaredNorm();
    if (!(spread > 1e-24 * std::max(1.0, src.squaredNorm()))) {
        throw Error(ErrorKind::CoincidentAnchors, "similarity anchors coincide");
    }
    // Linear least squares in (s cos, s sin, tx, ty).
    double dot = 0.0;
    double det = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
        dot += src_c(0, a) * dst_c(0, a) + src_c(1, a) * dst_c(1, a);
        det += src_c(0, a) * dst_c(1, a) - src_c(1, a) * dst_c(0, a);
    }
    const double a_coef = dot / spread;
    const double b_coef = det / spread;

    SimilarityParams params;
    params.scale = std::hypot(a_coef, b_coef);
    params.angle = std::atan2(b_coef, a_coef);
    if (!(params.scale > 0.0)) {
        throw Error(ErrorKind::CoincidentAnchors, "similarity target anchors coincide");
    }
    Eigen::Matrix2d linear;
    linear << a_coef, -b_coef, b_coef, a_coef;
    params.translation = dst_mean - linear * src_mean;
    return params;
}

SimilarityParams estimate_similarity(const RawFrame& frame, std::span<const int> part_anchors,
                                     const Eigen::Matrix2Xd& template_coords) {
    return estimate_similarity(frame.coords, frame.validity, part_anchors, template_coords);
}

std::span<const int> affine_anchor_indices(AnchorChoice choice) {
    return choice == AnchorChoice::Default ? std::span<const int>(kDefaultAffineAnchors)
                                           : std::span<const int>(kNoJawlineAffineAnchors);
}

namespace {

bool all_valid(std::span<const int> indices, const ValidityMask& validity) {
    for (int i : indices) {
        if (!validity[i]) return false;
    }
    return true;
}

}  // namespace

StandardizedFrame standardize_frame(const RawFrame& frame, const Template& target, const StandardizeConfig& config) {
    StandardizedFrame out;
    out.subject_id = frame.subject_id;
    out.frame_index = frame.frame_index;
    out.is_neutral = frame.is_neutral;
    out.validity = frame.validity;
    out.coords = frame.coords;

    if (config.frontalize) out.coords = config.frontalize(out.coords);
    zero_invalid(out.coords, out.validity);

    AnchorChoice choice = config.anchors;
    if (choice == AnchorChoice::Default && config.fallback_to_alternate &&
        !all_valid(affine_anchor_indices(AnchorChoice::Default), out.validity)) {
        choice = AnchorChoice::NoJawline;
        out.warnings.emplace_back("default affine anchors missing; using no-jawline anchor set");
    }
    const AnchorSet anchors = AnchorSet::from_template(affine_anchor_indices(choice), target);
    const AffineParams affine = estimate_affine(out.coords, out.validity, anchors);
    map_keypoints(out.coords, out.validity, affine, 0, kNumKeypoints - 1);

    for (const PartRegistration& step : similarity_steps()) {
        int valid_anchors = 0;
        bool template_ok = true;
        Eigen::Matrix2Xd targets(2, static_cast<Eigen::Index>(step.anchors.size()));
        for (std::size_t a = 0; a < step.anchors.size(); ++a) {
            valid_anchors += out.validity[step.anchors[a]] ? 1 : 0;
            template_ok = template_ok && target.validity[step.anchors[a]];
            targets.col(static_cast<Eigen::Index>(a)) = target.coords.col(step.anchors[a]);
        }
        if (valid_anchors < 2 || !template_ok) {
            out.warnings.emplace_back("skipped similarity registration of " + std::string(step.name) +
                                      ": anchors missing");
            continue;
        }
        const SimilarityParams sim = estimate_similarity(out.coords, out.validity, step.anchors, targets);
        for (FacePart part : step.parts) {
            const KeypointRange range = part_keypoints(part);
            map_keypoints(out.coords, out.validity, sim, range.first, range.last);
        }
    }

    if (out.validity[kNoseAnchor] && target.validity[kNoseAnchor]) {
        const Eigen::Vector2d shift = target.coords.col(kNoseAnchor) - out.coords.col(kNoseAnchor);
        const KeypointRange nose = part_keypoints(FacePart::Nose);
        map_keypoints(out.coords, out.validity, [&](const Eigen::Vector2d& p) { return Eigen::Vector2d(p + shift); },
                      nose.first, nose.last);
    } else {
        out.warnings.emplace_back("skipped nose translation: keypoint 27 missing");
    }

    zero_invalid(out.coords, out.validity);
    return out;
}

Template make_template(const RawFrame& reference_neutral, AnchorChoice anchors, double scale) {
    if (!(scale > 0.0)) throw Error(ErrorKind::ConfigError, "template scale must be positive");
    const std::span<const int> indices = affine_anchor_indices(anchors);
    Eigen::Matrix2Xd pts(2, static_cast<Eigen::Index>(indices.size()));
    for (std::size_t a = 0; a < indices.size(); ++a) {
        if (!reference_neutral.validity[indices[a]]) {
            throw Error(ErrorKind::MissingAnchor,
                        "reference frame lacks anchor keypoint " + std::to_string(indices[a]));
        }
        pts.col(static_cast<Eigen::Index>(a)) = reference_neutral.coords.col(indices[a]);
    }
    const Eigen::Vector2d centroid = pts.rowwise().mean();
    const double rms = std::sqrt((pts.colwise() - centroid).squaredNorm() / static_cast<double>(pts.cols()));
    if (!(rms > 0.0)) throw Error(ErrorKind::DegenerateAnchors, "reference anchors coincide");

    Template out;
    out.validity = reference_neutral.validity;
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (out.validity[i]) out.coords.col(i) = (reference_neutral.coords.col(i) - centroid) * (scale / rms);
    }
    return out;
}

RawFrame to_raw(const StandardizedFrame& frame) {
    RawFrame raw;
    raw.subject_id = frame.subject_id;
    raw.frame_index = frame.frame_index;
    raw.is_neutral = frame.is_neutral;
    raw.coords = frame.coords;
    raw.validity = frame.validity;
    return raw;
}

}  // namespace dfecs
