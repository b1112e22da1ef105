#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace dfecs {

inline constexpr int kNumKeypoints = 68;
/// Rows of a keypoint-motion vector: (dx_i, dy_i) interleaved for i = 0..67.
inline constexpr int kKpmDim = 2 * kNumKeypoints;
inline constexpr std::string_view kLayoutTag = "interleaved-xy-68";

enum class FacePart {
    LeftEyebrow,
    RightEyebrow,
    LeftEye,
    RightEye,
    Nose,
    Lips,
    Jawline,
};

inline constexpr std::array<FacePart, 7> kAllParts = {
    FacePart::LeftEyebrow, FacePart::RightEyebrow, FacePart::LeftEye, FacePart::RightEye,
    FacePart::Nose,        FacePart::Lips,         FacePart::Jawline,
};

constexpr std::string_view part_name(FacePart part) {
    switch (part) {
        case FacePart::LeftEyebrow: return "left_eyebrow";
        case FacePart::RightEyebrow: return "right_eyebrow";
        case FacePart::LeftEye: return "left_eye";
        case FacePart::RightEye: return "right_eye";
        case FacePart::Nose: return "nose";
        case FacePart::Lips: return "lips";
        case FacePart::Jawline: return "jawline";
    }
    return "";
}

/// Contiguous keypoint range [first, last] of a part in the standard 68-point template.
struct KeypointRange {
    int first;
    int last;

    constexpr int size() const { return last - first + 1; }
    constexpr bool contains(int index) const { return index >= first && index <= last; }
};

constexpr KeypointRange part_keypoints(FacePart part) {
    switch (part) {
        case FacePart::Jawline: return {0, 16};
        case FacePart::RightEyebrow: return {17, 21};
        case FacePart::LeftEyebrow: return {22, 26};
        case FacePart::Nose: return {27, 35};
        case FacePart::RightEye: return {36, 41};
        case FacePart::LeftEye: return {42, 47};
        case FacePart::Lips: return {48, 67};
    }
    return {0, -1};
}

/// Number of KPM rows owned by a part (two per keypoint).
constexpr int part_dim(FacePart part) { return 2 * part_keypoints(part).size(); }

/// First KPM row of a part; parts occupy contiguous row blocks because keypoint ranges are contiguous.
constexpr int part_row_offset(FacePart part) { return 2 * part_keypoints(part).first; }

constexpr FacePart part_of_keypoint(int index) {
    for (FacePart part : kAllParts) {
        if (part_keypoints(part).contains(index)) return part;
    }
    return FacePart::Lips;
}

}  // namespace dfecs
