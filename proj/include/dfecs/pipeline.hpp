#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfecs/geometry.hpp"
#include "dfecs/kpm.hpp"

namespace dfecs {

struct StandardizeOptions {
    AnchorChoice anchors = AnchorChoice::Default;
    double template_scale = 100.0;
    /// Subject whose earliest neutral frame defines the template; the first subject seen when unset.
    std::optional<std::string> reference_subject;
    /// Register against this template instead of building one (e.g. the template stored in a model).
    std::optional<Template> fixed_template;
    /// Frames are already standardized: skip registration and use them as they are.
    bool already_standardized = false;
    FrontalizationHook frontalize;
};

struct StandardizedDataset {
    Template face_template;
    std::vector<StandardizedFrame> frames;
    /// Frames that could not be registered, and other notes, as "subject/frame: reason".
    std::vector<std::string> warnings;
};

/// Registers every frame. Frames whose registration fails are dropped with a warning; a failure on the
/// reference neutral frame is an error.
StandardizedDataset standardize_dataset(const std::vector<RawFrame>& frames, const StandardizeOptions& options = {});

struct PreparedKpms {
    KpmMatrix matrix;
    Template face_template;
    std::vector<std::string> warnings;
};

/// Standardization, KPM assembly and optional subsampling in one step.
PreparedKpms prepare_kpms(const std::vector<RawFrame>& frames, const StandardizeOptions& options,
                          std::optional<SampleRequest> sample = std::nullopt);

}  // namespace dfecs
