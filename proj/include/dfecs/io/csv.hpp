#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dfecs/eval.hpp"
#include "dfecs/geometry.hpp"

namespace dfecs::io {

/// Describes a dataset spread over several keypoint CSV files.
struct DatasetManifest {
    struct Subject {
        std::string id;
        std::vector<std::filesystem::path> files;
        /// Overrides the is_neutral column for this subject when set.
        std::optional<std::size_t> neutral_frame;
    };

    std::string name;
    std::string keypoint_template = "68-point";
    std::optional<double> frame_rate;
    std::vector<Subject> subjects;

    /// JSON manifest; relative file paths resolve against the manifest's directory.
    static DatasetManifest load(const std::filesystem::path& path);
    void validate() const;
};

/// Parses `subject,frame,is_neutral,x0,y0,...,x67,y67` rows. Optional leading `# key=value` comment lines
/// may declare `layout=interleaved-xy-68`. Empty, NaN or (0, 0) coordinates mark a keypoint missing.
std::vector<RawFrame> parse_keypoints_csv(std::string_view text, std::string_view source = "<memory>");

std::vector<RawFrame> load_keypoints(const std::filesystem::path& path);

/// Loads every file of the manifest, keeping frames of listed subjects only and applying neutral overrides.
std::vector<RawFrame> load_keypoints(const DatasetManifest& manifest);

/// Writes frames in the input schema, with missing keypoints as empty cells.
void write_keypoints_csv(std::ostream& out, const std::vector<StandardizedFrame>& frames);

/// `unit,rater_1,rater_2,rater_3` with labels interpretable / non-interpretable (also i/ni, 1/0, yes/no).
InterpretabilityRecord parse_interpretability_labels(std::string_view text, std::string_view source = "<memory>");
InterpretabilityRecord load_interpretability_labels(const std::filesystem::path& path);

/// Reads the output of curve_to_delimited back; the header decides the axis.
VarianceCurve parse_curve_delimited(std::string_view text, std::string_view source = "<memory>");

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace dfecs::io
