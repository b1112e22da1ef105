#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dfecs/ffm.hpp"
#include "dfecs/geometry.hpp"

namespace dfecs::io {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "DFECS_OUTPUT_DIR";

enum class GridPreset { Default, PaperSi, Custom };

std::string_view to_string(GridPreset preset);
GridPreset grid_preset_from_string(std::string_view text);
std::string_view to_string(AnchorChoice choice);
AnchorChoice anchor_choice_from_string(std::string_view text);

struct RunConfig {
    double beta = 0.05;
    GridPreset grid_preset = GridPreset::Default;
    /// Used when grid_preset is Custom.
    GridSpec custom_grid = GridSpec::defaults();
    SolverConfig solver;
    int threads = 1;
    std::optional<std::size_t> sample_count;
    AnchorChoice anchors = AnchorChoice::Default;
    /// RMS radius of the template's affine anchors.
    double template_scale = 100.0;
    /// Subject whose neutral frame defines the template; the first subject when unset.
    std::optional<std::string> reference_subject;
    /// Fixed encoding alpha (positive-lasso objective without the 1/2 factor); full paths when unset.
    std::optional<double> alpha;
    std::filesystem::path output_dir = ".";

    GridSpec grid() const;
    /// Throws ConfigError (or EmptyGrid) on the first invalid field.
    void validate() const;
};

/// Reads a JSON config. Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
RunConfig parse_run_config(std::string_view json_text, RunConfig base = {});

/// $DFECS_OUTPUT_DIR when set and nonempty, otherwise the current directory.
std::filesystem::path default_output_dir();

}  // namespace dfecs::io
