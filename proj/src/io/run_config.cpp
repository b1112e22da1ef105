#include "dfecs/io/run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include <json.hpp>

#include "dfecs/error.hpp"
#include "dfecs/io/csv.hpp"

namespace dfecs::io {

std::string_view to_string(GridPreset preset) {
    switch (preset) {
        case GridPreset::Default: return "default";
        case GridPreset::PaperSi: return "paper-si";
        case GridPreset::Custom: return "custom";
    }
    return "default";
}

GridPreset grid_preset_from_string(std::string_view text) {
    if (text == "default") return GridPreset::Default;
    if (text == "paper-si") return GridPreset::PaperSi;
    if (text == "custom") return GridPreset::Custom;
    throw Error(ErrorKind::ConfigError, "grid preset must be default, paper-si or custom (got '" + std::string(text) + "')");
}

std::string_view to_string(AnchorChoice choice) { return choice == AnchorChoice::Default ? "default" : "no-jawline"; }

AnchorChoice anchor_choice_from_string(std::string_view text) {
    if (text == "default") return AnchorChoice::Default;
    if (text == "no-jawline") return AnchorChoice::NoJawline;
    throw Error(ErrorKind::ConfigError, "anchors must be default or no-jawline (got '" + std::string(text) + "')");
}

GridSpec RunConfig::grid() const {
    switch (grid_preset) {
        case GridPreset::Default: return GridSpec::defaults();
        case GridPreset::PaperSi: return GridSpec::paper_si();
        case GridPreset::Custom: return custom_grid;
    }
    return GridSpec::defaults();
}

void RunConfig::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorKind::ConfigError, "beta must lie in (0, 1)");
    if (threads < 1) throw Error(ErrorKind::ConfigError, "threads must be at least 1");
    if (sample_count && *sample_count == 0) throw Error(ErrorKind::ConfigError, "sample_count must be positive");
    if (!(template_scale > 0.0) || !std::isfinite(template_scale)) {
        throw Error(ErrorKind::ConfigError, "template_scale must be positive");
    }
    if (alpha && !(*alpha >= 0.0 && std::isfinite(*alpha))) {
        throw Error(ErrorKind::ConfigError, "alpha must be a nonnegative number");
    }
    if (output_dir.empty()) throw Error(ErrorKind::ConfigError, "output directory is empty");
    solver.validate();
    grid().validate();
}

RunConfig parse_run_config(std::string_view json_text, RunConfig c) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");

    static const std::set<std::string> known = {
        "beta",      "grid",   "custom_grid", "max_iterations", "tolerance",        "seed",
        "threads",   "sample_count", "anchors", "template_scale", "reference_subject", "alpha",
        "output_dir"};
    try {
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
        }
        if (j.contains("beta")) c.beta = j["beta"].get<double>();
        if (j.contains("grid")) c.grid_preset = grid_preset_from_string(j["grid"].get<std::string>());
        if (j.contains("custom_grid")) {
            const auto& g = j["custom_grid"];
            GridSpec spec = GridSpec::defaults();
            if (g.contains("part_ranks")) spec.part_ranks = g["part_ranks"].get<std::vector<int>>();
            if (g.contains("alphas")) spec.alphas = g["alphas"].get<std::vector<double>>();
            if (g.contains("hier_ranks")) spec.hier_ranks = g["hier_ranks"].get<std::vector<int>>();
            if (g.contains("alphas_basis")) spec.alphas_basis = g["alphas_basis"].get<std::vector<double>>();
            if (g.contains("alphas_encoding")) spec.alphas_encoding = g["alphas_encoding"].get<std::vector<double>>();
            c.custom_grid = spec;
            if (!j.contains("grid")) c.grid_preset = GridPreset::Custom;
        }
        if (j.contains("max_iterations")) c.solver.max_iterations = j["max_iterations"].get<int>();
        if (j.contains("tolerance")) c.solver.tolerance = j["tolerance"].get<double>();
        if (j.contains("seed")) c.solver.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
        if (j.contains("sample_count")) c.sample_count = j["sample_count"].get<std::size_t>();
        if (j.contains("anchors")) c.anchors = anchor_choice_from_string(j["anchors"].get<std::string>());
        if (j.contains("template_scale")) c.template_scale = j["template_scale"].get<double>();
        if (j.contains("reference_subject")) c.reference_subject = j["reference_subject"].get<std::string>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("config has a field of the wrong type: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    return parse_run_config(read_text_file(path), std::move(base));
}

std::filesystem::path default_output_dir() {
    const char* env = std::getenv(kOutputDirEnv);
    if (env != nullptr && *env != '\0') return env;
    return ".";
}

}  // namespace dfecs::io
