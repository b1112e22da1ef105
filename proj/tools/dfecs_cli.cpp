// Command-line front end: standardize, fit, encode, evaluate, visualize, compare.
//
// Failures print one line `error: category=<Kind> message="..."` on stderr and exit with a code
// derived from the category (see exit_code_for), so scripts can branch on either.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfecs/error.hpp"
#include "dfecs/eval.hpp"
#include "dfecs/ffm.hpp"
#include "dfecs/io/archive.hpp"
#include "dfecs/io/csv.hpp"
#include "dfecs/io/run_config.hpp"
#include "dfecs/io/svg.hpp"
#include "dfecs/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dfecs;

namespace {

constexpr int kUsageExit = 2;
constexpr int kInternalExit = 1;

int exit_code_for(ErrorKind kind) { return 10 + static_cast<int>(kind); }

void report_error(std::string_view category, std::string_view message) {
    std::string escaped;
    for (char c : message) {
        if (c == '"' || c == '\\') escaped.push_back('\\');
        escaped.push_back(c == '\n' ? ' ' : c);
    }
    std::cerr << "error: category=" << category << " message=\"" << escaped << "\"\n";
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

/// Flags shared by several subcommands. Values only override the config file when given.
struct CommonFlags {
    std::string config_file;
    std::string output_dir;
    std::string anchors;
    std::uint64_t seed = 0;
    int threads = 1;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
        cmd->add_option("--output-dir", output_dir,
                        std::string("Output directory (default: $") + io::kOutputDirEnv + " or the current directory)");
        cmd->add_option("--anchors", anchors, "Affine anchor set")->check(CLI::IsMember({"default", "no-jawline"}));
        seed_opt = cmd->add_option("--seed", seed, "Seed for sampling and solver initialization");
        threads_opt = cmd->add_option("--threads", threads, "Worker threads for grid search and encoding");
    }

    io::RunConfig resolve() const {
        io::RunConfig c;
        c.output_dir = io::default_output_dir();
        if (!config_file.empty()) c = io::load_run_config(config_file, c);
        if (!output_dir.empty()) c.output_dir = output_dir;
        if (!anchors.empty()) c.anchors = io::anchor_choice_from_string(anchors);
        if (seed_opt != nullptr && seed_opt->count() > 0) c.solver.seed = seed;
        if (threads_opt != nullptr && threads_opt->count() > 0) c.threads = threads;
        return c;
    }
};

struct InputFlags {
    std::string csv;
    std::string manifest;
    bool standardized = false;
    std::string reference_subject;

    void attach(CLI::App* cmd, bool allow_standardized) {
        auto* in = cmd->add_option("--input", csv, "Keypoint CSV")->check(CLI::ExistingFile);
        auto* man = cmd->add_option("--manifest", manifest, "Dataset manifest (JSON)")->check(CLI::ExistingFile);
        in->excludes(man);
        cmd->add_option("--reference-subject", reference_subject, "Subject whose neutral frame defines the template");
        if (allow_standardized) {
            cmd->add_flag("--standardized", standardized, "Input is the output of `standardize`; skip registration");
        }
    }

    std::vector<RawFrame> load() const {
        if (!csv.empty()) return io::load_keypoints(csv);
        if (!manifest.empty()) return io::load_keypoints(io::DatasetManifest::load(manifest));
        throw Error(ErrorKind::ConfigError, "one of --input or --manifest is required");
    }

    StandardizeOptions options(const io::RunConfig& c) const {
        StandardizeOptions o;
        o.anchors = c.anchors;
        o.template_scale = c.template_scale;
        o.reference_subject = c.reference_subject;
        if (!reference_subject.empty()) o.reference_subject = reference_subject;
        o.already_standardized = standardized;
        return o;
    }
};

void print_warnings(const std::vector<std::string>& warnings) {
    constexpr std::size_t kShown = 20;
    for (std::size_t i = 0; i < warnings.size() && i < kShown; ++i) std::cerr << "warning: " << warnings[i] << '\n';
    if (warnings.size() > kShown) std::cerr << "warning: ... " << warnings.size() - kShown << " more\n";
}

fs::path in_dir(const io::RunConfig& c, const std::string& explicit_path, const std::string& name) {
    if (!explicit_path.empty()) return explicit_path;
    return c.output_dir / name;
}

/// An AU source on the command line: `path` or `name=path`.
AuMatrix load_au_source(const std::string& spec) {
    std::string name;
    std::string path = spec;
    const std::size_t eq = spec.find('=');
    if (eq != std::string::npos && !fs::exists(spec)) {
        name = spec.substr(0, eq);
        path = spec.substr(eq + 1);
    }
    AuMatrix aus = io::load_external_au_matrix(path);
    if (!name.empty()) aus.name = name;
    return aus;
}

void write_curves(const fs::path& dir, const std::string& prefix, const AuSetCurves& c) {
    io::write_text_file(dir / (prefix + "_curve_k.csv"), curve_to_delimited(c.by_k));
    io::write_text_file(dir / (prefix + "_curve_l1.csv"), curve_to_delimited(c.by_l1));
}

void write_plots(const fs::path& dir, const std::string& prefix, const std::vector<AuSetCurves>& sets) {
    std::vector<std::pair<std::string, VarianceCurve>> by_k, by_l1;
    for (const AuSetCurves& s : sets) {
        by_k.emplace_back(s.name, s.by_k);
        by_l1.emplace_back(s.name, s.by_l1);
    }
    io::PlotOptions ko;
    ko.title = "Variance explained by number of components";
    ko.x_label = "number of components k";
    io::write_text_file(dir / (prefix + "_curve_k.svg"), io::render_curves_svg(by_k, ko));
    io::PlotOptions lo;
    lo.title = "Variance explained by L1 norm of the encoding";
    lo.x_label = "L1 norm (log10)";
    lo.log_x = true;
    io::write_text_file(dir / (prefix + "_curve_l1.svg"), io::render_curves_svg(by_l1, lo));
}

// ---------------------------------------------------------------------------------------------------------

int run_standardize(const CommonFlags& common, const InputFlags& input, const std::string& output) {
    io::RunConfig c = common.resolve();
    c.validate();
    const StandardizedDataset ds = standardize_dataset(input.load(), input.options(c));
    print_warnings(ds.warnings);
    std::ostringstream out;
    io::write_keypoints_csv(out, ds.frames);
    const fs::path path = in_dir(c, output, "standardized.csv");
    io::write_text_file(path, out.str());
    std::cout << "standardized " << ds.frames.size() << " frames -> " << path.string() << '\n';
    return 0;
}

struct FitFlags {
    double beta = 0.05;
    std::string grid;
    std::size_t sample_count = 0;
    int max_iterations = 0;
    double tolerance = 0;
    int pca_components = 0;
    std::string output;
    CLI::Option* beta_opt = nullptr;
    CLI::Option* sample_opt = nullptr;
    CLI::Option* iter_opt = nullptr;
    CLI::Option* tol_opt = nullptr;
};

int run_fit(const CommonFlags& common, const InputFlags& input, const FitFlags& f) {
    io::RunConfig c = common.resolve();
    if (f.beta_opt->count() > 0) c.beta = f.beta;
    if (!f.grid.empty()) c.grid_preset = io::grid_preset_from_string(f.grid);
    if (f.sample_opt->count() > 0) c.sample_count = f.sample_count;
    if (f.iter_opt->count() > 0) c.solver.max_iterations = f.max_iterations;
    if (f.tol_opt->count() > 0) c.solver.tolerance = f.tolerance;
    c.validate();

    std::optional<SampleRequest> sample;
    if (c.sample_count) sample = SampleRequest{*c.sample_count, c.solver.seed};
    const PreparedKpms prepared = prepare_kpms(input.load(), input.options(c), sample);
    print_warnings(prepared.warnings);

    FitOptions options;
    options.solver = c.solver;
    options.threads = c.threads;
    FullFaceModel model = fit_ffm(prepared.matrix.data, c.beta, c.grid(), options);
    model.face_template = prepared.face_template;
    model.anchors = c.anchors;
    model.grid_preset = std::string(io::to_string(c.grid_preset));
    if (f.pca_components > 0) {
        PcaOptions po;
        po.components = f.pca_components;
        model.pca_expanded = fit_pca_baseline(prepared.matrix.data, po).expanded;
    }

    const fs::path path = in_dir(c, f.output, "model.dfecs");
    io::save_model(model, path);

    for (const PartSummary& p : model.parts) {
        std::cout << "part " << part_name(p.part) << ": rank=" << p.rank << " alpha=" << p.alpha
                  << " VE=" << fixed(p.ve) << (p.skipped ? " (no motion, skipped)" : "")
                  << (p.grid_exhausted ? " (grid exhausted)" : "") << '\n';
    }
    std::cout << "hierarchy: q=" << model.hier.rank << " alpha_A=" << model.hier.alpha_basis
              << " alpha_B=" << model.hier.alpha_encoding << (model.hier.grid_exhausted ? " (grid exhausted)" : "")
              << '\n';
    std::cout << "columns: " << prepared.matrix.cols() << '\n';
    std::cout << "VE(train) = " << fixed(model.ve_train) << '\n';
    std::cout << "AUs: " << model.aus.cols() << '\n';
    std::cout << "model -> " << path.string() << '\n';
    return 0;
}

struct EncodeFlags {
    std::string model;
    std::string aus;
    double alpha = 0;
    CLI::Option* alpha_opt = nullptr;
    std::string prefix = "encode";
};

int run_encode(const CommonFlags& common, const InputFlags& input, const EncodeFlags& f) {
    io::RunConfig c = common.resolve();
    if (f.alpha_opt->count() > 0) c.alpha = f.alpha;
    c.validate();

    StandardizeOptions so = input.options(c);
    AuMatrix aus;
    if (!f.model.empty()) {
        const FullFaceModel model = io::load_model(f.model);
        so.fixed_template = model.face_template;
        so.anchors = model.anchors;
        aus = {"dfecs", model.aus, AuProvenance::Dfecs};
    } else if (!f.aus.empty()) {
        aus = load_au_source(f.aus);
    } else {
        throw Error(ErrorKind::ConfigError, "one of --model or --aus is required");
    }

    const PreparedKpms prepared = prepare_kpms(input.load(), so);
    print_warnings(prepared.warnings);
    const Eigen::MatrixXd& data = prepared.matrix.data;

    EncodingOptions eo;
    eo.path_alpha = c.alpha.value_or(0.0);
    eo.threads = c.threads;
    const EncodingResult enc = encode_dataset(data, aus, eo);

    AuSetCurves curves;
    curves.name = aus.name;
    curves.provenance = aus.provenance;
    curves.num_units = aus.units.cols();
    curves.by_k = ve_curve_by_k(data, aus.units, enc.paths);
    curves.by_l1 = ve_curve_by_l1(data, aus.units, enc.paths, default_l1_grid());
    curves.max_kkt_violation = enc.max_kkt_violation;

    std::ostringstream codes;
    codes << "subject,frame";
    for (Eigen::Index u = 0; u < enc.codes.rows(); ++u) codes << ",au" << u + 1;
    codes << '\n';
    for (Eigen::Index j = 0; j < enc.codes.cols(); ++j) {
        const KpmColumnInfo& info = prepared.matrix.columns[static_cast<std::size_t>(j)];
        codes << info.subject_id << ',' << info.frame_index;
        for (Eigen::Index u = 0; u < enc.codes.rows(); ++u) {
            char buf[64];
            const auto r = std::to_chars(buf, buf + sizeof(buf), enc.codes(u, j));
            codes << ',' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
        }
        codes << '\n';
    }
    io::write_text_file(c.output_dir / (f.prefix + "_codes.csv"), codes.str());
    write_curves(c.output_dir, f.prefix, curves);
    write_plots(c.output_dir, f.prefix, {curves});

    const Eigen::MatrixXd recon = aus.units * enc.codes;
    std::cout << "encoded " << data.cols() << " columns against " << aus.units.cols() << " units ("
              << to_string(aus.provenance) << ")\n";
    std::cout << "alpha = " << eo.path_alpha << '\n';
    std::cout << "VE = " << fixed(variance_explained(data, recon)) << '\n';
    std::cout << "mean per-sample VE with all units = " << fixed(curves.by_k.mean_ve.back()) << '\n';
    std::cout << "outputs -> " << (c.output_dir / (f.prefix + "_*")).string() << '\n';
    return 0;
}

int run_evaluate(const CommonFlags& common, const std::vector<std::string>& curve_files, const std::string& labels,
                 const std::string& output) {
    io::RunConfig c = common.resolve();
    c.validate();
    if (curve_files.empty() && labels.empty()) {
        throw Error(ErrorKind::ConfigError, "nothing to evaluate: give --curve and/or --labels");
    }
    std::ostringstream report;
    for (const std::string& file : curve_files) {
        const VarianceCurve curve = io::parse_curve_delimited(io::read_text_file(file), file);
        if (curve.mean_ve.empty()) throw Error(ErrorKind::SchemaError, file + ": curve has no points");
        bool monotone = true;
        for (std::size_t i = 1; i < curve.mean_ve.size(); ++i) monotone &= curve.mean_ve[i] >= curve.mean_ve[i - 1] - 1e-9;
        report << "curve " << file << ": axis=" << (curve.axis == CurveAxis::NumComponents ? "k" : "l1")
               << " points=" << curve.mean_ve.size() << " final_ve=" << fixed(curve.mean_ve.back())
               << " non_decreasing=" << (monotone ? "yes" : "no") << '\n';
    }
    if (!labels.empty()) {
        const InterpretabilityRecord record = io::load_interpretability_labels(labels);
        const InterpretabilityReport r = interpretability_metric(record);
        report << "units: " << record.labels.size() << '\n';
        report << "non-interpretable:";
        for (std::size_t u = 0; u < r.majority_interpretable.size(); ++u) {
            if (!r.majority_interpretable[u]) report << ' ' << record.unit_names[u];
        }
        report << '\n';
        for (std::size_t i = 0; i < r.per_rater.size(); ++i) {
            report << "rater " << i + 1 << ": " << fixed(r.per_rater[i], 1) << '\n';
        }
        std::ostringstream metric;
        metric << r.metric;
        report << "interpretability: " << metric.str() << '\n';
    }
    std::cout << report.str();
    const fs::path path = in_dir(c, output, "report.txt");
    io::write_text_file(path, report.str());
    return 0;
}

struct VisualizeFlags {
    std::string model;
    std::string aus;
    double scale = 20.0;
    double threshold = 1e-6;
    int columns = 4;
};

int run_visualize(const CommonFlags& common, const InputFlags& input, const VisualizeFlags& f) {
    io::RunConfig c = common.resolve();
    c.validate();
    Template tpl;
    Eigen::MatrixXd units;
    if (!f.model.empty()) {
        const FullFaceModel model = io::load_model(f.model);
        tpl = model.face_template;
        units = model.aus;
        if (!f.aus.empty()) units = load_au_source(f.aus).units;
    } else if (!f.aus.empty()) {
        units = load_au_source(f.aus).units;
        tpl = standardize_dataset(input.load(), input.options(c)).face_template;
    } else {
        throw Error(ErrorKind::ConfigError, "one of --model or --aus is required");
    }

    io::AuSvgOptions o;
    o.scale = f.scale;
    o.arrow_threshold = f.threshold;
    for (Eigen::Index j = 0; j < units.cols(); ++j) {
        char name[32];
        std::snprintf(name, sizeof(name), "au_%02d.svg", static_cast<int>(j + 1));
        o.title = "AU " + std::to_string(j + 1);
        io::write_text_file(c.output_dir / name, io::export_au_svg(units.col(j), tpl.coords, tpl.validity, o));
    }
    o.title.clear();
    io::write_text_file(c.output_dir / "au_gallery.svg",
                        io::export_au_gallery(units, tpl.coords, tpl.validity, o, f.columns));
    std::cout << "wrote " << units.cols() << " AU figures and au_gallery.svg -> " << c.output_dir.string() << '\n';
    return 0;
}

int run_compare(const CommonFlags& common, const InputFlags& input, const std::vector<std::string>& sources,
                int pca_components, const std::string& prefix) {
    io::RunConfig c = common.resolve();
    c.validate();
    std::vector<AuMatrix> sets;
    std::optional<Template> tpl;
    for (const std::string& s : sources) {
        // A model archive carries the template its AUs live in; reuse it so units and data agree.
        const std::size_t eq = s.find('=');
        const std::string path = (eq != std::string::npos && !fs::exists(s)) ? s.substr(eq + 1) : s;
        if (!tpl && io::read_text_file(path).find("\nkind: model\n") != std::string::npos) {
            tpl = io::load_model(path).face_template;
        }
        sets.push_back(load_au_source(s));
    }
    StandardizeOptions so = input.options(c);
    so.fixed_template = tpl;
    const PreparedKpms prepared = prepare_kpms(input.load(), so);
    print_warnings(prepared.warnings);
    if (pca_components > 0) {
        PcaOptions po;
        po.components = pca_components;
        sets.push_back({"pca" + std::to_string(pca_components), fit_pca_baseline(prepared.matrix.data, po).expanded,
                        AuProvenance::PcaExpanded});
    }
    if (sets.empty()) throw Error(ErrorKind::ConfigError, "no AU sources: give --source and/or --pca-components");

    const std::vector<AuSetCurves> curves = compare_au_sets(prepared.matrix.data, sets, default_l1_grid(), c.threads);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        write_curves(c.output_dir, prefix + "_" + std::to_string(i + 1) + "_" + curves[i].name, curves[i]);
    }
    write_plots(c.output_dir, prefix, curves);
    const std::string table = comparison_table(curves);
    io::write_text_file(c.output_dir / (prefix + ".csv"), table);
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven facial expression coding: learn, encode and evaluate keypoint action units"};
    app.set_version_flag("--version", std::string(DFECS_VERSION));
    app.require_subcommand(1);

    // Each subcommand owns its flag storage so option handles stay tied to the right parser.
    CommonFlags std_common, fit_common, enc_common, eval_common, vis_common, cmp_common;
    InputFlags std_input, fit_input, enc_input, vis_input, cmp_input;
    int status = 0;

    auto* standardize = app.add_subcommand("standardize", "Register keypoint frames and write a standardized CSV");
    std::string std_output;
    std_common.attach(standardize);
    std_input.attach(standardize, false);
    standardize->add_option("--output,-o", std_output, "Output CSV (default: <output-dir>/standardized.csv)");

    auto* fit = app.add_subcommand("fit", "Learn action units from keypoint frames and write a model archive");
    FitFlags fit_flags;
    fit_common.attach(fit);
    fit_input.attach(fit, true);
    fit_flags.beta_opt = fit->add_option("--beta", fit_flags.beta, "Allowed VE shortfall; targets 100(1-beta)");
    fit->add_option("--grid", fit_flags.grid, "Hyperparameter grid preset")
        ->check(CLI::IsMember({"default", "paper-si", "custom"}));
    fit_flags.sample_opt = fit->add_option("--sample-count", fit_flags.sample_count, "Random subsample of KPM columns");
    fit_flags.iter_opt = fit->add_option("--max-iterations", fit_flags.max_iterations, "Solver iteration cap");
    fit_flags.tol_opt = fit->add_option("--tolerance", fit_flags.tolerance, "Relative objective tolerance");
    fit->add_option("--pca-components", fit_flags.pca_components, "Also store a PCA baseline with this many components");
    fit->add_option("--output,-o", fit_flags.output, "Archive path (default: <output-dir>/model.dfecs)");

    auto* encode = app.add_subcommand("encode", "Encode frames against learned or external action units");
    EncodeFlags enc_flags;
    enc_common.attach(encode);
    enc_input.attach(encode, true);
    auto* enc_model = encode->add_option("--model", enc_flags.model, "Model archive")->check(CLI::ExistingFile);
    encode->add_option("--aus", enc_flags.aus, "External AU matrix ([name=]path)")->excludes(enc_model);
    enc_flags.alpha_opt = encode->add_option("--alpha", enc_flags.alpha, "Encoding alpha for the written codes");
    encode->add_option("--prefix", enc_flags.prefix, "Output file prefix");

    auto* evaluate = app.add_subcommand("evaluate", "Summarize curves and compute the interpretability metric");
    std::vector<std::string> eval_curves;
    std::string eval_labels, eval_output;
    eval_common.attach(evaluate);
    evaluate->add_option("--curve", eval_curves, "Curve file written by encode/compare")->check(CLI::ExistingFile);
    evaluate->add_option("--labels", eval_labels, "Interpretability votes CSV")->check(CLI::ExistingFile);
    evaluate->add_option("--output,-o", eval_output, "Report path (default: <output-dir>/report.txt)");

    auto* visualize = app.add_subcommand("visualize", "Draw action units as keypoint arrows (SVG)");
    VisualizeFlags vis_flags;
    vis_common.attach(visualize);
    vis_input.attach(visualize, true);
    auto* vis_model = visualize->add_option("--model", vis_flags.model, "Model archive")->check(CLI::ExistingFile);
    visualize->add_option("--aus", vis_flags.aus, "AU matrix to draw ([name=]path)");
    visualize->add_option("--scale", vis_flags.scale, "Displacement magnification");
    visualize->add_option("--threshold", vis_flags.threshold, "Minimum drawn displacement for an arrow");
    visualize->add_option("--columns", vis_flags.columns, "Gallery columns");
    (void)vis_model;

    auto* compare = app.add_subcommand("compare", "Compare several AU sources on the same data");
    std::vector<std::string> cmp_sources;
    int cmp_pca = 0;
    std::string cmp_prefix = "compare";
    cmp_common.attach(compare);
    cmp_input.attach(compare, true);
    compare->add_option("--source", cmp_sources, "AU source ([name=]path to a model archive or AU matrix)");
    compare->add_option("--pca-components", cmp_pca, "Add a PCA baseline [U -U] fitted on the data");
    compare->add_option("--prefix", cmp_prefix, "Output file prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        report_error("UsageError", e.what());
        return kUsageExit;
    }

    try {
        if (*standardize) status = run_standardize(std_common, std_input, std_output);
        else if (*fit) status = run_fit(fit_common, fit_input, fit_flags);
        else if (*encode) status = run_encode(enc_common, enc_input, enc_flags);
        else if (*evaluate) status = run_evaluate(eval_common, eval_curves, eval_labels, eval_output);
        else if (*visualize) status = run_visualize(vis_common, vis_input, vis_flags);
        else if (*compare) status = run_compare(cmp_common, cmp_input, cmp_sources, cmp_pca, cmp_prefix);
    } catch (const Error& e) {
        report_error(to_string(e.kind()), e.detail());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        report_error("InternalError", e.what());
        return kInternalExit;
    }
    return status;
}
