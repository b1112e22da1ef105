#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include "dfecs/error.hpp"
#include "dfecs/ffm.hpp"
#include "dfecs/io/archive.hpp"
#include "dfecs/io/csv.hpp"
#include "dfecs/io/run_config.hpp"
#include "dfecs/io/svg.hpp"
#include "support/fixtures.hpp"

using namespace dfecs;
using namespace dfecs::testing;

namespace {

std::string header() {
    std::string h = "subject,frame,is_neutral";
    for (int i = 0; i < kNumKeypoints; ++i) h += ",x" + std::to_string(i) + ",y" + std::to_string(i);
    return h + "\n";
}

std::string row(const std::string& subject, int frame, int neutral, const Points& p) {
    std::ostringstream out;
    out.precision(17);
    out << subject << ',' << frame << ',' << neutral;
    for (int i = 0; i < kNumKeypoints; ++i) out << ',' << p(0, i) << ',' << p(1, i);
    return out.str() + "\n";
}

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

const FullFaceModel& small_model() {
    static const FullFaceModel model = [] {
        const PlantedModel pm = planted_model(150, 21, 3, 3, 0.01);
        FitOptions o;
        o.solver.max_iterations = 100;
        o.solver.tolerance = 1e-8;
        FullFaceModel m = fit_ffm(pm.data, 0.1, GridSpec::defaults(), o);
        m.face_template = make_template(make_frame("ref", 0, true, synthetic_face()));
        m.pca_expanded = fit_pca_baseline(pm.data).expanded;
        return m;
    }();
    return model;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "dfecs_io_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("keypoint CSV: all-zero row and an empty cell") {
    const Points face = synthetic_face();
    std::string text = header() + row("s", 0, 1, face) + row("s", 1, 0, Points::Zero());
    std::string third = row("s", 2, 0, face);
    // Blank out x48 (column 3 + 96).
    std::vector<std::string> cells;
    std::stringstream ss(third.substr(0, third.size() - 1));
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    cells[3 + 96] = "";
    std::string joined;
    for (std::size_t i = 0; i < cells.size(); ++i) joined += (i ? "," : "") + cells[i];
    text += joined + "\n";

    const auto frames = io::parse_keypoints_csv(text);
    REQUIRE(frames.size() == 3);
    CHECK(frames[0].is_neutral);
    CHECK(frames[0].validity.all());
    CHECK(frames[1].validity.none());
    CHECK_FALSE(frames[2].validity[48]);
    CHECK(frames[2].validity.count() == 67);
    CHECK(frames[2].coords.col(48).isZero(0.0));
}

TEST_CASE("keypoint CSV: schema, parse and layout errors") {
    CHECK(kind_of([] { io::parse_keypoints_csv("subject,frame\ns,0\n"); }) == ErrorKind::SchemaError);
    const std::string good = row("s", 0, 1, synthetic_face());
    CHECK(kind_of([&] { io::parse_keypoints_csv(header() + "s,zero" + good.substr(good.find(',', 2))); }) ==
          ErrorKind::ParseError);
    try {
        io::parse_keypoints_csv(header() + "s,0,1,abc\n", "faces.csv");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("faces.csv:2") != std::string::npos);
    }
    CHECK(kind_of([&] { io::parse_keypoints_csv("# layout=xy-blocks\n" + header() + good); }) ==
          ErrorKind::SchemaError);
    CHECK(io::parse_keypoints_csv("# layout=interleaved-xy-68\n" + header() + good).size() == 1);
    // Windows line endings and a byte order mark are tolerated.
    std::string crlf = "\xEF\xBB\xBF" + header() + good;
    for (std::size_t pos = 0; (pos = crlf.find('\n', pos)) != std::string::npos; pos += 2) crlf.insert(pos, "\r");
    CHECK(io::parse_keypoints_csv(crlf).size() == 1);
}

TEST_CASE("keypoint CSV: standardized frames round trip") {
    std::mt19937_64 rng(3);
    StandardizedFrame f;
    f.subject_id = "subj 1";
    f.frame_index = 4;
    f.is_neutral = true;
    f.coords = perturb(synthetic_face(), rng, 0.3);
    f.validity.set();
    f.validity.reset(7);
    f.coords.col(7).setZero();
    std::ostringstream out;
    io::write_keypoints_csv(out, {f});
    const auto back = io::parse_keypoints_csv(out.str());
    REQUIRE(back.size() == 1);
    CHECK(back[0].subject_id == f.subject_id);
    CHECK(back[0].frame_index == 4);
    CHECK(back[0].is_neutral);
    CHECK(back[0].coords == f.coords);
    CHECK(back[0].validity == f.validity);
}

TEST_CASE("interpretability labels and curve files parse back") {
    const auto rec = io::parse_interpretability_labels("unit,a,b,c\nAU1,i,ni,yes\nAU2,0,no,non-interpretable\n");
    CHECK(rec.unit_names == std::vector<std::string>{"AU1", "AU2"});
    CHECK(rec.labels[0] == std::vector<bool>{true, false, true});
    CHECK(rec.labels[1] == std::vector<bool>{false, false, false});
    CHECK_THROWS_AS(io::parse_interpretability_labels("unit,a,b,c\nAU1,i,maybe,i\n"), Error);

    VarianceCurve c;
    c.axis = CurveAxis::L1Norm;
    c.axis_values = {0.0, 0.1, 3.5};
    c.mean_ve = {0.0, 12.25, 99.125};
    c.sample_counts = {4, 4, 4};
    const VarianceCurve back = io::parse_curve_delimited(curve_to_delimited(c));
    CHECK(back.axis == CurveAxis::L1Norm);
    CHECK(back.axis_values == c.axis_values);
    CHECK(back.mean_ve == c.mean_ve);
    CHECK(back.sample_counts == c.sample_counts);
}

TEST_CASE("archive: bit-exact round trip and deterministic bytes") {
    const FullFaceModel& m = small_model();
    const std::string text = io::serialize_model(m);
    CHECK(text.rfind("dfecs-archive 1\n", 0) == 0);
    CHECK(text.find("layout: interleaved-xy-68") != std::string::npos);
    const FullFaceModel back = io::parse_model(text);
    CHECK(back.part_basis == m.part_basis);
    CHECK(back.hier_basis == m.hier_basis);
    CHECK(back.encoding == m.encoding);
    CHECK(back.aus == m.aus);
    CHECK(back.face_template.coords == m.face_template.coords);
    REQUIRE(back.pca_expanded.has_value());
    CHECK(*back.pca_expanded == *m.pca_expanded);
    CHECK(back.beta == m.beta);
    CHECK(back.ve_train == m.ve_train);
    CHECK(back.hier.rank == m.hier.rank);
    CHECK(io::serialize_model(back) == text);

    const auto path = scratch("model.dfecs");
    io::save_model(m, path);
    CHECK(io::read_text_file(path) == text);
    CHECK(io::load_model(path).aus == m.aus);
}

TEST_CASE("archive: corruption, version and consistency failures") {
    const std::string text = io::serialize_model(small_model());

    std::string flipped = text;
    const std::size_t pos = flipped.find("matrix U ");
    const std::size_t digit = flipped.find_first_of("123456789", flipped.find('\n', pos) + 1);
    flipped[digit] = flipped[digit] == '9' ? '8' : '9';
    CHECK(kind_of([&] { io::parse_model(flipped); }) == ErrorKind::ChecksumMismatch);

    CHECK(kind_of([&] { io::parse_model(text.substr(0, text.size() / 2)); }) == ErrorKind::ChecksumMismatch);

    std::string future = text;
    future.replace(0, 15, "dfecs-archive 2");
    CHECK(kind_of([&] { io::parse_model(future); }) == ErrorKind::VersionUnsupported);

    FullFaceModel broken = small_model();
    broken.aus(3, 0) += 0.5;
    CHECK(kind_of([&] { io::parse_model(io::serialize_model(broken)); }) == ErrorKind::InconsistentModel);
}

TEST_CASE("AU matrix files: shapes and model archives") {
    std::mt19937_64 rng(5);
    for (Eigen::Index k : {26, 113}) {
        const AuMatrix facs{"facs", gaussian(kKpmDim, k, rng), AuProvenance::ExternalFacs};
        const AuMatrix back = io::parse_au_matrix(io::serialize_au_matrix(facs));
        CHECK(back.units == facs.units);
        CHECK(back.name == "facs");
        CHECK(back.provenance == AuProvenance::ExternalFacs);
    }
    const AuMatrix bad{"bad", gaussian(135, 4, rng), AuProvenance::Other};
    CHECK(kind_of([&] { io::parse_au_matrix(io::serialize_au_matrix(bad)); }) == ErrorKind::ShapeError);

    const AuMatrix from_model = io::parse_au_matrix(io::serialize_model(small_model()));
    CHECK(from_model.units == small_model().aus);
    CHECK(from_model.provenance == AuProvenance::Dfecs);

    const auto path = scratch("facs.aus");
    io::save_au_matrix(AuMatrix{"x", gaussian(kKpmDim, 3, rng), AuProvenance::Other}, path);
    CHECK(io::load_external_au_matrix(path).units.cols() == 3);
    CHECK(kind_of([] { io::load_external_au_matrix("/nonexistent/file.aus"); }) == ErrorKind::IoError);
}

TEST_CASE("AU svg: arrows only where keypoints move") {
    const Points face = synthetic_face();
    ValidityMask all;
    all.set();
    auto arrows = [](const std::string& svg) {
        std::size_t n = 0;
        for (std::size_t p = 0; (p = svg.find("class=\"arrow\"", p)) != std::string::npos; ++p) ++n;
        return n;
    };
    const std::string still = io::export_au_svg(Eigen::VectorXd::Zero(kKpmDim), face, all);
    CHECK(still.find("<svg") != std::string::npos);
    CHECK(arrows(still) == 0);

    Eigen::VectorXd one = Eigen::VectorXd::Zero(kKpmDim);
    one(2 * 30 + 1) = 0.5;
    const std::string moved = io::export_au_svg(one, face, all);
    CHECK(arrows(moved) == 1);
    CHECK(moved.find("#d62728") != std::string::npos);
    CHECK(moved.find("#2ca02c") != std::string::npos);
    CHECK(moved == io::export_au_svg(one, face, all));

    CHECK(kind_of([&] { io::export_au_svg(Eigen::VectorXd::Zero(10), face, all); }) == ErrorKind::ShapeError);

    std::mt19937_64 rng(6);
    const std::string gallery = io::export_au_gallery(gaussian(kKpmDim, 16, rng), face, all, {}, 4);
    std::size_t panels = 0;
    for (std::size_t p = 0; (p = gallery.find("<g ", p)) != std::string::npos; ++p) ++panels;
    CHECK(panels >= 16);
}

TEST_CASE("curve svg renders every named series") {
    VarianceCurve c;
    c.axis_values = {0.0, 1.0, 2.0};
    c.mean_ve = {0.0, 50.0, 90.0};
    c.sample_counts = {3, 3, 3};
    io::PlotOptions o;
    o.log_x = true;
    const std::string svg = io::render_curves_svg({{"alpha set", c}, {"beta set", c}}, o);
    CHECK(svg.find("alpha set") != std::string::npos);
    CHECK(svg.find("beta set") != std::string::npos);
}

TEST_CASE("run config: parsing, validation and the output directory") {
    const io::RunConfig c = io::parse_run_config(
        R"({"beta": 0.1, "grid": "paper-si", "seed": 7, "anchors": "no-jawline", "alpha": 0.5})");
    CHECK(c.beta == 0.1);
    CHECK(c.grid_preset == io::GridPreset::PaperSi);
    CHECK(c.solver.seed == 7);
    CHECK(c.anchors == AnchorChoice::NoJawline);
    CHECK(c.alpha == 0.5);
    CHECK_NOTHROW(c.validate());

    const io::RunConfig custom = io::parse_run_config(R"({"custom_grid": {"alphas": [1.0], "part_ranks": [2]}})");
    CHECK(custom.grid_preset == io::GridPreset::Custom);
    CHECK(custom.grid().alphas == std::vector<double>{1.0});

    CHECK(kind_of([] { io::parse_run_config(R"({"betta": 0.1})"); }) == ErrorKind::ConfigError);
    CHECK(kind_of([] { io::parse_run_config(R"({"beta": "high"})"); }) == ErrorKind::ConfigError);
    CHECK(kind_of([] { io::parse_run_config("{not json"); }) == ErrorKind::ConfigError);
    CHECK(kind_of([] { io::parse_run_config(R"({"beta": 1.5})").validate(); }) == ErrorKind::ConfigError);
    CHECK(kind_of([] { io::parse_run_config(R"({"grid": "huge"})"); }) == ErrorKind::ConfigError);

    ::setenv(io::kOutputDirEnv, "/tmp/dfecs-out", 1);
    CHECK(io::default_output_dir() == std::filesystem::path("/tmp/dfecs-out"));
    ::unsetenv(io::kOutputDirEnv);
    CHECK(io::default_output_dir() == std::filesystem::path("."));
}

TEST_CASE("dataset manifest: subjects, files and neutral overrides") {
    const Points face = synthetic_face();
    const auto dir = scratch("manifest");
    std::filesystem::create_directories(dir);
    io::write_text_file(dir / "a.csv", header() + row("a", 0, 0, face) + row("a", 1, 0, face) + row("z", 0, 1, face));
    io::write_text_file(dir / "m.json",
                        R"({"dataset": "toy", "template": "68-point", "frame_rate": 30,
                            "subjects": [{"id": "a", "files": ["a.csv"], "neutral_frame": 1}]})");
    const auto manifest = io::DatasetManifest::load(dir / "m.json");
    CHECK(manifest.name == "toy");
    const auto frames = io::load_keypoints(manifest);
    REQUIRE(frames.size() == 2);
    CHECK_FALSE(frames[0].is_neutral);
    CHECK(frames[1].is_neutral);

    io::write_text_file(dir / "bad.json", R"({"dataset": "toy", "template": "5-point", "subjects": []})");
    CHECK_THROWS_AS(io::DatasetManifest::load(dir / "bad.json"), Error);
}
