#include <doctest.h>

#include <numbers>
#include <random>

#include "dfecs/error.hpp"
#include "dfecs/geometry.hpp"
#include "support/fixtures.hpp"

using namespace dfecs;
using namespace dfecs::testing;

namespace {

Template face_template() { return make_template(make_frame("ref", 0, true, synthetic_face())); }

double max_diff(const Points& a, const Points& b) { return (a - b).cwiseAbs().maxCoeff(); }

double anchor_residual(const Points& coords, const AnchorSet& anchors) {
    double r = 0;
    for (std::size_t a = 0; a < anchors.indices.size(); ++a) {
        r += (coords.col(anchors.indices[a]) - anchors.template_coords.col(static_cast<Eigen::Index>(a))).squaredNorm();
    }
    return r;
}

RawFrame mapped(const RawFrame& f, const Eigen::Matrix2d& m, const Eigen::Vector2d& t) {
    AffineParams p;
    p.linear = m;
    p.translation = t;
    return apply_affine(f, p);
}

}  // namespace

TEST_CASE("make_template centres the anchors and fixes their RMS radius") {
    const Template tpl = face_template();
    Eigen::Matrix2Xd anchors(2, 6);
    for (int a = 0; a < 6; ++a) anchors.col(a) = tpl.coords.col(kDefaultAffineAnchors[static_cast<std::size_t>(a)]);
    CHECK(anchors.rowwise().mean().norm() < 1e-12);
    CHECK(std::sqrt(anchors.squaredNorm() / 6.0) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("estimate_affine: identical anchors give the identity") {
    const Template tpl = face_template();
    const AnchorSet anchors = AnchorSet::from_template(kDefaultAffineAnchors, tpl);
    const AffineParams p = estimate_affine(tpl.coords, tpl.validity, anchors);
    CHECK((p.linear - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(p.translation.norm() < 1e-10);
}

TEST_CASE("estimate_affine: recovers the inverse of a known map") {
    const Template tpl = face_template();
    const AnchorSet anchors = AnchorSet::from_template(kDefaultAffineAnchors, tpl);
    const RawFrame frame = mapped(make_frame("s", 1, false, tpl.coords), 2.0 * Eigen::Matrix2d::Identity(),
                                  Eigen::Vector2d(10.0, 5.0));
    const AffineParams p = estimate_affine(frame, anchors);
    CHECK((p.linear - 0.5 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((p.translation - Eigen::Vector2d(-5.0, -2.5)).norm() < 1e-10);
    CHECK(anchor_residual(apply_affine(frame, p).coords, anchors) < 1e-9);
}

TEST_CASE("estimate_affine: never worse than the identity on perturbed anchors") {
    const Template tpl = face_template();
    const AnchorSet anchors = AnchorSet::from_template(kDefaultAffineAnchors, tpl);
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const RawFrame frame = make_frame("s", 1, false, perturb(tpl.coords, rng, 3.0));
        const AffineParams p = estimate_affine(frame, anchors);
        CHECK(anchor_residual(apply_affine(frame, p).coords, anchors) <= anchor_residual(frame.coords, anchors) + 1e-12);
    }
}

TEST_CASE("estimate_affine: collinear or missing anchors are rejected") {
    const Template tpl = face_template();
    const AnchorSet anchors = AnchorSet::from_template(kDefaultAffineAnchors, tpl);
    Points flat = tpl.coords;
    flat.row(1).setZero();
    CHECK_THROWS_AS(estimate_affine(make_frame("s", 0, false, flat), anchors), Error);
    try {
        estimate_affine(make_frame("s", 0, false, flat), anchors);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateAnchors);
    }
    RawFrame missing = make_frame("s", 0, false, tpl.coords);
    missing.validity.reset(33);
    try {
        estimate_affine(missing, anchors);
        FAIL("expected MissingAnchor");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingAnchor);
    }
}

TEST_CASE("apply_affine: identity, translation and inverse round trip") {
    std::mt19937_64 rng(4);
    RawFrame f = make_frame("s", 0, false, perturb(synthetic_face(), rng, 1.0));
    f.validity.reset(5);
    f.coords.col(5).setZero();
    CHECK(max_diff(apply_affine(f, AffineParams{}).coords, f.coords) == 0.0);

    AffineParams shift;
    shift.translation = Eigen::Vector2d(1.0, 2.0);
    const RawFrame moved = apply_affine(f, shift);
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (i == 5) {
            CHECK(moved.coords.col(i).isZero(0.0));
        } else {
            CHECK((moved.coords.col(i) - f.coords.col(i) - Eigen::Vector2d(1.0, 2.0)).norm() < 1e-12);
        }
    }

    AffineParams p;
    p.linear = random_invertible(rng);
    p.translation = Eigen::Vector2d(3.0, -7.0);
    CHECK(max_diff(apply_affine(apply_affine(f, p), p.inverse()).coords, f.coords) < 1e-12);
}

TEST_CASE("estimate_similarity: identity and a 90 degree rotation with scale 3") {
    const Template tpl = face_template();
    const std::array<int, 2> idx = {42, 45};
    Eigen::Matrix2Xd targets(2, 2);
    targets << tpl.coords.col(42), tpl.coords.col(45);
    const SimilarityParams same = estimate_similarity(tpl.coords, tpl.validity, idx, targets);
    CHECK(same.scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(same.angle) < 1e-12);
    CHECK(same.translation.norm() < 1e-10);

    Eigen::Matrix2d rot;
    rot << 0.0, -1.0, 1.0, 0.0;
    const Points turned = 3.0 * rot * tpl.coords;
    const SimilarityParams back = estimate_similarity(turned, tpl.validity, idx, targets);
    CHECK(back.scale == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(back.angle == doctest::Approx(-std::numbers::pi / 2).epsilon(1e-12));
    for (int i : idx) CHECK((back(turned.col(i)) - tpl.coords.col(i)).norm() < 1e-9);
}

TEST_CASE("estimate_similarity: too few or coincident anchors") {
    const Template tpl = face_template();
    const std::array<int, 2> idx = {42, 45};
    Eigen::Matrix2Xd targets(2, 2);
    targets << tpl.coords.col(42), tpl.coords.col(45);
    ValidityMask one = tpl.validity;
    one.reset(45);
    try {
        estimate_similarity(tpl.coords, one, idx, targets);
        FAIL("expected InsufficientAnchors");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientAnchors);
    }
    Points same = tpl.coords;
    same.col(45) = same.col(42);
    try {
        estimate_similarity(same, tpl.validity, idx, targets);
        FAIL("expected CoincidentAnchors");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CoincidentAnchors);
    }
}

TEST_CASE("standardize_frame: the template maps to itself") {
    const Template tpl = face_template();
    const StandardizedFrame s = standardize_frame(make_frame("s", 0, true, tpl.coords), tpl);
    CHECK(max_diff(s.coords, tpl.coords) < 1e-9);
    CHECK(s.warnings.empty());
}

TEST_CASE("standardize_frame: invariant to a prior affine map") {
    const Template tpl = face_template();
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
        const RawFrame f = make_frame("s", 1, false, perturb(synthetic_face(), rng, 4.0));
        const Eigen::Vector2d shift = gaussian(2, 1, rng, 50.0);
        const RawFrame g = mapped(f, random_invertible(rng), shift);
        CHECK(max_diff(standardize_frame(g, tpl).coords, standardize_frame(f, tpl).coords) < 1e-9);
    }
}

TEST_CASE("standardize_frame: idempotent when the affine anchors are an affine image of the template") {
    const Template tpl = face_template();
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        Points p = perturb(tpl.coords, rng, 3.0);
        for (int i : kDefaultAffineAnchors) p.col(i) = tpl.coords.col(i);
        const RawFrame f = mapped(make_frame("s", 1, false, p), random_invertible(rng), gaussian(2, 1, rng, 20.0));
        const StandardizedFrame once = standardize_frame(f, tpl);
        const StandardizedFrame twice = standardize_frame(to_raw(once), tpl);
        CHECK(max_diff(once.coords, twice.coords) < 1e-9);
    }
}

TEST_CASE("standardize_frame: missing jawline switches anchors and skips the jaw step") {
    const Template tpl = face_template();
    RawFrame f = make_frame("s", 1, false, synthetic_face());
    for (int i = 0; i <= 16; ++i) {
        f.validity.reset(static_cast<std::size_t>(i));
        f.coords.col(i).setZero();
    }
    const StandardizedFrame s = standardize_frame(f, tpl);
    bool switched = false, skipped = false;
    for (const auto& w : s.warnings) {
        switched |= w.find("no-jawline") != std::string::npos;
        skipped |= w.find("jawline") != std::string::npos && w.find("skipped") != std::string::npos;
    }
    CHECK(switched);
    CHECK(skipped);
    for (int i = 0; i <= 16; ++i) CHECK(s.coords.col(i).isZero(0.0));
    for (int i : kNoJawlineAffineAnchors) CHECK((s.coords.col(i) - tpl.coords.col(i)).norm() < 1e-6);
}

TEST_CASE("standardize_frame: frontalization hook runs first") {
    const Template tpl = face_template();
    StandardizeConfig config;
    int calls = 0;
    config.frontalize = [&](const Points& p) {
        ++calls;
        return p;
    };
    standardize_frame(make_frame("s", 0, false, synthetic_face()), tpl, config);
    CHECK(calls == 1);
}
