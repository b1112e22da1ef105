#pragma once

// Shared test fixtures and independent oracles. Nothing here calls the solvers under test.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dfecs/geometry.hpp"
#include "dfecs/layout.hpp"

namespace dfecs::testing {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
    return m;
}

inline Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = 0.0,
                               double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
    return m;
}

struct BruteForceResult {
    Eigen::VectorXd coef;
    double objective = std::numeric_limits<double>::infinity();
};

/// Exhaustive support enumeration for min ||y - U v||^2 + alpha ||v||_1 over v >= 0. Some optimum has a
/// support S with independent columns on which v_S solves G_SS v_S = U_S^T y - alpha/2 with v_S > 0, so
/// checking every such candidate finds the optimal value.
inline BruteForceResult brute_force_positive_lasso(const Eigen::MatrixXd& u, const Eigen::VectorXd& y, double alpha) {
    const Eigen::Index k = u.cols();
    BruteForceResult best;
    best.coef = Eigen::VectorXd::Zero(k);
    best.objective = y.squaredNorm();
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
        std::vector<Eigen::Index> s;
        for (Eigen::Index j = 0; j < k; ++j)
            if (mask & (1u << j)) s.push_back(j);
        const auto n = static_cast<Eigen::Index>(s.size());
        Eigen::MatrixXd us(u.rows(), n);
        for (Eigen::Index a = 0; a < n; ++a) us.col(a) = u.col(s[static_cast<std::size_t>(a)]);
        const Eigen::MatrixXd g = us.transpose() * us;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
        if (lu.rank() < n) continue;
        const Eigen::VectorXd vs = lu.solve(Eigen::VectorXd(us.transpose() * y - Eigen::VectorXd::Constant(n, alpha / 2)));
        if ((vs.array() <= 0.0).any()) continue;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
        for (Eigen::Index a = 0; a < n; ++a) v(s[static_cast<std::size_t>(a)]) = vs(a);
        const double obj = (y - u * v).squaredNorm() + alpha * v.sum();
        if (obj < best.objective) {
            best.objective = obj;
            best.coef = v;
        }
    }
    return best;
}

/// A frontal synthetic 68-point face in image convention (y grows downward), roughly 150 units wide.
inline Points synthetic_face() {
    Points p = Points::Zero();
    constexpr double pi = std::numbers::pi;
    for (int i = 0; i <= 16; ++i) {
        const double t = pi - pi * i / 16.0;
        p.col(i) << 72.0 * std::cos(t), 10.0 + 80.0 * std::sin(t);
    }
    for (int i = 0; i < 5; ++i) {
        const double t = i / 4.0;
        p.col(17 + i) << -60.0 + 45.0 * t, -45.0 - 8.0 * std::sin(pi * t);
        p.col(22 + i) << 15.0 + 45.0 * t, -45.0 - 8.0 * std::sin(pi * t);
    }
    for (int i = 0; i < 4; ++i) p.col(27 + i) << 0.0, -30.0 + 12.0 * i;
    for (int i = 0; i < 5; ++i) p.col(31 + i) << -14.0 + 7.0 * i, 18.0 + (i == 2 ? 2.0 : 0.0);
    const double eye_angles[6] = {180, 120, 60, 0, -60, -120};
    for (int i = 0; i < 6; ++i) {
        const double a = eye_angles[i] * pi / 180.0;
        p.col(36 + i) << -35.0 + 12.0 * std::cos(a), -25.0 - 5.0 * std::sin(a);
        p.col(42 + i) << 35.0 + 12.0 * std::cos(a), -25.0 - 5.0 * std::sin(a);
    }
    for (int i = 0; i < 12; ++i) {
        const double a = pi - 2.0 * pi * i / 12.0;
        p.col(48 + i) << 30.0 * std::cos(a), 50.0 - 12.0 * std::sin(a);
    }
    for (int i = 0; i < 8; ++i) {
        const double a = pi - 2.0 * pi * i / 8.0;
        p.col(60 + i) << 18.0 * std::cos(a), 50.0 - 5.0 * std::sin(a);
    }
    return p;
}

inline RawFrame make_frame(const std::string& subject, std::size_t index, bool neutral, const Points& coords) {
    RawFrame f;
    f.subject_id = subject;
    f.frame_index = index;
    f.is_neutral = neutral;
    f.coords = coords;
    f.validity.set();
    return f;
}

/// Random invertible 2x2 map with condition number kept moderate.
inline Eigen::Matrix2d random_invertible(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        Eigen::Matrix2d m;
        m << 1.0 + 0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng), 1.0 + 0.5 * u(rng);
        m *= 0.5 + 1.5 * std::abs(u(rng));
        if (u(rng) < 0) m.col(0) *= -1.0;  // reflections are affine maps too
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(m);
        if (svd.singularValues()(1) > 0.2 * svd.singularValues()(0)) return m;
    }
}

/// Small random expression: each keypoint moves by Gaussian noise of the given size.
inline Points perturb(const Points& p, std::mt19937_64& rng, double sd) {
    return p + gaussian(2, kNumKeypoints, rng, sd);
}

/// Ground truth of a planted two-level model X = U A B + noise.
struct PlantedModel {
    Eigen::MatrixXd data;    // 136 x m
    Eigen::MatrixXd clean;   // U A B
    Eigen::MatrixXd atoms;   // U: 136 x (7 * atoms_per_part), unit columns
    Eigen::MatrixXd factors; // A: atoms x q, nonnegative
    Eigen::MatrixXd codes;   // B: q x m, nonnegative
};

/// Seven parts with `atoms_per_part` unit atoms each, `q` nonnegative equal-energy cross-part factors, sparse
/// nonnegative activations and Gaussian noise whose standard deviation is `noise` times the RMS of the
/// clean entries.
inline PlantedModel planted_model(Eigen::Index m, std::uint64_t seed, int atoms_per_part = 5, int q = 8,
                                  double noise = 0.01) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PlantedModel pm;
    const int k = 7 * atoms_per_part;
    pm.atoms = Eigen::MatrixXd::Zero(kKpmDim, k);
    for (std::size_t f = 0; f < kAllParts.size(); ++f) {
        const FacePart part = kAllParts[f];
        for (int a = 0; a < atoms_per_part; ++a) {
            Eigen::VectorXd v = gaussian(part_dim(part), 1, rng);
            pm.atoms.col(static_cast<Eigen::Index>(f) * atoms_per_part + a).segment(part_row_offset(part), part_dim(part)) =
                v / v.norm();
        }
    }
    // Factor j uses one random atom in each part it touches (probability 0.6, at least two parts).
    // Factors with identical supports are redrawn so the q factors are genuinely distinct.
    pm.factors = Eigen::MatrixXd::Zero(k, q);
    std::uniform_int_distribution<int> atom(0, atoms_per_part - 1);
    for (int j = 0; j < q; ++j) {
        for (bool accepted = false; !accepted;) {
            int used = 0;
            pm.factors.col(j).setZero();
            for (int f = 0; f < 7; ++f) {
                if (unit(rng) < 0.6) {
                    pm.factors(f * atoms_per_part + atom(rng), j) = 0.5 + unit(rng);
                    ++used;
                }
            }
            accepted = used >= 2;
            for (int i = 0; i < j && accepted; ++i) {
                accepted = ((pm.factors.col(i).array() > 0) != (pm.factors.col(j).array() > 0)).any();
            }
        }
    }
    // Equal energy per factor: every column of U A has unit norm, so no planted factor hides below the
    // variance tolerance of the model selection.
    for (int j = 0; j < q; ++j) pm.factors.col(j) /= (pm.atoms * pm.factors.col(j)).norm();
    pm.codes = Eigen::MatrixXd::Zero(q, m);
    std::exponential_distribution<double> ex(1.0);
    std::uniform_int_distribution<int> pick(0, q - 1);
    for (Eigen::Index s = 0; s < m; ++s) {
        for (int j = 0; j < q; ++j)
            if (unit(rng) < 0.25) pm.codes(j, s) = 1.0 + 4.0 * ex(rng);
        if (pm.codes.col(s).sum() == 0.0) pm.codes(pick(rng), s) = 1.0 + 4.0 * ex(rng);
    }
    pm.clean = pm.atoms * pm.factors * pm.codes;
    const double rms = std::sqrt(pm.clean.squaredNorm() / static_cast<double>(pm.clean.size()));
    pm.data = pm.clean + gaussian(kKpmDim, m, rng, noise * rms);
    return pm;
}

}  // namespace dfecs::testing
