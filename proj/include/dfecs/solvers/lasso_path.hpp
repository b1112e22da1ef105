#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "dfecs/solvers/positive_lasso.hpp"

namespace dfecs {

/// Piecewise-linear positive-lasso solution path in alpha (objective ||y - U v||^2 + alpha ||v||_1).
///
/// Knots run from the entry threshold alpha_max = 2 max_j u_j^T y down to alpha = 0; coefficients are
/// linear between consecutive knots and zero for alpha >= alpha_max. When y has no positive correlation
/// with any column the path is the single knot alpha = 0 with zero coefficients.
template <class Scalar>
struct LassoPath {
    std::vector<Scalar> breakpoints;
    /// One column per breakpoint.
    Matrix<Scalar> coefficients;
    /// active_sets[i] is the support on the open segment (breakpoints[i+1], breakpoints[i]).
    std::vector<std::vector<Eigen::Index>> active_sets;
    /// Set when a rank-deficient active set stopped the homotopy; the last segment is then not exact.
    bool degenerate = false;

    Eigen::Index num_knots() const { return static_cast<Eigen::Index>(breakpoints.size()); }

    Vector<Scalar> at(Scalar alpha) const {
        const Eigen::Index n = num_knots();
        if (alpha >= breakpoints.front()) return coefficients.col(0);
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            const Scalar hi = breakpoints[static_cast<std::size_t>(i)];
            const Scalar lo = breakpoints[static_cast<std::size_t>(i + 1)];
            if (alpha >= lo) {
                const Scalar t = hi > lo ? (hi - alpha) / (hi - lo) : Scalar(1);
                return ((Scalar(1) - t) * coefficients.col(i) + t * coefficients.col(i + 1)).cwiseMax(Scalar(0));
            }
        }
        return coefficients.col(n - 1);
    }

    Eigen::Index support_size(Eigen::Index knot) const {
        return (coefficients.col(knot).array() > Scalar(0)).count();
    }
};

namespace detail {

template <class Scalar>
bool active_solve(const Matrix<Scalar>& gram, const std::vector<Eigen::Index>& active, const Vector<Scalar>& rhs,
                  Vector<Scalar>& out) {
    return solve_block(gram, active, rhs, out);
}

}  // namespace detail

/// Homotopy (LARS with the lasso and positivity modifications) on the Gram form G = U^T U, b = U^T y.
/// Variables enter when their correlation 2 (b - G v)_j reaches alpha and leave when their coefficient
/// reaches zero; simultaneous entries go to the lower index first.
template <class Scalar>
LassoPath<Scalar> positive_lasso_path_gram(const Matrix<Scalar>& gram, const Vector<Scalar>& b) {
    detail::require_finite(gram, "Gram matrix");
    detail::require_finite(b, "correlation vector");
    const Eigen::Index k = gram.rows();
    const Scalar scale = std::max<Scalar>(Scalar(1), std::max(gram.diagonal().cwiseAbs().maxCoeff(),
                                                              b.size() ? b.cwiseAbs().maxCoeff() : Scalar(0)));
    const Scalar eps = Scalar(1e-12) * scale;

    LassoPath<Scalar> path;
    std::vector<Vector<Scalar>> knots;
    auto push_knot = [&](Scalar alpha, const Vector<Scalar>& v) {
        path.breakpoints.push_back(alpha);
        knots.push_back(v);
    };
    auto finish = [&]() {
        path.coefficients.resize(k, static_cast<Eigen::Index>(knots.size()));
        for (std::size_t i = 0; i < knots.size(); ++i) path.coefficients.col(static_cast<Eigen::Index>(i)) = knots[i];
        return path;
    };

    Vector<Scalar> v = Vector<Scalar>::Zero(k);
    Scalar alpha = k ? Scalar(2) * b.maxCoeff() : Scalar(0);
    if (!(alpha > eps)) {
        push_knot(Scalar(0), v);
        return finish();
    }

    std::vector<char> in_active(static_cast<std::size_t>(k), 0);
    std::vector<Eigen::Index> active;
    auto add = [&](Eigen::Index j) {
        in_active[static_cast<std::size_t>(j)] = 1;
        active.insert(std::upper_bound(active.begin(), active.end(), j), j);
    };
    auto remove = [&](Eigen::Index j) {
        in_active[static_cast<std::size_t>(j)] = 0;
        active.erase(std::find(active.begin(), active.end(), j));
        v(j) = 0;
    };

    push_knot(alpha, v);
    {
        const Vector<Scalar> corr = Scalar(2) * b;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (corr(j) >= alpha - eps) {
                add(j);
                break;  // lower index first; ties enter on the following zero-length step
            }
        }
    }

    Eigen::Index just_left = -1;
    const int max_steps = 8 * static_cast<int>(k) + 64;
    for (int step = 0; step < max_steps; ++step) {
        if (active.empty()) {
            path.degenerate = true;
            break;
        }
        Vector<Scalar> dir;
        const Vector<Scalar> half = Vector<Scalar>::Constant(static_cast<Eigen::Index>(active.size()), Scalar(0.5));
        if (!detail::active_solve(gram, active, half, dir)) {
            path.degenerate = true;
            break;
        }
        // Rate at which inactive correlations fall as alpha decreases (active ones fall at rate 1).
        Vector<Scalar> g_dir = Vector<Scalar>::Zero(k);
        for (std::size_t a = 0; a < active.size(); ++a) g_dir += dir(static_cast<Eigen::Index>(a)) * gram.col(active[a]);
        const Vector<Scalar> corr = Scalar(2) * (b - gram * v);

        Scalar delta = alpha;
        Eigen::Index entering = -1;
        Eigen::Index leaving = -1;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (in_active[static_cast<std::size_t>(j)] || j == just_left) continue;
            const Scalar rate = Scalar(2) * g_dir(j);
            const Scalar denom = Scalar(1) - rate;
            if (!(denom > Scalar(1e-12))) continue;
            const Scalar d = std::max(Scalar(0), (alpha - corr(j)) / denom);
            if (d < delta) {
                delta = d;
                entering = j;
            }
        }
        for (std::size_t a = 0; a < active.size(); ++a) {
            const Scalar w = dir(static_cast<Eigen::Index>(a));
            if (w < Scalar(0)) {
                const Scalar d = -v(active[a]) / w;
                if (d < delta) {
                    delta = d;
                    leaving = active[a];
                    entering = -1;
                }
            }
        }

        for (std::size_t a = 0; a < active.size(); ++a) v(active[a]) += delta * dir(static_cast<Eigen::Index>(a));
        alpha = std::max(Scalar(0), alpha - delta);
        just_left = -1;
        if (leaving >= 0) {
            remove(leaving);
            just_left = leaving;
        }
        if (entering >= 0) add(entering);
        if (entering < 0 && leaving < 0) alpha = 0;

        // Re-anchor the active coefficients on the exact stationarity system to stop drift.
        if (!active.empty()) {
            Vector<Scalar> rhs(static_cast<Eigen::Index>(active.size()));
            for (std::size_t a = 0; a < active.size(); ++a) rhs(static_cast<Eigen::Index>(a)) = b(active[a]) - alpha / 2;
            Vector<Scalar> exact;
            if (detail::active_solve(gram, active, rhs, exact)) {
                for (std::size_t a = 0; a < active.size(); ++a) {
                    v(active[a]) = std::max(Scalar(0), exact(static_cast<Eigen::Index>(a)));
                }
            }
        }

        if (delta > eps * Scalar(1e-3) || alpha == Scalar(0)) {
            push_knot(alpha, v);
        } else {
            knots.back() = v;
        }
        if (alpha == Scalar(0)) break;
    }

    if (path.breakpoints.back() > Scalar(0)) {
        // Homotopy could not continue: close the path with the exact alpha = 0 solution.
        path.degenerate = true;
        GramPositiveLasso<Scalar> solver(gram);
        push_knot(Scalar(0), solver.solve(b, Scalar(0), v));
    }

    finish();
    for (Eigen::Index i = 0; i + 1 < path.num_knots(); ++i) {
        std::vector<Eigen::Index> seg;
        const Vector<Scalar> mid = (path.coefficients.col(i) + path.coefficients.col(i + 1)) / Scalar(2);
        for (Eigen::Index j = 0; j < k; ++j) {
            if (mid(j) > Scalar(0)) seg.push_back(j);
        }
        path.active_sets.push_back(std::move(seg));
    }
    return path;
}

template <class DerivedU, class DerivedY>
LassoPath<typename DerivedU::Scalar> positive_lasso_path(const Eigen::MatrixBase<DerivedU>& design,
                                                         const Eigen::MatrixBase<DerivedY>& target) {
    using Scalar = typename DerivedU::Scalar;
    if (design.rows() != target.rows()) throw Error(ErrorKind::ShapeError, "design and target row counts differ");
    detail::require_finite(design, "design matrix");
    detail::require_finite(target, "target");
    return positive_lasso_path_gram<Scalar>(Matrix<Scalar>(design.transpose() * design),
                                            Vector<Scalar>(design.transpose() * target));
}

}  // namespace dfecs
