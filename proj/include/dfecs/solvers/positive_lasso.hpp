#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dfecs/error.hpp"

namespace dfecs {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

template <class Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
    if (!m.allFinite()) throw Error(ErrorKind::NonFinite, std::string(what) + " contains non-finite values");
}

/// Solves G_PP x = rhs for a PSD principal submatrix; returns false if the block is numerically singular.
template <class Scalar>
bool solve_block(const Matrix<Scalar>& gram, const std::vector<Eigen::Index>& idx, const Vector<Scalar>& rhs,
                 Vector<Scalar>& out) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Matrix<Scalar> block(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) block(a, b) = gram(idx[a], idx[b]);
    }
    Eigen::LDLT<Matrix<Scalar>> ldlt(block);
    if (ldlt.info() != Eigen::Success) return false;
    const auto d = ldlt.vectorD();
    const Scalar dmax = d.cwiseAbs().maxCoeff();
    if (!(dmax > Scalar(0)) || d.minCoeff() <= Scalar(1e-13) * dmax) return false;
    out = ldlt.solve(rhs);
    return out.allFinite();
}

}  // namespace detail

/// Positive lasso on a precomputed Gram matrix G = U^T U with b = U^T y:
///
///     minimize ||y - U v||^2 + alpha * ||v||_1  subject to v >= 0
///
/// Note the data term carries no 1/2 factor. Coordinate descent finds the support, then an active-set
/// phase (Lawson-Hanson with a linear term) finishes at a KKT point to rounding accuracy.
template <class Scalar>
class GramPositiveLasso {
public:
    explicit GramPositiveLasso(Matrix<Scalar> gram) : gram_(std::move(gram)) {
        detail::require_finite(gram_, "Gram matrix");
        scale_ = std::max<Scalar>(Scalar(1), gram_.diagonal().cwiseAbs().maxCoeff());
    }

    Eigen::Index size() const { return gram_.rows(); }
    const Matrix<Scalar>& gram() const { return gram_; }

    Vector<Scalar> solve(const Vector<Scalar>& b, Scalar alpha) const {
        return solve(b, alpha, Vector<Scalar>::Zero(size()));
    }

    Vector<Scalar> solve(const Vector<Scalar>& b, Scalar alpha, const Vector<Scalar>& warm) const {
        detail::require_finite(b, "correlation vector");
        if (!std::isfinite(static_cast<double>(alpha))) throw Error(ErrorKind::NonFinite, "alpha is not finite");
        if (alpha < Scalar(0)) throw Error(ErrorKind::ConfigError, "alpha must be nonnegative");
        // Half-gradient form: stationarity on the support is G v = c with c = b - alpha/2.
        const Vector<Scalar> c = b.array() - alpha / Scalar(2);
        const Scalar tol = Scalar(1e-12) * std::max(scale_, c.cwiseAbs().maxCoeff());

        Vector<Scalar> v = warm.cwiseMax(Scalar(0));
        Vector<Scalar> gv = gram_ * v;
        coordinate_descent(c, v, gv);
        active_set(c, tol, v);
        return v;
    }

private:
    void coordinate_descent(const Vector<Scalar>& c, Vector<Scalar>& v, Vector<Scalar>& gv) const {
        const Eigen::Index k = size();
        for (int sweep = 0; sweep < kCdSweeps; ++sweep) {
            Scalar max_step = 0;
            for (Eigen::Index j = 0; j < k; ++j) {
                const Scalar gjj = gram_(j, j);
                if (!(gjj > Scalar(0))) continue;
                const Scalar next = std::max(Scalar(0), v(j) + (c(j) - gv(j)) / gjj);
                const Scalar delta = next - v(j);
                if (delta != Scalar(0)) {
                    gv += delta * gram_.col(j);
                    v(j) = next;
                    max_step = std::max(max_step, std::abs(delta) * std::sqrt(gjj));
                }
            }
            if (max_step <= Scalar(1e-10) * std::sqrt(scale_)) break;
        }
    }

    void active_set(const Vector<Scalar>& c, Scalar tol, Vector<Scalar>& v) const {
        const Eigen::Index k = size();
        std::vector<char> passive(static_cast<std::size_t>(k), 0);
        for (Eigen::Index j = 0; j < k; ++j) passive[j] = v(j) > Scalar(0);

        std::vector<char> blocked(static_cast<std::size_t>(k), 0);
        Eigen::Index last_entered = -1;
        const int max_outer = 3 * static_cast<int>(k) + 50;
        for (int outer = 0; outer < max_outer; ++outer) {
            if (!make_stationary(c, passive, v)) break;
            if (last_entered >= 0) {
                // A variable dropped right after entering has a rounding-level gain; keep it out.
                if (!passive[last_entered]) blocked[last_entered] = 1;
                else std::fill(blocked.begin(), blocked.end(), 0);
            }

            const Vector<Scalar> w = c - gram_ * v;
            Eigen::Index enter = -1;
            Scalar best = tol;
            for (Eigen::Index j = 0; j < k; ++j) {
                if (passive[j] || blocked[j]) continue;
                if (w(j) > best) {
                    best = w(j);
                    enter = j;
                }
            }
            if (enter < 0) break;

            if (enter_variable(enter, passive, v)) {
                last_entered = enter;
            } else {
                blocked[enter] = 1;
                last_entered = -1;
            }
        }
    }

    static std::vector<Eigen::Index> indices_of(const std::vector<char>& passive) {
        std::vector<Eigen::Index> idx;
        for (std::size_t j = 0; j < passive.size(); ++j) {
            if (passive[j]) idx.push_back(static_cast<Eigen::Index>(j));
        }
        return idx;
    }

    // Moves v to the minimizer over the current passive set, dropping variables that hit zero on the way.
    bool make_stationary(const Vector<Scalar>& c, std::vector<char>& passive, Vector<Scalar>& v) const {
        for (int inner = 0; inner <= static_cast<int>(size()) + 1; ++inner) {
            const std::vector<Eigen::Index> idx = indices_of(passive);
            if (idx.empty()) {
                v.setZero();
                return true;
            }
            Vector<Scalar> rhs(static_cast<Eigen::Index>(idx.size()));
            for (std::size_t a = 0; a < idx.size(); ++a) rhs(static_cast<Eigen::Index>(a)) = c(idx[a]);
            Vector<Scalar> z;
            if (!detail::solve_block(gram_, idx, rhs, z)) {
                // Dependent columns in the passive set: drop the smallest coefficient and retry.
                std::size_t drop = 0;
                for (std::size_t a = 1; a < idx.size(); ++a) {
                    if (v(idx[a]) < v(idx[drop])) drop = a;
                }
                passive[idx[drop]] = 0;
                v(idx[drop]) = 0;
                continue;
            }
            Scalar step = 1;
            std::size_t blocking = idx.size();
            for (std::size_t a = 0; a < idx.size(); ++a) {
                const Scalar za = z(static_cast<Eigen::Index>(a));
                if (za <= Scalar(0)) {
                    const Scalar vj = v(idx[a]);
                    const Scalar t = vj - za > Scalar(0) ? vj / (vj - za) : Scalar(0);
                    if (t <= step) {
                        step = t;
                        blocking = a;
                    }
                }
            }
            if (blocking == idx.size()) {
                for (std::size_t a = 0; a < idx.size(); ++a) v(idx[a]) = z(static_cast<Eigen::Index>(a));
                return true;
            }
            for (std::size_t a = 0; a < idx.size(); ++a) {
                const Eigen::Index j = idx[a];
                v(j) += step * (z(static_cast<Eigen::Index>(a)) - v(j));
                if (a == blocking || v(j) <= Scalar(0)) {
                    v(j) = 0;
                    passive[j] = 0;
                }
            }
        }
        return false;
    }

    // Adds `enter` to the passive set. If its column is a combination of the passive columns, the objective
    // is linear along the null direction and a ratio-test pivot replaces one passive variable instead.
    bool enter_variable(Eigen::Index enter, std::vector<char>& passive, Vector<Scalar>& v) const {
        const std::vector<Eigen::Index> idx = indices_of(passive);
        if (idx.empty()) {
            passive[enter] = 1;
            return gram_(enter, enter) > Scalar(0);
        }
        Vector<Scalar> g_pj(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) g_pj(static_cast<Eigen::Index>(a)) = gram_(idx[a], enter);
        Vector<Scalar> coeffs;
        if (!detail::solve_block(gram_, idx, g_pj, coeffs)) {
            passive[enter] = 1;
            return true;
        }
        const Scalar residual = gram_(enter, enter) - g_pj.dot(coeffs);
        if (residual > Scalar(1e-12) * std::max(Scalar(1e-300), gram_(enter, enter))) {
            passive[enter] = 1;
            return true;
        }
        // Null direction d: d_enter = 1, d_P = -coeffs.
        Scalar step = std::numeric_limits<Scalar>::infinity();
        std::size_t leave = idx.size();
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const Scalar ca = coeffs(static_cast<Eigen::Index>(a));
            if (ca > Scalar(0)) {
                const Scalar t = v(idx[a]) / ca;
                if (t < step) {
                    step = t;
                    leave = a;
                }
            }
        }
        if (leave == idx.size()) return false;
        for (std::size_t a = 0; a < idx.size(); ++a) v(idx[a]) -= step * coeffs(static_cast<Eigen::Index>(a));
        v(enter) = step;
        v(idx[leave]) = 0;
        passive[idx[leave]] = 0;
        passive[enter] = 1;
        for (Eigen::Index j : idx) {
            if (v(j) <= Scalar(0)) {
                v(j) = 0;
                passive[j] = 0;
            }
        }
        return true;
    }

    static constexpr int kCdSweeps = 200;
    Matrix<Scalar> gram_;
    Scalar scale_ = 1;
};

/// Positive lasso for a single sample: argmin ||y - U v||^2 + alpha ||v||_1, v >= 0.
template <class DerivedU, class DerivedY>
Vector<typename DerivedU::Scalar> positive_lasso(const Eigen::MatrixBase<DerivedU>& design,
                                                 const Eigen::MatrixBase<DerivedY>& target,
                                                 typename DerivedU::Scalar alpha) {
    using Scalar = typename DerivedU::Scalar;
    if (design.rows() != target.rows()) throw Error(ErrorKind::ShapeError, "design and target row counts differ");
    detail::require_finite(design, "design matrix");
    detail::require_finite(target, "target");
    const GramPositiveLasso<Scalar> solver(Matrix<Scalar>(design.transpose() * design));
    return solver.solve(Vector<Scalar>(design.transpose() * target), alpha);
}

/// Objective ||y - U v||^2 + alpha ||v||_1.
template <class DerivedU, class DerivedY, class DerivedV>
typename DerivedU::Scalar lasso_objective(const Eigen::MatrixBase<DerivedU>& design,
                                          const Eigen::MatrixBase<DerivedY>& target,
                                          const Eigen::MatrixBase<DerivedV>& coef, typename DerivedU::Scalar alpha) {
    return (target - design * coef).squaredNorm() + alpha * coef.sum();
}

/// Largest KKT violation of a candidate: |2 u_j^T (U v - y) + alpha| on the support, the negative part of
/// the same quantity off the support, and any negative coefficient.
template <class DerivedU, class DerivedY, class DerivedV>
typename DerivedU::Scalar lasso_kkt_violation(const Eigen::MatrixBase<DerivedU>& design,
                                              const Eigen::MatrixBase<DerivedY>& target,
                                              const Eigen::MatrixBase<DerivedV>& coef,
                                              typename DerivedU::Scalar alpha) {
    using Scalar = typename DerivedU::Scalar;
    const Vector<Scalar> grad = Scalar(2) * design.transpose() * (design * coef - target);
    Scalar worst = 0;
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        const Scalar g = grad(j) + alpha;
        if (coef(j) < Scalar(0)) worst = std::max(worst, -coef(j));
        if (coef(j) > Scalar(0)) worst = std::max(worst, std::abs(g));
        else worst = std::max(worst, -g);
    }
    return worst;
}

}  // namespace dfecs
