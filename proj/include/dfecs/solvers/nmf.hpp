#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "dfecs/solvers/positive_lasso.hpp"
#include "dfecs/solvers/solver_config.hpp"

namespace dfecs {

template <class Scalar>
struct NmfModel {
    Matrix<Scalar> basis;     // A: k x q
    Matrix<Scalar> encoding;  // B: q x m
    Scalar alpha_basis = 0;
    Scalar alpha_encoding = 0;
    std::vector<Scalar> objective_trace;
    int iterations = 0;
    bool converged = false;
};

template <class Scalar>
Scalar nmf_objective(const Matrix<Scalar>& data, const Matrix<Scalar>& basis, const Matrix<Scalar>& encoding,
                     Scalar alpha_basis, Scalar alpha_encoding) {
    return (data - basis * encoding).squaredNorm() + alpha_basis * basis.sum() + alpha_encoding * encoding.sum();
}

namespace detail {

template <class Scalar>
void fill_random(Matrix<Scalar>& m, Scalar upper, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(uni(rng)) * upper;
    }
}

/// Nonnegative double SVD (Boutsidis & Gallopoulos); exact zeros are replaced by small seeded values so
/// no factor entry starts stuck.
template <class Scalar>
bool nndsvd_init(const Matrix<Scalar>& data, Eigen::Index rank, std::mt19937_64& rng, Matrix<Scalar>& basis,
                 Matrix<Scalar>& encoding) {
    const Eigen::Index k = data.rows();
    const Matrix<Scalar> gram = data * data.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram);
    if (eig.info() != Eigen::Success) return false;
    const Scalar mean = data.mean();
    if (!(mean > Scalar(0))) return false;

    basis = Matrix<Scalar>::Zero(k, rank);
    encoding = Matrix<Scalar>::Zero(rank, data.cols());
    for (Eigen::Index r = 0; r < rank; ++r) {
        const Eigen::Index col = k - 1 - r;
        const Scalar lambda = col >= 0 ? eig.eigenvalues()(col) : Scalar(0);
        if (!(lambda > Scalar(0))) continue;
        const Scalar sigma = std::sqrt(lambda);
        const Vector<Scalar> u = eig.eigenvectors().col(col);
        const Vector<Scalar> v = (data.transpose() * u) / sigma;
        if (r == 0) {
            basis.col(0) = std::sqrt(sigma) * u.cwiseAbs();
            encoding.row(0) = std::sqrt(sigma) * v.cwiseAbs().transpose();
            continue;
        }
        const Vector<Scalar> up = u.cwiseMax(Scalar(0)), un = (-u).cwiseMax(Scalar(0));
        const Vector<Scalar> vp = v.cwiseMax(Scalar(0)), vn = (-v).cwiseMax(Scalar(0));
        const Scalar mp = up.norm() * vp.norm();
        const Scalar mn = un.norm() * vn.norm();
        const bool positive = mp >= mn;
        const Vector<Scalar>& uu = positive ? up : un;
        const Vector<Scalar>& vv = positive ? vp : vn;
        const Scalar mag = positive ? mp : mn;
        if (!(mag > Scalar(0))) continue;
        const Scalar factor = std::sqrt(sigma * mag);
        basis.col(r) = factor * uu / uu.norm();
        encoding.row(r) = factor * (vv / vv.norm()).transpose();
    }
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const Scalar small = mean / Scalar(100);
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
        for (Eigen::Index i = 0; i < basis.rows(); ++i) {
            if (basis(i, j) == Scalar(0)) basis(i, j) = small * static_cast<Scalar>(uni(rng));
        }
    }
    for (Eigen::Index j = 0; j < encoding.cols(); ++j) {
        for (Eigen::Index i = 0; i < encoding.rows(); ++i) {
            if (encoding(i, j) == Scalar(0)) encoding(i, j) = small * static_cast<Scalar>(uni(rng));
        }
    }
    return basis.allFinite() && encoding.allFinite();
}

}  // namespace detail

/// L1-regularized NMF:
///
///     minimize ||V - A B||_F^2 + alpha_A ||A||_1 + alpha_B ||B||_1   s.t. A >= 0, B >= 0
///
/// Hierarchical alternating least squares: every column of A and row of B is replaced by its exact
/// constrained minimizer max(0, (R b - alpha/2) / ||b||^2) given the others, so the trace never rises.
template <class Scalar>
NmfModel<Scalar> fit_nmf(const Matrix<Scalar>& data, Eigen::Index rank, Scalar alpha_basis, Scalar alpha_encoding,
                         const SolverConfig& config) {
    config.validate();
    if (!data.allFinite()) throw Error(ErrorKind::NonFinite, "NMF input contains non-finite values");
    if (data.size() > 0 && data.minCoeff() < Scalar(-1e-12)) {
        throw Error(ErrorKind::NegativeInput, "NMF input has negative entries");
    }
    if (rank < 1 || rank > std::min(data.rows(), data.cols())) {
        throw Error(ErrorKind::ConfigError, "NMF rank must lie in [1, min(rows, cols)]");
    }
    if (!(alpha_basis >= Scalar(0)) || !(alpha_encoding >= Scalar(0))) {
        throw Error(ErrorKind::ConfigError, "NMF penalties must be nonnegative");
    }
    const Matrix<Scalar> v = data.cwiseMax(Scalar(0));

    std::mt19937_64 rng(config.seed);
    NmfModel<Scalar> model;
    model.alpha_basis = alpha_basis;
    model.alpha_encoding = alpha_encoding;
    const bool nndsvd_ok = config.nmf_init == NmfInit::Nndsvd &&
                           detail::nndsvd_init(v, rank, rng, model.basis, model.encoding);
    if (!nndsvd_ok) {
        const Scalar upper = std::max(Scalar(1e-3), std::sqrt(std::max(Scalar(0), v.mean()) / Scalar(rank)));
        model.basis.resize(v.rows(), rank);
        model.encoding.resize(rank, v.cols());
        detail::fill_random(model.basis, upper, rng);
        detail::fill_random(model.encoding, upper, rng);
    }

    Matrix<Scalar>& a = model.basis;
    Matrix<Scalar>& b = model.encoding;
    Scalar previous = std::numeric_limits<Scalar>::infinity();
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        {
            const Matrix<Scalar> vbt = v * b.transpose();
            const Matrix<Scalar> bbt = b * b.transpose();
            for (Eigen::Index l = 0; l < rank; ++l) {
                const Scalar w = bbt(l, l);
                if (!(w > Scalar(0))) {
                    a.col(l).setZero();
                    continue;
                }
                const Vector<Scalar> num = vbt.col(l) - a * bbt.col(l) + a.col(l) * w;
                a.col(l) = ((num.array() - alpha_basis / Scalar(2)) / w).cwiseMax(Scalar(0));
            }
        }
        {
            const Matrix<Scalar> atv = a.transpose() * v;
            const Matrix<Scalar> ata = a.transpose() * a;
            for (Eigen::Index l = 0; l < rank; ++l) {
                const Scalar w = ata(l, l);
                if (!(w > Scalar(0))) {
                    b.row(l).setZero();
                    continue;
                }
                const Vector<Scalar> num = (atv.row(l) - ata.row(l) * b).transpose() + b.row(l).transpose() * w;
                b.row(l) = ((num.array() - alpha_encoding / Scalar(2)) / w).cwiseMax(Scalar(0)).matrix().transpose();
            }
        }
        const Scalar objective = nmf_objective(v, a, b, alpha_basis, alpha_encoding);
        model.objective_trace.push_back(objective);
        model.iterations = iter + 1;
        if (std::isfinite(static_cast<double>(previous)) &&
            std::abs(previous - objective) <= Scalar(config.tolerance) * std::abs(previous)) {
            model.converged = true;
            break;
        }
        if (objective == Scalar(0)) {
            model.converged = true;
            break;
        }
        previous = objective;
    }
    return model;
}

}  // namespace dfecs
