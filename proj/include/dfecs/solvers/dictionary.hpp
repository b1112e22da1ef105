#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "dfecs/solvers/positive_lasso.hpp"
#include "dfecs/solvers/solver_config.hpp"

namespace dfecs {

template <class Scalar>
struct DictionaryModel {
    Matrix<Scalar> dictionary;  // p x k, columns in the unit ball
    Matrix<Scalar> codes;       // k x m, nonnegative
    Scalar alpha = 0;
    std::vector<Scalar> objective_trace;
    int iterations = 0;
    bool converged = false;
    int reinitialized_atoms = 0;
};

/// Objective 1/2 ||X - U V||_F^2 + alpha ||V||_1 used by the part models.
template <class Scalar>
Scalar dictionary_objective(const Matrix<Scalar>& data, const Matrix<Scalar>& dictionary, const Matrix<Scalar>& codes,
                            Scalar alpha) {
    return Scalar(0.5) * (data - dictionary * codes).squaredNorm() + alpha * codes.sum();
}

/// Sparse dictionary learning with nonnegative codes:
///
///     minimize 1/2 ||X - U V||_F^2 + alpha ||V||_1   s.t. ||u_j||_2 <= 1, V >= 0
///
/// Batch alternating minimization. The code step solves each column's positive lasso exactly (the
/// 1/2 factor is absorbed by passing 2 alpha to the solver); the dictionary step is one pass of exact
/// block-coordinate updates of the atoms, each followed by projection onto the unit ball. Both steps are
/// exact block minimizations, so the objective trace is non-increasing.
template <class Scalar>
DictionaryModel<Scalar> fit_dictionary(const Matrix<Scalar>& data, Eigen::Index num_atoms, Scalar alpha,
                                       const SolverConfig& config) {
    config.validate();
    if (!data.allFinite()) throw Error(ErrorKind::DegenerateData, "part data contains non-finite values");
    if (num_atoms < 1) throw Error(ErrorKind::ConfigError, "number of atoms must be at least 1");
    if (data.cols() < num_atoms) throw Error(ErrorKind::ConfigError, "fewer samples than atoms");
    if (!(alpha >= Scalar(0))) throw Error(ErrorKind::ConfigError, "alpha must be nonnegative");

    const Eigen::Index p = data.rows();
    const Eigen::Index m = data.cols();
    std::mt19937_64 rng(config.seed);

    DictionaryModel<Scalar> model;
    model.alpha = alpha;
    model.dictionary.resize(p, num_atoms);
    model.codes = Matrix<Scalar>::Zero(num_atoms, m);

    // Atoms start at distinct, normalized data columns picked by a seeded shuffle.
    {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        Eigen::Index filled = 0;
        for (Eigen::Index c : order) {
            if (filled == num_atoms) break;
            const Scalar norm = data.col(c).norm();
            if (norm > Scalar(0)) model.dictionary.col(filled++) = data.col(c) / norm;
        }
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (; filled < num_atoms; ++filled) {
            Vector<Scalar> u(p);
            for (Eigen::Index i = 0; i < p; ++i) u(i) = static_cast<Scalar>(gauss(rng));
            model.dictionary.col(filled) = u / std::max(u.norm(), Scalar(1e-300));
        }
    }

    const Scalar lasso_alpha = Scalar(2) * alpha;
    Scalar previous = std::numeric_limits<Scalar>::infinity();
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        // Code step.
        const GramPositiveLasso<Scalar> coder(Matrix<Scalar>(model.dictionary.transpose() * model.dictionary));
        const Matrix<Scalar> correlations = model.dictionary.transpose() * data;
        for (Eigen::Index c = 0; c < m; ++c) {
            model.codes.col(c) = coder.solve(correlations.col(c), lasso_alpha, model.codes.col(c));
        }

        // Dictionary step.
        const Matrix<Scalar> code_gram = model.codes * model.codes.transpose();
        const Matrix<Scalar> data_codes = data * model.codes.transpose();
        for (Eigen::Index j = 0; j < num_atoms; ++j) {
            const Scalar weight = code_gram(j, j);
            if (weight > Scalar(0)) {
                Vector<Scalar> u = model.dictionary.col(j) +
                                   (data_codes.col(j) - model.dictionary * code_gram.col(j)) / weight;
                const Scalar norm = u.norm();
                if (norm > Scalar(1)) u /= norm;
                model.dictionary.col(j) = u;
            } else {
                // Unused atom: its code row is zero, so moving it leaves the objective unchanged.
                const Matrix<Scalar> residual = data - model.dictionary * model.codes;
                Eigen::Index worst = 0;
                const Scalar worst_norm = residual.colwise().squaredNorm().maxCoeff(&worst);
                if (worst_norm > Scalar(0)) {
                    model.dictionary.col(j) = residual.col(worst) / std::sqrt(worst_norm);
                    ++model.reinitialized_atoms;
                }
            }
        }

        const Scalar objective = dictionary_objective(data, model.dictionary, model.codes, alpha);
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
