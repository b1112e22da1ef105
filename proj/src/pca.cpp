#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "dfecs/error.hpp"
#include "dfecs/eval.hpp"
#include "dfecs/ffm.hpp"

namespace dfecs {

PcaModel fit_pca_baseline(const Eigen::MatrixXd& data, const PcaOptions& options) {
    if (data.size() == 0) throw Error(ErrorKind::ZeroData, "PCA input is empty");
    if (!data.allFinite()) throw Error(ErrorKind::NonFinite, "PCA input contains non-finite values");

    PcaModel model;
    model.centered = options.center;
    model.mean = options.center ? Eigen::VectorXd(data.rowwise().mean()) : Eigen::VectorXd::Zero(data.rows());
    const Eigen::MatrixXd centered = data.colwise() - model.mean;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered * centered.transpose());
    if (eig.info() != Eigen::Success) throw Error(ErrorKind::DegenerateData, "eigendecomposition failed");
    const Eigen::Index n = data.rows();
    const Eigen::VectorXd lambda = eig.eigenvalues().reverse().cwiseMax(0.0);
    const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double total = lambda.sum();
    if (!(total > 0.0)) throw Error(ErrorKind::ZeroData, "PCA input has no variance");

    Eigen::Index count = 0;
    if (options.components) {
        count = std::clamp<Eigen::Index>(*options.components, 1, n);
    } else {
        const double target = options.target_ve.value_or(95.0);
        double acc = 0.0;
        while (count < n) {
            acc += lambda(count++);
            if (100.0 * acc / total >= target) break;
        }
    }

    model.components = vectors.leftCols(count);
    // Fix each component's sign so its largest-magnitude entry is positive.
    for (Eigen::Index j = 0; j < count; ++j) {
        Eigen::Index arg = 0;
        model.components.col(j).cwiseAbs().maxCoeff(&arg);
        if (model.components(arg, j) < 0.0) model.components.col(j) *= -1.0;
    }
    model.singular_values = lambda.head(count).cwiseSqrt();
    model.expanded.resize(n, 2 * count);
    model.expanded << model.components, -model.components;

    const Eigen::MatrixXd projected =
        (model.components * (model.components.transpose() * centered)).colwise() + model.mean;
    model.train_ve = variance_explained(data, projected);
    return model;
}

}  // namespace dfecs
