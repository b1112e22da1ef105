#include <doctest.h>

#include <random>

#include "dfecs/error.hpp"
#include "dfecs/solvers/dictionary.hpp"
#include "dfecs/solvers/nmf.hpp"
#include "support/fixtures.hpp"

using namespace dfecs;
using namespace dfecs::testing;

namespace {

double ve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& approx) {
    return 100.0 * (1.0 - (x - approx).squaredNorm() / x.squaredNorm());
}

bool non_increasing(const std::vector<double>& trace, double rel = 1e-10) {
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i] > trace[i - 1] * (1.0 + rel) + 1e-12) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("dictionary: a rank-one nonnegative signal is recovered") {
    std::mt19937_64 rng(1);
    Eigen::VectorXd atom = gaussian(10, 1, rng);
    atom.normalize();
    const Eigen::RowVectorXd weights = uniform(1, 50, rng, 0.5, 3.0);
    const Eigen::MatrixXd x = atom * weights;
    SolverConfig config;
    config.max_iterations = 200;
    config.tolerance = 1e-12;
    const auto model = fit_dictionary<double>(x, 1, 1e-6, config);
    CHECK(ve(x, model.dictionary * model.codes) >= 99.9);
    CHECK(std::abs(model.dictionary.col(0).dot(atom)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("dictionary: a complete dictionary with alpha = 0 fits nonnegative combinations exactly") {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd basis = gaussian(4, 4, rng).colwise().normalized();
    const Eigen::MatrixXd x = basis * uniform(4, 30, rng, 0.0, 2.0);
    SolverConfig config;
    config.max_iterations = 2000;
    config.tolerance = 1e-14;
    const auto model = fit_dictionary<double>(x, 4, 0.0, config);
    CHECK(ve(x, model.dictionary * model.codes) >= 99.9);
}

TEST_CASE("dictionary: objective trace never rises and atoms stay in the unit ball") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const Eigen::MatrixXd x = gaussian(12, 40, rng);
        SolverConfig config;
        config.seed = seed;
        config.max_iterations = 60;
        const auto model = fit_dictionary<double>(x, 5, 0.3, config);
        CHECK(non_increasing(model.objective_trace));
        CHECK((model.codes.array() >= 0.0).all());
        CHECK(model.dictionary.colwise().norm().maxCoeff() <= 1.0 + 1e-12);
        CHECK(model.objective_trace.back() ==
              doctest::Approx(dictionary_objective<double>(x, model.dictionary, model.codes, 0.3)));
    }
}

TEST_CASE("dictionary: bad arguments") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
    CHECK_THROWS_AS(fit_dictionary<double>(x, 3, 0.1, SolverConfig{}), Error);
    CHECK_THROWS_AS(fit_dictionary<double>(x, 1, -0.1, SolverConfig{}), Error);
}

TEST_CASE("nmf: planted nonnegative factors are recovered") {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd a = uniform(20, 3, rng);
    const Eigen::MatrixXd b = uniform(3, 60, rng);
    const Eigen::MatrixXd v = a * b;
    SolverConfig config;
    config.max_iterations = 3000;
    config.tolerance = 1e-14;
    const auto model = fit_nmf<double>(v, 3, 0.0, 0.0, config);
    CHECK(ve(v, model.basis * model.encoding) >= 99.9);
}

TEST_CASE("nmf: rank-one data") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd v = uniform(8, 1, rng, 0.1, 1.0) * uniform(1, 15, rng, 0.1, 1.0);
    const auto model = fit_nmf<double>(v, 1, 0.0, 0.0, SolverConfig{});
    CHECK((v - model.basis * model.encoding).norm() <= 1e-6 * v.norm());
}

TEST_CASE("nmf: nonnegativity and a non-increasing trace for random seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const Eigen::MatrixXd v = uniform(10, 30, rng);
        for (NmfInit init : {NmfInit::Nndsvd, NmfInit::Random}) {
            SolverConfig config;
            config.seed = seed;
            config.nmf_init = init;
            config.max_iterations = 80;
            const auto model = fit_nmf<double>(v, 4, 0.2, 0.1, config);
            CHECK((model.basis.array() >= 0.0).all());
            CHECK((model.encoding.array() >= 0.0).all());
            CHECK(non_increasing(model.objective_trace));
        }
    }
}

TEST_CASE("nmf: negative input and bad rank are rejected") {
    Eigen::MatrixXd v = Eigen::MatrixXd::Ones(3, 3);
    v(1, 1) = -1.0;
    try {
        fit_nmf<double>(v, 1, 0.0, 0.0, SolverConfig{});
        FAIL("expected NegativeInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NegativeInput);
    }
    CHECK_THROWS_AS(fit_nmf<double>(Eigen::MatrixXd::Ones(3, 3), 4, 0.0, 0.0, SolverConfig{}), Error);
}
