#include <doctest.h>

#include <cmath>

#include "ice/info_matrices.hpp"
#include "oracle.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ice::Dataset;
using ice::InfoMatrices;
using ice::LogisticModel;

namespace {

Dataset make_data(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    Dataset d;
    d.x = oracle::random_design(n, p, seed);
    d.y = oracle::random_labels(d.x, oracle::random_theta(p, seed + 1), seed + 2);
    return d;
}

// Model whose Hessian is deliberately inconsistent between coordinates.
class BrokenHessianModel : public LogisticModel {
public:
    MatrixXd hess_log_density(Eigen::Ref<const VectorXd> row, double y,
                              const ice::ParamVector& theta) const override {
        MatrixXd h = LogisticModel::hess_log_density(row, y, theta);
        h(0, 1) += 0.5;  // breaks symmetry well past tolerance
        return h;
    }
    void info_sums(const Dataset& data, const ice::ParamVector& theta, MatrixXd& outer_sum,
                   MatrixXd& hess_sum) const override {
        ModelContract::info_sums(data, theta, outer_sum, hess_sum);
    }
};

class PositivePenalty : public ice::PenaltyFunction {
public:
    double value(Eigen::Ref<const VectorXd>, double, const ice::ParamVector&) const override {
        return 1.0;  // violates k ≤ 0
    }
    VectorXd grad(Eigen::Ref<const VectorXd>, double, const ice::ParamVector& theta) const override {
        return VectorXd::Zero(theta.size());
    }
    MatrixXd hess(Eigen::Ref<const VectorXd>, double, const ice::ParamVector& theta) const override {
        return MatrixXd::Zero(theta.size(), theta.size());
    }
};

}  // namespace

TEST_SUITE_BEGIN("info_matrices");

TEST_CASE("empirical matrices match finite-difference assembly") {
    LogisticModel model;
    const Dataset data = make_data(25, 3, 101);
    const VectorXd theta = oracle::random_theta(3, 102, 0.6);

    MatrixXd i_fd = MatrixXd::Zero(3, 3), j_fd = MatrixXd::Zero(3, 3);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const VectorXd row = data.x.row(i);
        const double y = data.y[i];
        const VectorXd g = oracle::fd_gradient(
            [&](const VectorXd& th) { return model.log_density(row, y, th); }, theta);
        i_fd += g * g.transpose();
        j_fd -= oracle::fd_jacobian(
            [&](const VectorXd& th) { return model.grad_log_density(row, y, th); }, theta);
    }
    i_fd /= static_cast<double>(data.n());
    j_fd /= static_cast<double>(data.n());

    CHECK(oracle::max_rel_gap(ice::empirical_i(model, data, theta), i_fd, 1e-8) <= 1e-6);
    CHECK(oracle::max_rel_gap(ice::empirical_j(model, data, theta), j_fd, 1e-8) <= 1e-6);
}

TEST_CASE("i_hat is symmetric positive semidefinite, j_hat symmetric") {
    LogisticModel model;
    const Dataset data = make_data(80, 5, 111);
    const VectorXd theta = oracle::random_theta(5, 112, 0.4);
    const InfoMatrices info = ice::empirical_info(model, data, theta);

    CHECK((info.i_hat - info.i_hat.transpose()).lpNorm<Eigen::Infinity>() <= 1e-14);
    CHECK((info.j_hat - info.j_hat.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(info.i_hat);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * info.i_hat.cwiseAbs().maxCoeff());
    CHECK(info.theta_at == theta);
}

TEST_CASE("duplicating every row leaves the averages unchanged") {
    LogisticModel model;
    const Dataset data = make_data(40, 4, 121);
    const VectorXd theta = oracle::random_theta(4, 122, 0.5);

    Dataset doubled;
    doubled.x.resize(2 * data.n(), data.p());
    doubled.x << data.x, data.x;
    doubled.y.resize(2 * data.n());
    doubled.y << data.y, data.y;

    CHECK((ice::empirical_i(model, doubled, theta) - ice::empirical_i(model, data, theta))
              .lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((ice::empirical_j(model, doubled, theta) - ice::empirical_j(model, data, theta))
              .lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("intercept-only model at theta 0") {
    LogisticModel model;
    Dataset d;
    d.x = MatrixXd::Ones(12, 1);
    d.y = VectorXd::Zero(12);
    for (int i = 0; i < 5; ++i) d.y[i] = 1.0;
    const VectorXd theta = VectorXd::Zero(1);
    const InfoMatrices info = ice::empirical_info(model, d, theta);
    CHECK(info.j_hat(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(info.i_hat(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("asymmetric model Hessian is rejected") {
    BrokenHessianModel model;
    const Dataset data = make_data(10, 3, 131);
    const VectorXd theta = oracle::random_theta(3, 132, 0.3);
    CHECK_THROWS_AS(ice::empirical_j(model, data, theta), ice::NumericError);
}

TEST_CASE("penalized matrices: quadratic penalty shifts j_hat by lambda I") {
    LogisticModel model;
    const Dataset data = make_data(30, 4, 141);
    const VectorXd theta = oracle::random_theta(4, 142, 0.5);
    const ice::QuadraticPenalty pen;
    const double lambda = 0.7;

    const InfoMatrices base = ice::empirical_info(model, data, theta);
    const InfoMatrices shifted = ice::penalized_matrices(model, data, theta, pen, lambda);
    MatrixXd expect_j = base.j_hat;
    expect_j.diagonal().array() += lambda;
    CHECK((shifted.j_hat - expect_j).lpNorm<Eigen::Infinity>() <= 1e-12);

    // Î_λ assembled by hand from shifted per-row scores g_i - λθ.
    MatrixXd expect_i = MatrixXd::Zero(4, 4);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const VectorXd g =
            model.grad_log_density(data.x.row(i), data.y[i], theta) - lambda * theta;
        expect_i += g * g.transpose();
    }
    expect_i /= static_cast<double>(data.n());
    CHECK((shifted.i_hat - expect_i).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("penalized matrices: lambda 0 reproduces the empirical pair exactly") {
    LogisticModel model;
    const Dataset data = make_data(35, 3, 151);
    const VectorXd theta = oracle::random_theta(3, 152, 0.5);
    const ice::QuadraticPenalty pen;
    const InfoMatrices a = ice::empirical_info(model, data, theta);
    const InfoMatrices b = ice::penalized_matrices(model, data, theta, pen, 0.0);
    CHECK((a.i_hat - b.i_hat).lpNorm<Eigen::Infinity>() <= 1e-14);
    CHECK((a.j_hat - b.j_hat).lpNorm<Eigen::Infinity>() <= 1e-14);
    // And a tiny λ behaves continuously rather than jumping.
    const InfoMatrices c = ice::penalized_matrices(model, data, theta, pen, 1e-14);
    CHECK((a.i_hat - c.i_hat).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK((a.j_hat - c.j_hat).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("penalty contract violations") {
    LogisticModel model;
    const Dataset data = make_data(10, 2, 161);
    const VectorXd theta = oracle::random_theta(2, 162, 0.3);
    const ice::QuadraticPenalty quad;
    CHECK_THROWS_AS(ice::penalized_matrices(model, data, theta, quad, -0.5),
                    ice::ContractViolation);
    const PositivePenalty pos;
    CHECK_THROWS_AS(ice::penalized_matrices(model, data, theta, pos, 1.0),
                    ice::ContractViolation);
}

TEST_CASE("trace by solve: hand case and identity case") {
    InfoMatrices info;
    info.i_hat = Eigen::Vector2d(2.0, 1.0).asDiagonal();
    info.j_hat = Eigen::Vector2d(1.0, 2.0).asDiagonal();
    CHECK(ice::trace_i_jinv(info) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(info.jitter_used == 0.0);

    // Î = Ĵ gives exactly the parameter count.
    MatrixXd spd = MatrixXd::Zero(4, 4);
    spd << 2.0, 0.3, 0.1, 0.0,  //
        0.3, 1.5, 0.2, 0.1,     //
        0.1, 0.2, 1.8, 0.25,    //
        0.0, 0.1, 0.25, 2.2;
    info.i_hat = spd;
    info.j_hat = spd;
    CHECK(std::abs(ice::trace_i_jinv(info) - 4.0) <= 1e-12);
}

TEST_CASE("trace by solve agrees with the explicit inverse") {
    std::mt19937_64 eng(171);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(eng() % 5);
        MatrixXd a(p, p), b(p, p);
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < p; ++j) {
                a(i, j) = normal(eng);
                b(i, j) = normal(eng);
            }
        InfoMatrices info;
        info.i_hat = a * a.transpose() / static_cast<double>(p);
        info.j_hat = b * b.transpose() + MatrixXd::Identity(p, p);  // keeps cond well under 1e6
        const double got = ice::trace_i_jinv(info);
        const double want = (info.i_hat * info.j_hat.inverse()).trace();
        CHECK(oracle::rel_gap(got, want) <= 1e-8);
    }
}

TEST_CASE("ridge ladder rides out a singular j_hat and records the jitter") {
    InfoMatrices info;
    info.i_hat = MatrixXd::Identity(2, 2);
    info.j_hat = MatrixXd::Zero(2, 2);
    info.j_hat(0, 0) = 1.0;  // second pivot exactly zero
    const double trace = ice::trace_i_jinv(info);
    CHECK(std::isfinite(trace));
    CHECK(info.jitter_used == doctest::Approx(1e-10));
    CHECK(trace == doctest::Approx(1.0 / (1.0 + 1e-10) + 1e10).epsilon(1e-6));
}

TEST_CASE("ladder exhaustion surfaces as a singular-information error") {
    InfoMatrices info;
    info.i_hat = MatrixXd::Identity(2, 2);
    info.j_hat = MatrixXd::Identity(2, 2);
    info.j_hat(1, 1) = std::numeric_limits<double>::quiet_NaN();  // defeats every rung
    CHECK_THROWS_AS(ice::trace_i_jinv(info), ice::SingularInformation);
}

TEST_CASE("dimension mismatches are contract errors") {
    LogisticModel model;
    const Dataset data = make_data(10, 3, 181);
    CHECK_THROWS_AS(ice::empirical_i(model, data, VectorXd::Zero(2)), ice::ContractViolation);
    InfoMatrices info;
    info.i_hat = MatrixXd::Identity(3, 3);
    info.j_hat = MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(ice::trace_i_jinv(info), ice::ContractViolation);
}

TEST_CASE("quadratic form identity validates the sampling machinery") {
    // For ε ~ N(μ, Σ): E[εᵀAε] = tr(AΣ) + μᵀAμ.
    const Eigen::Index p = 3;
    MatrixXd a(p, p);
    a << 1.2, 0.3, -0.2,  //
        0.3, 0.8, 0.1,    //
        -0.2, 0.1, 1.5;
    VectorXd mu(p);
    mu << 0.5, -1.0, 0.25;
    MatrixXd sigma(p, p);
    sigma << 0.9, 0.2, 0.1,  //
        0.2, 1.1, -0.15,     //
        0.1, -0.15, 0.7;
    const Eigen::LLT<MatrixXd> llt(sigma);
    REQUIRE(llt.info() == Eigen::Success);
    const MatrixXd gamma = llt.matrixL();

    std::mt19937_64 eng(191);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int draws = 20000;
    double sum = 0, sumsq = 0;
    for (int s = 0; s < draws; ++s) {
        VectorXd z(p);
        for (Eigen::Index k = 0; k < p; ++k) z[k] = normal(eng);
        const VectorXd eps = mu + gamma * z;
        const double q = eps.dot(a * eps);
        sum += q;
        sumsq += q * q;
    }
    const double mean = sum / draws;
    const double var = (sumsq - draws * mean * mean) / (draws - 1);
    const double se = std::sqrt(var / draws);
    const double expect = (a * sigma).trace() + mu.dot(a * mu);
    CHECK(std::abs(mean - expect) <= 4.0 * se);
}

TEST_SUITE_END();
