#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ice/baselines.hpp"
#include "ice/rng.hpp"
#include "oracle.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ice::Dataset;
using ice::FitConfig;
using ice::FitResult;
using ice::LogisticModel;

namespace {

Dataset make_data(Eigen::Index n, Eigen::Index p, std::uint64_t seed, double spread = 1.0) {
    Dataset d;
    d.x = oracle::random_design(n, p, seed, spread);
    d.y = oracle::random_labels(d.x, oracle::random_theta(p, seed + 1), seed + 2);
    return d;
}

double avg_nll(const LogisticModel& model, const Dataset& data, const VectorXd& theta) {
    return -ice::sample_log_likelihood(model, data, theta);
}

// Whether some fold's validation labels are all identical.
bool single_class(const Dataset& d, const std::vector<int>& assignment, int folds) {
    for (int f = 0; f < folds; ++f) {
        bool saw0 = false, saw1 = false;
        for (Eigen::Index i = 0; i < d.n(); ++i)
            if (assignment[static_cast<std::size_t>(i)] == f)
                (d.y[i] > 0.5 ? saw1 : saw0) = true;
        if (!(saw0 && saw1)) return true;
    }
    return false;
}

}  // namespace

TEST_SUITE_BEGIN("baselines");

TEST_CASE("mle lands on the lattice minimizer of the average negative log likelihood") {
    LogisticModel model;
    const Dataset data = make_data(30, 2, 601);
    const FitResult mle = ice::fit_mle(model, data, {});
    REQUIRE(mle.converged);
    CHECK(mle.estimator == "mle");

    const double step = 0.02;
    const VectorXd ref = oracle::grid_argmin_2d(
        [&](const VectorXd& th) { return avg_nll(model, data, th); }, -3.0, 3.0, step);
    CHECK((mle.theta - ref).lpNorm<Eigen::Infinity>() <= step);
    CHECK(ice::score(model, data, mle.theta).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(mle.grad_norm <= 1e-8);
}

TEST_CASE("intercept-only data with half positive labels fits exactly zero") {
    LogisticModel model;
    Dataset d;
    d.x = MatrixXd::Ones(10, 1);
    d.y = VectorXd::Zero(10);
    for (int i = 0; i < 5; ++i) d.y[i] = 1.0;
    const FitResult r = ice::fit_mle(model, d, {});
    REQUIRE(r.converged);
    CHECK(r.theta[0] == 0.0);  // the score vanishes identically at the start
}

TEST_CASE("soft threshold matches its closed form") {
    CHECK(ice::soft_threshold(3.0, 1.0) == 2.0);
    CHECK(ice::soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(ice::soft_threshold(0.5, 1.0) == 0.0);
    CHECK(ice::soft_threshold(-0.5, 1.0) == 0.0);
    CHECK(ice::soft_threshold(0.0, 1.0) == 0.0);
    CHECK(ice::soft_threshold(1.0, 1.0) == 0.0);
    CHECK(ice::soft_threshold(-2.5, 0.0) == -2.5);
    std::mt19937_64 eng(12);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int i = 0; i < 200; ++i) {
        const double z = u(eng), t = std::abs(u(eng));
        const double want = (z > 0 ? 1.0 : (z < 0 ? -1.0 : 0.0)) * std::max(std::abs(z) - t, 0.0);
        CHECK(ice::soft_threshold(z, t) == want);
    }
}

TEST_CASE("mle is invariant to its starting point") {
    LogisticModel model;
    const Dataset data = make_data(120, 4, 311);
    const FitResult a = ice::fit_mle(model, data, {});
    FitConfig cfg;
    cfg.init = oracle::random_theta(4, 312, 2.0);
    const FitResult b = ice::fit_mle(model, data, cfg);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK((a.theta - b.theta).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("perfect separation is reported as such") {
    LogisticModel model;
    Dataset d;
    const Eigen::Index n = 40;
    d.x.resize(n, 2);
    d.y.resize(n);
    std::mt19937_64 eng(321);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x = normal(eng);
        if (std::abs(x) < 0.2) x = x < 0 ? -0.2 : 0.2;  // margin keeps it separable
        d.x(i, 0) = 1.0;
        d.x(i, 1) = x;
        d.y[i] = x < 0 ? 1.0 : 0.0;  // the index is decreasing in x·θ
    }
    CHECK_THROWS_AS(ice::fit_mle(model, d, {}), ice::SeparationError);
    // A ridge penalty restores existence on the same rows.
    const FitResult ridge = ice::fit_l2(model, d, 0.1);
    CHECK(ridge.converged);
    CHECK(ridge.theta.allFinite());
}

TEST_CASE("l2 at lambda 0 matches the mle and satisfies penalized stationarity otherwise") {
    LogisticModel model;
    const Dataset data = make_data(150, 3, 331);
    const FitResult mle = ice::fit_mle(model, data, {});
    const FitResult zero = ice::fit_l2(model, data, 0.0);
    REQUIRE(zero.converged);
    CHECK((zero.theta - mle.theta).lpNorm<Eigen::Infinity>() <= 1e-8);

    const double lambda = 0.3;
    const FitResult pen = ice::fit_l2(model, data, lambda);
    REQUIRE(pen.converged);
    REQUIRE(pen.lambda.has_value());
    CHECK(*pen.lambda == lambda);
    // ∇(-ℓ + λ Σ_{k≥1} θ_k²) = -score + 2λθ with the intercept left free.
    VectorXd g = -ice::score(model, data, pen.theta) + 2.0 * lambda * pen.theta;
    g[0] = -ice::score(model, data, pen.theta)[0];
    CHECK(g.lpNorm<Eigen::Infinity>() <= 1e-8);

    const FitResult all = ice::fit_l2(model, data, lambda, true);
    REQUIRE(all.converged);
    CHECK(std::abs(all.theta[0]) < std::abs(pen.theta[0]));  // intercept now shrinks too
}

TEST_CASE("l2 slope norms shrink monotonically in lambda") {
    LogisticModel model;
    const Dataset data = make_data(200, 4, 341);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.01, 0.1, 1.0, 10.0}) {
        const FitResult r = ice::fit_l2(model, data, lambda);
        REQUIRE(r.converged);
        const double norm = r.theta.tail(3).norm();
        CHECK(norm < prev);
        prev = norm;
    }
    // Penalty dominance: at λ = 1e6 every non-intercept coordinate is crushed.
    const FitResult huge = ice::fit_l2(model, data, 1e6);
    REQUIRE(huge.converged);
    CHECK(huge.theta.tail(3).lpNorm<Eigen::Infinity>() < 1e-3);
}

TEST_CASE("each penalized optimum dominates the mle on its own objective") {
    LogisticModel model;
    const Dataset data = make_data(150, 3, 345);
    const FitResult mle = ice::fit_mle(model, data, {});
    REQUIRE(mle.converged);
    const double lambda = 0.2;
    const auto slopes_l1 = [](const VectorXd& th) { return th.tail(th.size() - 1).lpNorm<1>(); };
    const auto slopes_l2 = [](const VectorXd& th) { return th.tail(th.size() - 1).squaredNorm(); };

    const FitResult l1 = ice::fit_l1(model, data, lambda);
    REQUIRE(l1.converged);
    const double f1_own = -ice::sample_log_likelihood(model, data, l1.theta) +
                          lambda * slopes_l1(l1.theta);
    const double f1_mle = -ice::sample_log_likelihood(model, data, mle.theta) +
                          lambda * slopes_l1(mle.theta);
    CHECK(f1_own <= f1_mle + 1e-10);

    const FitResult l2 = ice::fit_l2(model, data, lambda);
    REQUIRE(l2.converged);
    const double f2_own = -ice::sample_log_likelihood(model, data, l2.theta) +
                          lambda * slopes_l2(l2.theta);
    const double f2_mle = -ice::sample_log_likelihood(model, data, mle.theta) +
                          lambda * slopes_l2(mle.theta);
    CHECK(f2_own <= f2_mle + 1e-10);
}

TEST_CASE("l1 at lambda 0 matches the mle") {
    LogisticModel model;
    const Dataset data = make_data(150, 3, 351);
    const FitResult mle = ice::fit_mle(model, data, {});
    const FitResult lasso = ice::fit_l1(model, data, 0.0);
    REQUIRE(lasso.converged);
    CHECK((lasso.theta - mle.theta).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("l1 satisfies the subgradient conditions at its solution") {
    LogisticModel model;
    const Dataset data = make_data(200, 4, 361);
    const double lambda = 0.05;
    const FitResult r = ice::fit_l1(model, data, lambda);
    REQUIRE(r.converged);
    const VectorXd g = -ice::score(model, data, r.theta);  // ∇ of the smooth part
    for (Eigen::Index k = 0; k < 4; ++k) {
        if (k == 0) continue;  // unpenalized
        if (r.theta[k] != 0.0)
            CHECK(std::abs(g[k] + lambda * (r.theta[k] > 0 ? 1.0 : -1.0)) <= 2e-6);
        else
            CHECK(std::abs(g[k]) <= lambda + 2e-6);
    }
    CHECK(std::abs(g[0]) <= 2e-6);
}

TEST_CASE("large lambda collapses the l1 slopes to exact zeros") {
    LogisticModel model;
    const Dataset data = make_data(100, 3, 371);
    const FitResult r = ice::fit_l1(model, data, 50.0);
    REQUIRE(r.converged);
    CHECK(r.theta[1] == 0.0);
    CHECK(r.theta[2] == 0.0);

    // With dead slopes the intercept solves the intercept-only problem.
    LogisticModel m1;
    Dataset d1;
    d1.x = MatrixXd::Ones(data.n(), 1);
    d1.y = data.y;
    const FitResult only = ice::fit_mle(m1, d1, {});
    CHECK(std::abs(r.theta[0] - only.theta[0]) <= 1e-6);
}

TEST_CASE("l1 warm start at the solution returns immediately") {
    LogisticModel model;
    const Dataset data = make_data(100, 3, 381);
    const FitResult first = ice::fit_l1(model, data, 0.02);
    REQUIRE(first.converged);
    FitConfig cfg;
    cfg.init = first.theta;
    const FitResult again = ice::fit_l1(model, data, 0.02, false, cfg);
    CHECK(again.iters == 0);
    CHECK(again.theta == first.theta);
}

TEST_CASE("fold assignment is a balanced deterministic partition") {
    const Eigen::Index n = 103;
    const int folds = 10;
    const auto a = ice::fold_assignment(n, folds, 42);
    const auto b = ice::fold_assignment(n, folds, 42);
    CHECK(a == b);
    const auto c = ice::fold_assignment(n, folds, 43);
    CHECK(a != c);

    std::vector<int> counts(folds, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        REQUIRE(a[static_cast<std::size_t>(i)] >= 0);
        REQUIRE(a[static_cast<std::size_t>(i)] < folds);
        ++counts[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
    }
    CHECK(*std::max_element(counts.begin(), counts.end()) -
              *std::min_element(counts.begin(), counts.end()) <= 1);
}

TEST_CASE("cross validation produces a full curve and a converged refit") {
    LogisticModel model;
    const Dataset data = make_data(200, 3, 391);
    ice::CvConfig cfg;
    cfg.folds = 5;
    cfg.lambda_grid = {0.001, 0.01, 0.1, 1.0};
    cfg.fold_seed = 7;
    const ice::CvResult res = ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg);

    REQUIRE(res.curve.size() == 4);
    for (std::size_t g = 0; g < res.curve.size(); ++g) {
        CHECK(std::isfinite(res.curve[g].mean_entropy));
        CHECK(res.curve[g].std_entropy >= 0.0);
        if (g) CHECK(res.curve[g].lambda > res.curve[g - 1].lambda);
    }
    CHECK(std::count_if(cfg.lambda_grid.begin(), cfg.lambda_grid.end(),
                        [&](double l) { return l == res.best_lambda; }) == 1);
    CHECK(res.fit.converged);
    REQUIRE(res.fit.lambda.has_value());
    CHECK(*res.fit.lambda == res.best_lambda);

    // Same configuration, same outcome, bit for bit.
    const ice::CvResult rerun = ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg);
    CHECK(rerun.best_lambda == res.best_lambda);
    CHECK(rerun.fit.theta == res.fit.theta);
    for (std::size_t g = 0; g < res.curve.size(); ++g)
        CHECK(rerun.curve[g].mean_entropy == res.curve[g].mean_entropy);
}

TEST_CASE("duplicated grid points earn identical curve entries") {
    LogisticModel model;
    const Dataset data = make_data(120, 3, 401);
    ice::CvConfig cfg;
    cfg.folds = 4;
    cfg.lambda_grid = {0.05, 0.05, 0.5};
    cfg.fold_seed = 3;
    const ice::CvResult res = ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg);
    REQUIRE(res.curve.size() == 3);
    CHECK(res.curve[0].lambda == res.curve[1].lambda);
    CHECK(res.curve[0].mean_entropy == res.curve[1].mean_entropy);
    CHECK(res.curve[0].std_entropy == res.curve[1].std_entropy);
}

TEST_CASE("two folds on four rows match a hand-run of both folds") {
    LogisticModel model;
    Dataset d;
    d.x.resize(4, 2);
    d.x << 1, -1.2, 1, 0.4, 1, 0.9, 1, -0.5;
    d.y.resize(4);
    d.y << 0, 1, 0, 1;

    // Find a fold seed whose first shuffle leaves both classes in both folds.
    std::uint64_t seed = 0;
    std::vector<int> assignment;
    for (;; ++seed) {
        assignment = ice::fold_assignment(4, 2, ice::derive_seed(seed, "folds"));
        if (!single_class(d, assignment, 2)) break;
    }

    ice::CvConfig cfg;
    cfg.folds = 2;
    cfg.lambda_grid = {0.25};
    cfg.fold_seed = seed;
    const ice::CvResult res = ice::cross_validate(model, d, ice::penalized_l2(cfg), cfg);

    double hand[2];
    for (int f = 0; f < 2; ++f) {
        Dataset train, val;
        std::vector<Eigen::Index> tr, va;
        for (Eigen::Index i = 0; i < 4; ++i)
            (assignment[static_cast<std::size_t>(i)] == f ? va : tr).push_back(i);
        train.x.resize(static_cast<Eigen::Index>(tr.size()), 2);
        train.y.resize(static_cast<Eigen::Index>(tr.size()));
        val.x.resize(static_cast<Eigen::Index>(va.size()), 2);
        val.y.resize(static_cast<Eigen::Index>(va.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) {
            train.x.row(static_cast<Eigen::Index>(i)) = d.x.row(tr[i]);
            train.y[static_cast<Eigen::Index>(i)] = d.y[tr[i]];
        }
        for (std::size_t i = 0; i < va.size(); ++i) {
            val.x.row(static_cast<Eigen::Index>(i)) = d.x.row(va[i]);
            val.y[static_cast<Eigen::Index>(i)] = d.y[va[i]];
        }
        const FitResult fr = ice::fit_l2(model, train, 0.25);
        hand[f] = ice::entropy_estimate(model, val, fr.theta);
    }
    CHECK(res.curve.size() == 1);
    CHECK(res.curve[0].mean_entropy == doctest::Approx((hand[0] + hand[1]) / 2.0).epsilon(1e-14));
}

TEST_CASE("best lambda is invariant to grid permutation") {
    LogisticModel model;
    const Dataset data = make_data(150, 3, 406);
    ice::CvConfig cfg;
    cfg.folds = 5;
    cfg.fold_seed = 2;
    cfg.lambda_grid = {0.001, 0.01, 0.1, 1.0};
    const ice::CvResult a = ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg);
    cfg.lambda_grid = {0.1, 0.001, 1.0, 0.01};
    const ice::CvResult b = ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg);
    CHECK(a.best_lambda == b.best_lambda);
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t g = 0; g < a.curve.size(); ++g) {
        CHECK(a.curve[g].lambda == b.curve[g].lambda);
        CHECK(a.curve[g].mean_entropy == b.curve[g].mean_entropy);
    }
}

TEST_CASE("entropy ties resolve toward the larger lambda") {
    // Past the l1 kill point every grid value yields the same intercept-only
    // model, so the curve is flat there and the largest λ must win.
    LogisticModel model;
    const Dataset data = make_data(100, 3, 411);
    ice::CvConfig cfg;
    cfg.folds = 4;
    cfg.lambda_grid = {5.0, 50.0, 500.0};
    cfg.fold_seed = 11;
    const ice::CvResult res = ice::cross_validate(model, data, ice::penalized_l1(cfg), cfg);
    CHECK(res.curve[0].mean_entropy == res.curve[2].mean_entropy);
    CHECK(res.best_lambda == 500.0);
    CHECK(res.fit.theta[1] == 0.0);
    CHECK(res.fit.theta[2] == 0.0);
}

TEST_CASE("a class too rare for any fold layout is an error") {
    LogisticModel model;
    Dataset d = make_data(30, 2, 421);
    d.y.setZero();
    d.y[4] = 1.0;  // lone positive: nine folds out of ten see one class
    ice::CvConfig cfg;
    cfg.folds = 10;
    cfg.lambda_grid = {0.1};
    CHECK_THROWS_AS(ice::cross_validate(model, d, ice::penalized_l2(cfg), cfg),
                    ice::NumericError);
}

TEST_CASE("a single-class first shuffle recovers through the reshuffle") {
    LogisticModel model;
    Dataset d = make_data(24, 2, 431);
    d.y.setZero();
    for (Eigen::Index i : {1, 5, 9, 13, 17, 21}) d.y[i] = 1.0;  // 6 positives, folds of 6
    const int folds = 4;

    // Hunt for a seed whose first shuffle strands a fold without positives
    // while its reshuffle does not.
    std::optional<std::uint64_t> hit;
    for (std::uint64_t s = 0; s < 4000 && !hit; ++s) {
        const auto first = ice::fold_assignment(d.n(), folds, ice::derive_seed(s, "folds"));
        const auto second = ice::fold_assignment(d.n(), folds, ice::derive_seed(s, "refold"));
        if (single_class(d, first, folds) && !single_class(d, second, folds)) hit = s;
    }
    REQUIRE(hit.has_value());

    ice::CvConfig cfg;
    cfg.folds = folds;
    cfg.lambda_grid = {0.1, 1.0};
    cfg.fold_seed = *hit;
    const ice::CvResult res = ice::cross_validate(model, d, ice::penalized_l2(cfg), cfg);
    CHECK(res.fit.converged);
    CHECK(std::isfinite(res.curve[0].mean_entropy));
}

TEST_CASE("configuration contract checks") {
    LogisticModel model;
    const Dataset data = make_data(20, 2, 441);
    ice::CvConfig cfg;
    cfg.folds = 1;
    CHECK_THROWS_AS(ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg),
                    ice::ContractViolation);
    cfg.folds = 25;  // more folds than rows
    CHECK_THROWS_AS(ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg),
                    ice::ContractViolation);
    cfg.folds = 5;
    cfg.lambda_grid = {0.1, -0.2};
    CHECK_THROWS_AS(ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg),
                    ice::ContractViolation);
    cfg.lambda_grid.clear();
    CHECK_THROWS_AS(ice::cross_validate(model, data, ice::penalized_l2(cfg), cfg),
                    ice::ContractViolation);
    CHECK_THROWS_AS(ice::fit_l2(model, data, -1.0), ice::ContractViolation);
    CHECK_THROWS_AS(ice::fit_l1(model, data, -1.0), ice::ContractViolation);
}

TEST_SUITE_END();
