#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <random>

#include "ice/model.hpp"

namespace ice {

// Recipe for one synthetic logistic problem: regressor count p (intercept
// excluded), m of the p true slopes forced to zero, train/test sizes, the
// covariance spectrum box [eig_lo, eig_hi], the class-balance band
// (balance_lo, balance_hi), the floor on true-model entropy, and the seed
// that every random draw descends from.
struct ProblemSpec {
    long p = 10;
    long m = 4;
    long n_train = 500;
    long n_test = 100000;
    double eig_lo = 1e-4;
    double eig_hi = 0.1;
    double balance_lo = 0.35;
    double balance_hi = 0.65;
    double entropy_floor = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ProblemSpec from_json(const nlohmann::json& j);
};

struct Problem {
    ParamVector theta0;  // p+1, intercept first
    Eigen::VectorXd mu;  // p
    Eigen::MatrixXd sigma;  // p×p SPD
    Dataset train;
    Dataset test;
    long discarded_attempts = 0;
};

// U diag(eigvals) Uᵀ with Haar-orthonormal U (QR of a Gaussian matrix,
// R-diagonal signs fixed positive) and eigvals i.i.d. Uniform[a,b], redrawn
// while any pair sits closer than 1e-12. eigvals_out receives the drawn
// spectrum when non-null.
Eigen::MatrixXd random_covariance(Eigen::Index p, double a, double b, std::mt19937_64& rng,
                                  Eigen::VectorXd* eigvals_out = nullptr);

// n draws of mu + Γ z, Γ the lower Cholesky factor of sigma, z standard
// normal filled row by row. No intercept column.
Eigen::MatrixXd sample_regressors(Eigen::Index n, const Eigen::VectorXd& mu,
                                  const Eigen::MatrixXd& sigma, std::mt19937_64& rng);

// Intercept slot 0 left at zero; a seeded shuffle picks the m dead slopes,
// the surviving p−m get i.i.d. N(0,1).
ParamVector generate_true_params(Eigen::Index p, Eigen::Index m, std::mt19937_64& rng);

// Bisection on the intercept over [−50, 50] driving the mean predicted
// probability on the probe design to 0.5 (strictly decreasing in the
// intercept). Accepts only if the converged mean sits inside the balance
// band and the mean per-row Bernoulli entropy clears the floor; otherwise
// the draw is rejected and the caller discards the attempt.
std::optional<ParamVector> adjust_intercept(const ParamVector& theta0, const ModelContract& model,
                                            const Eigen::MatrixXd& probe_design,
                                            const ProblemSpec& spec);

// y_i ~ Bernoulli(p(y=1 | x_i, θ0)) drawn in row order from one uniform each.
Eigen::VectorXd generate_responses(const Eigen::MatrixXd& design, const ParamVector& theta0,
                                   std::mt19937_64& rng);

// Prepends the column of ones.
Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& raw);

// Full pipeline: covariance, mean, train/test regressors, sparse θ0,
// intercept adjustment, responses. Rejected intercept adjustments discard
// the whole attempt and restart from the next derived seed, up to 50 tries.
Problem make_problem(const ProblemSpec& spec);

// Directory layout: spec.json plus theta0/mu/sigma/train/test CSVs, all
// doubles as shortest round-trip decimals so load_problem is bit-faithful.
void save_problem(const std::filesystem::path& dir, const Problem& problem,
                  const ProblemSpec& spec);
Problem load_problem(const std::filesystem::path& dir, ProblemSpec* spec_out = nullptr);

}  // namespace ice
