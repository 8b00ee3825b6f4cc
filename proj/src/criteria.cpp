#include "ice/criteria.hpp"

#include <iostream>

namespace ice {

namespace {

// Criteria only mean something at a stationary point of the objective that
// produced θ̂; a loud score is worth a warning but not an error.
void warn_if_off_stationary(const Eigen::VectorXd& score_vec, const char* which) {
    const double norm = score_vec.lpNorm<Eigen::Infinity>();
    if (norm > 1e-4)
        std::cerr << "warning: " << which << " evaluated where the score has infinity norm "
                  << norm << "; theta is not a stationary point\n";
}

}  // namespace

nlohmann::ordered_json CriterionReport::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["value"] = value;
    j["loglik_sum"] = loglik_sum;
    j["correction"] = correction;
    j["n"] = n;
    j["p"] = p;
    if (lambda) j["lambda"] = *lambda;
    return j;
}

CriterionReport aic(const ModelContract& model, const Dataset& data,
                    const ParamVector& theta_hat) {
    data.validate();
    CriterionReport r;
    r.name = "AIC";
    r.loglik_sum = model.log_density_sum(data, theta_hat);
    r.correction = static_cast<double>(theta_hat.size());
    r.value = -2.0 * (r.loglik_sum - r.correction);
    r.n = static_cast<long>(data.n());
    r.p = static_cast<long>(theta_hat.size());
    return r;
}

CriterionReport tic(const ModelContract& model, const Dataset& data,
                    const ParamVector& theta_hat) {
    data.validate();
    warn_if_off_stationary(score(model, data, theta_hat), "tic");
    InfoMatrices info = empirical_info(model, data, theta_hat);
    return tic_from_info(model.log_density_sum(data, theta_hat), std::move(info),
                         static_cast<long>(data.n()));
}

CriterionReport tic_from_info(double loglik_sum, InfoMatrices info, long n) {
    CriterionReport r;
    r.name = "TIC";
    r.loglik_sum = loglik_sum;
    r.correction = trace_i_jinv(info);
    r.value = -2.0 * (r.loglik_sum - r.correction);
    r.n = n;
    r.p = static_cast<long>(info.i_hat.rows());
    return r;
}

CriterionReport ric(const ModelContract& model, const Dataset& data,
                    const ParamVector& theta_lambda, const PenaltyFunction& penalty,
                    double lambda) {
    data.validate();
    if (!(lambda >= 0))
        throw ContractViolation("ric: lambda must be >= 0, got " + std::to_string(lambda));

    double penalty_sum = 0;
    if (lambda > 0) {
        for (Eigen::Index i = 0; i < data.n(); ++i)
            penalty_sum += penalty.value(data.x.row(i), data.y[i], theta_lambda);
    }
    // Stationarity is judged against the penalized objective that produced θ_λ.
    Eigen::VectorXd pen_score = score(model, data, theta_lambda);
    if (lambda > 0) {
        Eigen::VectorXd pen_grad_sum = Eigen::VectorXd::Zero(theta_lambda.size());
        for (Eigen::Index i = 0; i < data.n(); ++i)
            pen_grad_sum += penalty.grad(data.x.row(i), data.y[i], theta_lambda);
        pen_score += lambda * pen_grad_sum / static_cast<double>(data.n());
    }
    warn_if_off_stationary(pen_score, "ric");

    InfoMatrices info = penalized_matrices(model, data, theta_lambda, penalty, lambda);
    CriterionReport r;
    r.name = "RIC";
    r.loglik_sum = model.log_density_sum(data, theta_lambda) + lambda * penalty_sum;
    r.correction = trace_i_jinv(info);
    r.value = -2.0 * (r.loglik_sum - r.correction);
    r.n = static_cast<long>(data.n());
    r.p = static_cast<long>(theta_lambda.size());
    r.lambda = lambda;
    return r;
}

EntropyComparison cross_entropy_and_kl(const ModelContract& model, const Dataset& test,
                                       const ParamVector& theta, const ParamVector& theta0) {
    EntropyComparison c{};
    c.h_fg = entropy_estimate(model, test, theta);
    c.h_ff = entropy_estimate(model, test, theta0);
    c.kl = c.h_fg - c.h_ff;
    return c;
}

}  // namespace ice
