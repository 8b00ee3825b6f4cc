#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "ice/info_matrices.hpp"
#include "ice/model.hpp"

namespace ice {

// One information-criterion evaluation. The identity
//   value = -2 (loglik_sum - correction)
// holds exactly for every report this module emits.
struct CriterionReport {
    std::string name;  // AIC | TIC | RIC
    double value = 0;
    double loglik_sum = 0;  // Σ_i log g_i, plus λ Σ_i k_i for RIC
    double correction = 0;  // parameter count or trace term
    long n = 0;
    long p = 0;
    std::optional<double> lambda;  // RIC only

    nlohmann::ordered_json to_json() const;  // lambda omitted when absent
};

// value = -2 (Σ log g - p)
CriterionReport aic(const ModelContract& model, const Dataset& data, const ParamVector& theta_hat);

// value = -2 (Σ log g - tr(Î Ĵ⁻¹)) with both matrices at θ̂ on the same data
CriterionReport tic(const ModelContract& model, const Dataset& data, const ParamVector& theta_hat);

// TIC from a precomputed log-likelihood sum and information pair; lets callers
// reuse matrices or substitute alternatives.
CriterionReport tic_from_info(double loglik_sum, InfoMatrices info, long n);

// Penalized variant: per-observation terms log g_i + λ k_i throughout.
CriterionReport ric(const ModelContract& model, const Dataset& data, const ParamVector& theta_lambda,
                    const PenaltyFunction& penalty, double lambda);

struct EntropyComparison {
    double h_fg;  // Ĥ of the fitted parameter on the held-out set
    double h_ff;  // Ĥ of the reference parameter on the same set
    double kl;    // h_fg - h_ff
};

EntropyComparison cross_entropy_and_kl(const ModelContract& model, const Dataset& test,
                                       const ParamVector& theta, const ParamVector& theta0);

}  // namespace ice
