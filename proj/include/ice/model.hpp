#pragma once

#include <Eigen/Dense>

#include "ice/errors.hpp"

namespace ice {

using ParamVector = Eigen::VectorXd;

// Design matrix plus binary responses. Column 0 of x is the intercept column
// of ones and counts toward p; y holds exactly 0 or 1.
struct Dataset {
    Eigen::MatrixXd x;  // n x p
    Eigen::VectorXd y;  // n

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index p() const { return x.cols(); }

    void validate() const;  // throws ContractViolation on any broken invariant
};

// Per-observation log density with first and second derivatives in θ.
// Batched aggregates have generic per-row defaults; concrete models override
// them with vectorized paths that must agree with the per-row definitions.
class ModelContract {
public:
    virtual ~ModelContract() = default;

    virtual double log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                               const ParamVector& theta) const = 0;
    virtual Eigen::VectorXd grad_log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                             const ParamVector& theta) const = 0;
    virtual Eigen::MatrixXd hess_log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                             const ParamVector& theta) const = 0;

    // Σ_i log g_i
    virtual double log_density_sum(const Dataset& data, const ParamVector& theta) const;
    // Σ_i ∇log g_i
    virtual Eigen::VectorXd grad_sum(const Dataset& data, const ParamVector& theta) const;
    // outer_sum = Σ_i (∇log g_i)(∇log g_i)ᵀ, hess_sum = Σ_i ∇²log g_i
    virtual void info_sums(const Dataset& data, const ParamVector& theta,
                           Eigen::MatrixXd& outer_sum, Eigen::MatrixXd& hess_sum) const;

    // Single-index structure hook: when log g_i depends on θ only through
    // t_i = x_iᵀθ, fills the first three derivatives in t and returns true.
    // Enables an analytic gradient of the trace penalty; false means callers
    // fall back to finite differences.
    virtual bool index_derivatives(const Dataset& /*data*/, const ParamVector& /*theta*/,
                                   Eigen::VectorXd& /*d1*/, Eigen::VectorXd& /*d2*/,
                                   Eigen::VectorXd& /*d3*/) const {
        return false;
    }
};

// Binary logistic model parameterized as p(y=1|x,θ) = 1/(1 + e^{xᵀθ}),
// so the success probability DEcreases in xᵀθ.
class LogisticModel : public ModelContract {
public:
    double log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                       const ParamVector& theta) const override;
    Eigen::VectorXd grad_log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                     const ParamVector& theta) const override;
    Eigen::MatrixXd hess_log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                     const ParamVector& theta) const override;

    double log_density_sum(const Dataset& data, const ParamVector& theta) const override;
    Eigen::VectorXd grad_sum(const Dataset& data, const ParamVector& theta) const override;
    void info_sums(const Dataset& data, const ParamVector& theta, Eigen::MatrixXd& outer_sum,
                   Eigen::MatrixXd& hess_sum) const override;
    bool index_derivatives(const Dataset& data, const ParamVector& theta, Eigen::VectorXd& d1,
                           Eigen::VectorXd& d2, Eigen::VectorXd& d3) const override;
};

// p(y=1|row,θ); overflow-safe for |rowᵀθ| up to 700.
double predict_prob(const ModelContract& model, Eigen::Ref<const Eigen::VectorXd> row,
                    const ParamVector& theta);

// ℓ(θ) = (1/n) Σ_i log g_i
double sample_log_likelihood(const ModelContract& model, const Dataset& data,
                             const ParamVector& theta);

// ∇ℓ(θ)
Eigen::VectorXd score(const ModelContract& model, const Dataset& data, const ParamVector& theta);

// Ĥ(θ) = -(1/n) Σ_i log g_i over a held-out set; estimates cross entropy.
double entropy_estimate(const ModelContract& model, const Dataset& test, const ParamVector& theta);

}  // namespace ice
