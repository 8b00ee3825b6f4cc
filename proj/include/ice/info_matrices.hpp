#pragma once

#include <Eigen/Dense>

#include "ice/model.hpp"

namespace ice {

// Empirical information pair at a fixed θ.
//   i_hat = (1/n) Σ_i g_i g_iᵀ          (outer products of per-row scores)
//   j_hat = -(1/n) Σ_i H_i, symmetrized  (negative mean Hessian)
struct InfoMatrices {
    Eigen::MatrixXd i_hat;
    Eigen::MatrixXd j_hat;
    ParamVector theta_at;
    double jitter_used = 0;  // diagonal ridge consumed by the last solve against j_hat
};

// Per-observation penalty contribution k_i(θ) ≤ 0 with derivatives in θ.
class PenaltyFunction {
public:
    virtual ~PenaltyFunction() = default;
    virtual double value(Eigen::Ref<const Eigen::VectorXd> row, double y,
                         const ParamVector& theta) const = 0;
    virtual Eigen::VectorXd grad(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                 const ParamVector& theta) const = 0;
    virtual Eigen::MatrixXd hess(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                 const ParamVector& theta) const = 0;
};

// k_i(θ) = -‖θ‖²/2 for every observation.
class QuadraticPenalty : public PenaltyFunction {
public:
    double value(Eigen::Ref<const Eigen::VectorXd> row, double y,
                 const ParamVector& theta) const override;
    Eigen::VectorXd grad(Eigen::Ref<const Eigen::VectorXd> row, double y,
                         const ParamVector& theta) const override;
    Eigen::MatrixXd hess(Eigen::Ref<const Eigen::VectorXd> row, double y,
                         const ParamVector& theta) const override;
};

Eigen::MatrixXd empirical_i(const ModelContract& model, const Dataset& data,
                            const ParamVector& theta);
Eigen::MatrixXd empirical_j(const ModelContract& model, const Dataset& data,
                            const ParamVector& theta);

// Both matrices from one pass over the data.
InfoMatrices empirical_info(const ModelContract& model, const Dataset& data,
                            const ParamVector& theta);

// Penalized variants built from the shifted per-observation terms
// log g_i + λ k_i. With λ = 0 this is exactly empirical_info.
InfoMatrices penalized_matrices(const ModelContract& model, const Dataset& data,
                                const ParamVector& theta, const PenaltyFunction& penalty,
                                double lambda);

// Symmetric factorization with a fixed diagonal ridge ladder
// {0, 1e-10, 1e-8, 1e-6, 1e-4}: LLT first, then pivoted LDLT, escalating the
// ridge only when both fail. Throws SingularInformation once exhausted.
class LadderFactor {
public:
    explicit LadderFactor(const Eigen::MatrixXd& m);
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    double jitter() const { return jitter_; }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    bool use_llt_ = false;
    double jitter_ = 0;
};

// tr(Î Ĵ⁻¹) by factorize-and-solve; records the ridge in info.jitter_used.
double trace_i_jinv(InfoMatrices& info);

}  // namespace ice
