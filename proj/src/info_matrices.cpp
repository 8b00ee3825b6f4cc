#include "ice/info_matrices.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ice {

namespace {

void check_theta(const Dataset& data, const ParamVector& theta, const char* where) {
    if (data.x.cols() != theta.size())
        throw ContractViolation(std::string(where) + ": x has " + std::to_string(data.x.cols()) +
                                " columns but theta has " + std::to_string(theta.size()));
    if (data.n() < 1) throw ContractViolation(std::string(where) + ": empty dataset");
}

// Hessian sums must come back symmetric up to roundoff; anything larger means
// the model's hess_log_density is inconsistent.
Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m, const char* where) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * scale)
        throw NumericError(std::string(where) + ": Hessian sum asymmetric beyond tolerance (" +
                           std::to_string(asym / scale) + " relative)");
    return 0.5 * (m + m.transpose());
}

}  // namespace

double QuadraticPenalty::value(Eigen::Ref<const Eigen::VectorXd>, double,
                               const ParamVector& theta) const {
    return -0.5 * theta.squaredNorm();
}

Eigen::VectorXd QuadraticPenalty::grad(Eigen::Ref<const Eigen::VectorXd>, double,
                                       const ParamVector& theta) const {
    return -theta;
}

Eigen::MatrixXd QuadraticPenalty::hess(Eigen::Ref<const Eigen::VectorXd>, double,
                                       const ParamVector& theta) const {
    return -Eigen::MatrixXd::Identity(theta.size(), theta.size());
}

InfoMatrices empirical_info(const ModelContract& model, const Dataset& data,
                            const ParamVector& theta) {
    check_theta(data, theta, "empirical_info");
    Eigen::MatrixXd outer_sum, hess_sum;
    model.info_sums(data, theta, outer_sum, hess_sum);
    const double n = static_cast<double>(data.n());
    InfoMatrices info;
    info.i_hat = outer_sum / n;
    info.j_hat = symmetrized(hess_sum, "empirical_j") / -n;
    info.theta_at = theta;
    return info;
}

Eigen::MatrixXd empirical_i(const ModelContract& model, const Dataset& data,
                            const ParamVector& theta) {
    return empirical_info(model, data, theta).i_hat;
}

Eigen::MatrixXd empirical_j(const ModelContract& model, const Dataset& data,
                            const ParamVector& theta) {
    return empirical_info(model, data, theta).j_hat;
}

InfoMatrices penalized_matrices(const ModelContract& model, const Dataset& data,
                                const ParamVector& theta, const PenaltyFunction& penalty,
                                double lambda) {
    check_theta(data, theta, "penalized_matrices");
    if (!(lambda >= 0))
        throw ContractViolation("penalized_matrices: lambda must be >= 0, got " +
                                std::to_string(lambda));
    // λ = 0 shifts nothing; reuse the unpenalized accumulation verbatim.
    if (lambda == 0) return empirical_info(model, data, theta);

    const Eigen::Index p = theta.size();
    Eigen::MatrixXd outer_sum = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd hess_sum = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const auto row = data.x.row(i);
        const double k = penalty.value(row, data.y[i], theta);
        if (k > 0)
            throw ContractViolation("penalized_matrices: k_i(theta) must be <= 0, got " +
                                    std::to_string(k) + " at row " + std::to_string(i));
        const Eigen::VectorXd g =
            model.grad_log_density(row, data.y[i], theta) + lambda * penalty.grad(row, data.y[i], theta);
        outer_sum.noalias() += g * g.transpose();
        hess_sum += model.hess_log_density(row, data.y[i], theta) +
                    lambda * penalty.hess(row, data.y[i], theta);
        if (!outer_sum.allFinite() || !hess_sum.allFinite())
            throw NumericError("penalized_matrices: non-finite value at row " + std::to_string(i),
                               static_cast<long>(i));
    }
    const double n = static_cast<double>(data.n());
    InfoMatrices info;
    info.i_hat = outer_sum / n;
    info.j_hat = symmetrized(hess_sum, "penalized_matrices") / -n;
    info.theta_at = theta;
    return info;
}

LadderFactor::LadderFactor(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw ContractViolation("LadderFactor: matrix must be square");
    const Eigen::Index p = m.rows();
    static constexpr double kLadder[] = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};
    for (double jitter : kLadder) {
        Eigen::MatrixXd shifted = m;
        shifted.diagonal().array() += jitter;
        llt_.compute(shifted);
        if (llt_.info() == Eigen::Success) {
            use_llt_ = true;
            jitter_ = jitter;
            return;
        }
        ldlt_.compute(shifted);
        if (ldlt_.info() == Eigen::Success) {
            const Eigen::VectorXd d = ldlt_.vectorD().cwiseAbs();
            const double dmax = d.maxCoeff();
            if (dmax > 0 && d.minCoeff() > 1e-14 * dmax) {
                use_llt_ = false;
                jitter_ = jitter;
                return;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
    const double cond = ev.minCoeff() > 0 ? ev.maxCoeff() / ev.minCoeff()
                                          : std::numeric_limits<double>::infinity();
    throw SingularInformation("LadderFactor: matrix of size " + std::to_string(p) +
                                  " not invertible after ridge ladder, condition estimate " +
                                  std::to_string(cond),
                              cond);
}

Eigen::MatrixXd LadderFactor::solve(const Eigen::MatrixXd& rhs) const {
    if (use_llt_) return llt_.solve(rhs);
    return ldlt_.solve(rhs);
}

double trace_i_jinv(InfoMatrices& info) {
    if (info.i_hat.rows() != info.i_hat.cols() || info.j_hat.rows() != info.j_hat.cols() ||
        info.i_hat.rows() != info.j_hat.rows())
        throw ContractViolation("trace_i_jinv: i_hat and j_hat must be square and same size");
    const LadderFactor factor(info.j_hat);
    const double trace = factor.solve(info.i_hat).trace();
    if (!std::isfinite(trace)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info.j_hat);
        const Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
        const double cond = ev.minCoeff() > 0 ? ev.maxCoeff() / ev.minCoeff()
                                              : std::numeric_limits<double>::infinity();
        throw SingularInformation("trace_i_jinv: non-finite trace, condition estimate " +
                                      std::to_string(cond),
                                  cond);
    }
    info.jitter_used = factor.jitter();
    return trace;
}

}  // namespace ice
