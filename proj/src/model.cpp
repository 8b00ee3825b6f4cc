#include "ice/model.hpp"

#include <cmath>
#include <string>

namespace ice {

namespace {

// log(1 + e^t), branch split at 0 so the exp never overflows
double softplus(double t) {
    return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// 1/(1 + e^{-t})
double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

void check_obs(Eigen::Ref<const Eigen::VectorXd> row, double y, const ParamVector& theta,
               const char* where) {
    if (row.size() != theta.size())
        throw ContractViolation(std::string(where) + ": row has " + std::to_string(row.size()) +
                                " entries but theta has " + std::to_string(theta.size()));
    if (y != 0.0 && y != 1.0)
        throw ContractViolation(std::string(where) + ": y must be 0 or 1, got " +
                                std::to_string(y));
}

void check_batch(const Dataset& data, const ParamVector& theta, const char* where) {
    if (data.x.cols() != theta.size())
        throw ContractViolation(std::string(where) + ": x has " + std::to_string(data.x.cols()) +
                                " columns but theta has " + std::to_string(theta.size()));
    if (data.y.size() != data.x.rows())
        throw ContractViolation(std::string(where) + ": y length does not match x rows");
    for (Eigen::Index i = 0; i < data.y.size(); ++i)
        if (data.y[i] != 0.0 && data.y[i] != 1.0)
            throw ContractViolation(std::string(where) + ": y[" + std::to_string(i) +
                                    "] must be 0 or 1");
}

[[noreturn]] void throw_nonfinite(const Eigen::VectorXd& per_row, const char* where) {
    for (Eigen::Index i = 0; i < per_row.size(); ++i)
        if (!std::isfinite(per_row[i]))
            throw NumericError(std::string(where) + ": non-finite contribution at row " +
                                   std::to_string(i),
                               static_cast<long>(i));
    throw NumericError(std::string(where) + ": non-finite accumulation");
}

}  // namespace

void Dataset::validate() const {
    if (x.rows() < 1 || x.cols() < 1) throw ContractViolation("Dataset: empty design matrix");
    if (y.size() != x.rows())
        throw ContractViolation("Dataset: y has " + std::to_string(y.size()) + " entries for " +
                                std::to_string(x.rows()) + " rows");
    if (!x.allFinite()) throw ContractViolation("Dataset: non-finite regressor");
    if ((x.col(0).array() != 1.0).any())
        throw ContractViolation("Dataset: column 0 must be the intercept column of ones");
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0)
            throw ContractViolation("Dataset: y[" + std::to_string(i) + "] must be 0 or 1");
}

double ModelContract::log_density_sum(const Dataset& data, const ParamVector& theta) const {
    check_batch(data, theta, "log_density_sum");
    double sum = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double v = log_density(data.x.row(i), data.y[i], theta);
        if (!std::isfinite(v))
            throw NumericError("log_density_sum: non-finite value at row " + std::to_string(i),
                               static_cast<long>(i));
        sum += v;
    }
    return sum;
}

Eigen::VectorXd ModelContract::grad_sum(const Dataset& data, const ParamVector& theta) const {
    check_batch(data, theta, "grad_sum");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        sum += grad_log_density(data.x.row(i), data.y[i], theta);
        if (!sum.allFinite())
            throw NumericError("grad_sum: non-finite value at row " + std::to_string(i),
                               static_cast<long>(i));
    }
    return sum;
}

void ModelContract::info_sums(const Dataset& data, const ParamVector& theta,
                              Eigen::MatrixXd& outer_sum, Eigen::MatrixXd& hess_sum) const {
    check_batch(data, theta, "info_sums");
    const Eigen::Index p = theta.size();
    outer_sum = Eigen::MatrixXd::Zero(p, p);
    hess_sum = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const Eigen::VectorXd g = grad_log_density(data.x.row(i), data.y[i], theta);
        outer_sum.noalias() += g * g.transpose();
        hess_sum += hess_log_density(data.x.row(i), data.y[i], theta);
        if (!outer_sum.allFinite() || !hess_sum.allFinite())
            throw NumericError("info_sums: non-finite value at row " + std::to_string(i),
                               static_cast<long>(i));
    }
}

double LogisticModel::log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                  const ParamVector& theta) const {
    check_obs(row, y, theta, "log_density");
    const double t = row.dot(theta);
    // log p(1) = -softplus(t), log p(0) = -softplus(-t)
    return -softplus(y == 1.0 ? t : -t);
}

Eigen::VectorXd LogisticModel::grad_log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                                const ParamVector& theta) const {
    check_obs(row, y, theta, "grad_log_density");
    const double t = row.dot(theta);
    // ∂t log g = (1-y) - σ(t)
    return ((1.0 - y) - sigmoid(t)) * row;
}

Eigen::MatrixXd LogisticModel::hess_log_density(Eigen::Ref<const Eigen::VectorXd> row, double y,
                                                const ParamVector& theta) const {
    check_obs(row, y, theta, "hess_log_density");
    const double t = row.dot(theta);
    const double w = sigmoid(t) * sigmoid(-t);  // σ(t)(1-σ(t)), label-free
    return (-w) * (row * row.transpose());
}

namespace {

struct LogisticTerms {
    Eigen::ArrayXd t;     // x θ
    Eigen::ArrayXd sig;   // σ(t)
    Eigen::ArrayXd sigm;  // σ(-t) = 1 - σ(t), computed stably
};

LogisticTerms logistic_terms(const Dataset& data, const ParamVector& theta, const char* where) {
    check_batch(data, theta, where);
    LogisticTerms lt;
    lt.t = (data.x * theta).array();
    if (!lt.t.isFinite().all()) throw_nonfinite(lt.t.matrix(), where);
    const Eigen::ArrayXd ena = (-lt.t.abs()).exp();  // e^{-|t|} in (0,1]
    const Eigen::ArrayXd denom = 1.0 + ena;
    lt.sig = (lt.t >= 0).select(Eigen::ArrayXd::Ones(lt.t.size()), ena) / denom;
    lt.sigm = (lt.t >= 0).select(ena, Eigen::ArrayXd::Ones(lt.t.size())) / denom;
    return lt;
}

}  // namespace

double LogisticModel::log_density_sum(const Dataset& data, const ParamVector& theta) const {
    check_batch(data, theta, "log_density_sum");
    Eigen::ArrayXd t = (data.x * theta).array();
    // s = +t for y=1, -t for y=0; log g = -softplus(s)
    Eigen::ArrayXd s = (2.0 * data.y.array() - 1.0) * t;
    Eigen::ArrayXd sp = s.max(0.0) + (-s.abs()).exp().log1p();
    if (!sp.isFinite().all()) throw_nonfinite((-sp).matrix(), "log_density_sum");
    return -sp.sum();
}

Eigen::VectorXd LogisticModel::grad_sum(const Dataset& data, const ParamVector& theta) const {
    const LogisticTerms lt = logistic_terms(data, theta, "grad_sum");
    const Eigen::VectorXd c = (1.0 - data.y.array()) - lt.sig;
    return data.x.transpose() * c;
}

void LogisticModel::info_sums(const Dataset& data, const ParamVector& theta,
                              Eigen::MatrixXd& outer_sum, Eigen::MatrixXd& hess_sum) const {
    const LogisticTerms lt = logistic_terms(data, theta, "info_sums");
    const Eigen::Index p = theta.size();
    const Eigen::ArrayXd c = (1.0 - data.y.array()) - lt.sig;
    const Eigen::ArrayXd w = lt.sig * lt.sigm;

    Eigen::MatrixXd b = data.x;
    b.array().colwise() *= c.abs();
    outer_sum = Eigen::MatrixXd::Zero(p, p);
    outer_sum.selfadjointView<Eigen::Lower>().rankUpdate(b.transpose());
    outer_sum.triangularView<Eigen::StrictlyUpper>() =
        outer_sum.transpose().triangularView<Eigen::StrictlyUpper>();

    b = data.x;
    b.array().colwise() *= w.sqrt();
    hess_sum = Eigen::MatrixXd::Zero(p, p);
    hess_sum.selfadjointView<Eigen::Lower>().rankUpdate(b.transpose());
    hess_sum.triangularView<Eigen::StrictlyUpper>() =
        hess_sum.transpose().triangularView<Eigen::StrictlyUpper>();
    hess_sum = -hess_sum;

    if (!outer_sum.allFinite() || !hess_sum.allFinite())
        throw NumericError("info_sums: non-finite accumulation");
}

bool LogisticModel::index_derivatives(const Dataset& data, const ParamVector& theta,
                                      Eigen::VectorXd& d1, Eigen::VectorXd& d2,
                                      Eigen::VectorXd& d3) const {
    const LogisticTerms lt = logistic_terms(data, theta, "index_derivatives");
    const Eigen::ArrayXd w = lt.sig * lt.sigm;
    d1 = ((1.0 - data.y.array()) - lt.sig).matrix();
    d2 = (-w).matrix();
    d3 = (-w * (lt.sigm - lt.sig)).matrix();  // -w(1-2σ)
    return true;
}

double predict_prob(const ModelContract& model, Eigen::Ref<const Eigen::VectorXd> row,
                    const ParamVector& theta) {
    return std::exp(model.log_density(row, 1.0, theta));
}

double sample_log_likelihood(const ModelContract& model, const Dataset& data,
                             const ParamVector& theta) {
    if (data.n() < 1) throw ContractViolation("sample_log_likelihood: empty dataset");
    return model.log_density_sum(data, theta) / static_cast<double>(data.n());
}

Eigen::VectorXd score(const ModelContract& model, const Dataset& data, const ParamVector& theta) {
    if (data.n() < 1) throw ContractViolation("score: empty dataset");
    return model.grad_sum(data, theta) / static_cast<double>(data.n());
}

double entropy_estimate(const ModelContract& model, const Dataset& test,
                        const ParamVector& theta) {
    if (test.n() < 1) throw ContractViolation("entropy_estimate: empty dataset");
    return -model.log_density_sum(test, theta) / static_cast<double>(test.n());
}

}  // namespace ice
