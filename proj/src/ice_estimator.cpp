#include "ice/ice_estimator.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "ice/baselines.hpp"
#include "ice/rng.hpp"

namespace ice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

struct TraceEval {
    double value = 0;   // tr(Î Ĵ⁻¹)
    double jitter = 0;  // ridge the solve needed
};

TraceEval eval_trace(const ModelContract& model, const Dataset& data, const ParamVector& theta) {
    InfoMatrices info = empirical_info(model, data, theta);
    TraceEval te;
    te.value = trace_i_jinv(info);
    te.jitter = info.jitter_used;
    return te;
}

struct ObjectiveEval {
    double value = kInf;
    double jitter = 0;
    bool ok = false;
    bool singular = false;
};

// -ℓ + tr/(3n); failures are reported, not thrown, so the line search can
// back away from a bad trial point.
ObjectiveEval try_objective(const ModelContract& model, const Dataset& data,
                            const ParamVector& theta) {
    ObjectiveEval ev;
    if (!theta.allFinite()) return ev;
    try {
        const double nll = -sample_log_likelihood(model, data, theta);
        const TraceEval te = eval_trace(model, data, theta);
        ev.value = nll + te.value / (3.0 * static_cast<double>(data.n()));
        ev.jitter = te.jitter;
        ev.ok = std::isfinite(ev.value);
    } catch (const SingularInformation&) {
        ev.singular = true;
    } catch (const NumericError&) {
    }
    return ev;
}

// Gradient of tr(Î Ĵ⁻¹) for single-index models. With t_i = x_iᵀθ and
// d1,d2,d3 the first three t-derivatives of log g_i:
//   ∂Î/∂θ_k  = (1/n) Σ 2 d1 d2 x_ik x xᵀ
//   ∂Ĵ/∂θ_k  = -(1/n) Σ d3 x_ik x xᵀ
//   ∂T/∂θ_k  = (1/n) Σ x_ik (2 d1 d2 a_i + d3 b_i),
// a_i = x_iᵀ Ĵ⁻¹ x_i, b_i = x_iᵀ Ĵ⁻¹ Î Ĵ⁻¹ x_i.
bool analytic_trace_gradient(const ModelContract& model, const Dataset& data,
                             const ParamVector& theta, Eigen::VectorXd& out, double& jitter) {
    Eigen::VectorXd d1, d2, d3;
    if (!model.index_derivatives(data, theta, d1, d2, d3)) return false;

    const double n = static_cast<double>(data.n());
    const Eigen::MatrixXd& x = data.x;
    const Eigen::Index p = x.cols();

    Eigen::MatrixXd i_hat = Eigen::MatrixXd::Zero(p, p);
    {
        Eigen::MatrixXd b = x;
        b.array().colwise() *= d1.array().abs();
        i_hat.selfadjointView<Eigen::Lower>().rankUpdate(b.transpose(), 1.0 / n);
        i_hat.triangularView<Eigen::StrictlyUpper>() =
            i_hat.transpose().triangularView<Eigen::StrictlyUpper>();
    }
    Eigen::MatrixXd weighted = x;
    weighted.array().colwise() *= (-d2.array());
    Eigen::MatrixXd j_hat = x.transpose() * weighted / n;
    j_hat = 0.5 * (j_hat + j_hat.transpose());

    const LadderFactor factor(j_hat);
    jitter = factor.jitter();
    const Eigen::MatrixXd p_mat = factor.solve(i_hat);                  // Ĵ⁻¹ Î
    const Eigen::MatrixXd k_mat = factor.solve(p_mat.transpose());     // Ĵ⁻¹ Î Ĵ⁻¹
    const Eigen::MatrixXd w_mat = factor.solve(Eigen::MatrixXd(x.transpose()));  // Ĵ⁻¹ xᵀ

    const Eigen::ArrayXd a = (x.array() * w_mat.transpose().array()).rowwise().sum();
    const Eigen::ArrayXd b = (x.array() * (x * k_mat).array()).rowwise().sum();
    const Eigen::ArrayXd v = 2.0 * d1.array() * d2.array() * a + d3.array() * b;
    out = x.transpose() * v.matrix() / n;
    return out.allFinite();
}

Eigen::VectorXd fd_trace_gradient(const ModelContract& model, const Dataset& data,
                                  const ParamVector& theta, double fd_step_scale,
                                  double& jitter_max) {
    const Eigen::Index p = theta.size();
    Eigen::VectorXd grad(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const double h = fd_step_scale * (1.0 + std::abs(theta[k]));
        ParamVector probe = theta;
        probe[k] = theta[k] + h;
        const TraceEval plus = eval_trace(model, data, probe);
        probe[k] = theta[k] - h;
        const TraceEval minus = eval_trace(model, data, probe);
        grad[k] = (plus.value - minus.value) / (2.0 * h);
        jitter_max = std::max({jitter_max, plus.jitter, minus.jitter});
    }
    return grad;
}

}  // namespace

double ice_objective(const ModelContract& model, const Dataset& data, const ParamVector& theta) {
    if (data.x.cols() != theta.size())
        throw ContractViolation("ice_objective: x has " + std::to_string(data.x.cols()) +
                                " columns but theta has " + std::to_string(theta.size()));
    const double nll = -sample_log_likelihood(model, data, theta);
    const TraceEval te = eval_trace(model, data, theta);
    return nll + te.value / (3.0 * static_cast<double>(data.n()));
}

Eigen::VectorXd trace_gradient(const ModelContract& model, const Dataset& data,
                               const ParamVector& theta, bool analytic, double fd_step_scale) {
    if (data.x.cols() != theta.size())
        throw ContractViolation("trace_gradient: x has " + std::to_string(data.x.cols()) +
                                " columns but theta has " + std::to_string(theta.size()));
    if (analytic) {
        Eigen::VectorXd out;
        double jitter = 0;
        Eigen::VectorXd d1, d2, d3;
        if (!model.index_derivatives(data, theta, d1, d2, d3))
            throw ContractViolation("trace_gradient: model has no index-derivative route");
        if (!analytic_trace_gradient(model, data, theta, out, jitter))
            throw NumericError("trace_gradient: analytic route produced a non-finite result");
        return out;
    }
    if (!(fd_step_scale > 0))
        throw ContractViolation("trace_gradient: fd_step_scale must be positive");
    double jitter_max = 0;
    return fd_trace_gradient(model, data, theta, fd_step_scale, jitter_max);
}

Eigen::VectorXd ice_gradient(const ModelContract& model, const Dataset& data,
                             const ParamVector& theta, double fd_step_scale, bool freeze_trace) {
    if (data.x.cols() != theta.size())
        throw ContractViolation("ice_gradient: x has " + std::to_string(data.x.cols()) +
                                " columns but theta has " + std::to_string(theta.size()));
    if (!(fd_step_scale > 0)) throw ContractViolation("ice_gradient: fd_step_scale must be positive");
    Eigen::VectorXd g = -score(model, data, theta);
    if (freeze_trace) return g;
    double jitter_max = 0;
    g += fd_trace_gradient(model, data, theta, fd_step_scale, jitter_max) /
         (3.0 * static_cast<double>(data.n()));
    return g;
}

FitResult fit_ice(const ModelContract& model, const Dataset& data, const FitConfig& config) {
    const auto start = Clock::now();
    data.validate();
    config.validate();
    const Eigen::Index p = data.p();
    const double scale = 3.0 * static_cast<double>(data.n());

    FitResult res;
    res.estimator = "ice";
    res.penalty_scale = "trace/(3n)";

    ParamVector theta;
    if (config.init) {
        if (config.init->size() != p)
            throw ContractViolation("fit_ice: init has " + std::to_string(config.init->size()) +
                                    " entries for " + std::to_string(p) + " parameters");
        theta = *config.init;
    } else {
        theta = fit_mle(model, data).theta;
    }

    double jitter_max = 0;
    ObjectiveEval cur = try_objective(model, data, theta);
    if (cur.singular) {
        // One shot at escaping a singular information pair at the start.
        auto engine = make_engine(derive_seed(config.perturb_seed, "ice-init-perturb"));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index k = 0; k < p; ++k) theta[k] += 1e-6 * normal(engine);
        cur = try_objective(model, data, theta);
        res.init_perturbed = true;
        if (cur.singular)
            throw SingularInformation(
                "fit_ice: information matrices singular at the initial point even after a "
                "perturbation",
                std::numeric_limits<double>::infinity());
    }
    if (!cur.ok) throw NumericError("fit_ice: objective not finite at the initial point");
    jitter_max = std::max(jitter_max, cur.jitter);

    double f = cur.value;
    Eigen::VectorXd g(p);
    long iter = 0;
    bool converged = false;
    bool aborted = false;
    double alpha_prev = 1.0;

    while (true) {
        // Gradient at the current iterate.
        bool have_grad = false;
        if (!config.force_fd_trace) {
            Eigen::VectorXd tg;
            double jit = 0;
            try {
                if (analytic_trace_gradient(model, data, theta, tg, jit)) {
                    g = -score(model, data, theta) + tg / scale;
                    jitter_max = std::max(jitter_max, jit);
                    have_grad = true;
                }
            } catch (const SingularInformation&) {
                aborted = true;
                break;
            }
        }
        if (!have_grad) {
            try {
                g = -score(model, data, theta) +
                    fd_trace_gradient(model, data, theta, config.fd_step_scale, jitter_max) / scale;
            } catch (const SingularInformation&) {
                aborted = true;
                break;
            } catch (const NumericError&) {
                aborted = true;
                break;
            }
        }
        if (!g.allFinite()) {
            aborted = true;
            break;
        }

        if (g.lpNorm<Eigen::Infinity>() <= config.grad_tol) {
            converged = true;
            break;
        }
        if (iter >= config.max_iters) break;

        const double dir_deriv = -g.squaredNorm();
        double alpha = std::min(1.0, 2.0 * alpha_prev);
        bool accepted = false;
        for (int bt = 0; bt < config.line_search.max_backtracks; ++bt) {
            const ParamVector trial = theta - alpha * g;
            const ObjectiveEval ev = try_objective(model, data, trial);
            if (ev.ok &&
                ev.value <= f + config.line_search.sufficient_decrease * alpha * dir_deriv) {
                theta = trial;
                f = ev.value;
                jitter_max = std::max(jitter_max, ev.jitter);
                accepted = true;
                break;
            }
            alpha *= config.line_search.shrink;
        }
        if (!accepted) break;  // no admissible step left at this scale
        alpha_prev = alpha;
        ++iter;
    }

    res.theta = theta;
    res.objective = f;
    res.grad_norm = aborted ? kInf : g.lpNorm<Eigen::Infinity>();
    res.iters = iter;
    res.converged = converged && !aborted;
    res.jitter_used = jitter_max;
    res.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    return res;
}

}  // namespace ice
