#include "ice/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "ice/info_matrices.hpp"
#include "ice/rng.hpp"

namespace ice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Negative mean log likelihood; +inf instead of throwing so line searches can
// treat an overflowing trial point as a rejected step.
double nll_or_inf(const ModelContract& model, const Dataset& data, const ParamVector& theta) {
    if (!theta.allFinite()) return kInf;
    try {
        return -sample_log_likelihood(model, data, theta);
    } catch (const NumericError&) {
        return kInf;
    }
}

// Penalty mask: coordinate 0 is the intercept and stays unpenalized unless
// shrink_intercept is set.
Eigen::ArrayXd penalty_mask(Eigen::Index p, bool shrink_intercept) {
    Eigen::ArrayXd d = Eigen::ArrayXd::Ones(p);
    if (!shrink_intercept) d[0] = 0;
    return d;
}

void check_init(const FitConfig& config, Eigen::Index p, const char* where) {
    if (config.init && config.init->size() != p)
        throw ContractViolation(std::string(where) + ": init has " +
                                std::to_string(config.init->size()) + " entries for " +
                                std::to_string(p) + " parameters");
}

// Shared damped-Newton loop for the smooth objectives (-ℓ plus an optional
// quadratic ridge). grad/hess of the ridge are supplied by the caller.
FitResult newton_fit(const ModelContract& model, const Dataset& data, const FitConfig& config,
                     double lambda, const Eigen::ArrayXd& ridge_mask, bool separation_guard,
                     const char* label) {
    const auto start = Clock::now();
    data.validate();
    config.validate();
    check_init(config, data.p(), label);
    const Eigen::Index p = data.p();
    const double tol = std::min(config.grad_tol, 1e-8);

    ParamVector theta = config.init ? *config.init : ParamVector::Zero(p);
    auto objective = [&](const ParamVector& th) {
        double v = nll_or_inf(model, data, th);
        if (lambda > 0) v += lambda * (ridge_mask * th.array().square()).sum();
        return v;
    };
    auto gradient = [&](const ParamVector& th) {
        Eigen::VectorXd g = -score(model, data, th);
        if (lambda > 0) g.array() += 2.0 * lambda * ridge_mask * th.array();
        return g;
    };

    double f = objective(theta);
    if (!std::isfinite(f)) throw NumericError(std::string(label) + ": objective not finite at init");
    Eigen::VectorXd g = gradient(theta);
    long iter = 0;
    bool converged = false;
    bool stalled = false;

    while (true) {
        if (g.lpNorm<Eigen::Infinity>() <= tol) {
            converged = true;
            break;
        }
        if (separation_guard && theta.lpNorm<Eigen::Infinity>() > 50.0) {
            Eigen::Index worst;
            theta.cwiseAbs().maxCoeff(&worst);
            throw SeparationError(std::string(label) + ": coordinate " + std::to_string(worst) +
                                      " ran past 50 with the score still unconverged; the classes "
                                      "are likely separable",
                                  static_cast<int>(worst));
        }
        if (iter >= config.max_iters || stalled) break;

        Eigen::MatrixXd hess = empirical_j(model, data, theta);
        if (lambda > 0) hess.diagonal().array() += 2.0 * lambda * ridge_mask;
        Eigen::VectorXd d;
        try {
            d = -LadderFactor(hess).solve(g);
        } catch (const SingularInformation&) {
            d = -g;  // fall back to plain gradient descent for this step
        }
        double dir_deriv = g.dot(d);
        if (!(dir_deriv < 0)) {
            d = -g;
            dir_deriv = g.dot(d);
            if (!(dir_deriv < 0)) break;  // gradient numerically zero
        }

        double alpha = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < config.line_search.max_backtracks; ++bt) {
            const ParamVector trial = theta + alpha * d;
            const double ft = objective(trial);
            if (ft <= f + config.line_search.sufficient_decrease * alpha * dir_deriv) {
                theta = trial;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= config.line_search.shrink;
        }
        if (!accepted) {
            stalled = true;
            continue;  // recheck convergence at the current iterate, then stop
        }
        g = gradient(theta);
        ++iter;
    }

    FitResult res;
    res.theta = theta;
    res.objective = f;
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    res.iters = iter;
    res.converged = converged;
    res.estimator = label;
    res.wall_time = seconds_since(start);
    return res;
}

}  // namespace

FitResult fit_mle(const ModelContract& model, const Dataset& data, const FitConfig& config) {
    return newton_fit(model, data, config, 0.0, Eigen::ArrayXd::Zero(data.x.cols()),
                      /*separation_guard=*/true, "mle");
}

FitResult fit_l2(const ModelContract& model, const Dataset& data, double lambda,
                 bool shrink_intercept, const FitConfig& config) {
    if (!(lambda >= 0))
        throw ContractViolation("fit_l2: lambda must be >= 0, got " + std::to_string(lambda));
    FitResult res = newton_fit(model, data, config, lambda, penalty_mask(data.x.cols(), shrink_intercept),
                               /*separation_guard=*/lambda == 0, "l2");
    res.lambda = lambda;
    return res;
}

double soft_threshold(double z, double threshold) {
    return std::copysign(std::max(0.0, std::abs(z) - threshold), z);
}

FitResult fit_l1(const ModelContract& model, const Dataset& data, double lambda,
                 bool shrink_intercept, const FitConfig& config) {
    const auto start = Clock::now();
    if (!(lambda >= 0))
        throw ContractViolation("fit_l1: lambda must be >= 0, got " + std::to_string(lambda));
    data.validate();
    config.validate();
    check_init(config, data.p(), "fit_l1");
    const Eigen::Index p = data.p();
    const double n = static_cast<double>(data.n());
    const Eigen::ArrayXd mask = penalty_mask(p, shrink_intercept);

    auto smooth = [&](const ParamVector& th) { return nll_or_inf(model, data, th); };
    auto smooth_grad = [&](const ParamVector& th) -> Eigen::VectorXd {
        return -score(model, data, th);
    };
    auto prox = [&](const ParamVector& v, double thresh) {
        ParamVector out = v;
        for (Eigen::Index k = 0; k < p; ++k)
            if (mask[k] > 0) out[k] = soft_threshold(v[k], thresh);
        return out;
    };
    // Subgradient residual of -ℓ + λ‖·‖₁ at th; zero iff th is optimal.
    auto residual = [&](const ParamVector& th, const Eigen::VectorXd& g) {
        Eigen::VectorXd r = g;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (mask[k] == 0) continue;
            if (th[k] != 0)
                r[k] = g[k] + lambda * (th[k] > 0 ? 1.0 : -1.0);
            else
                r[k] = std::max(0.0, std::abs(g[k]) - lambda);
        }
        return r;
    };

    // Exact Lipschitz bound for the logistic smooth part: λ_max(XᵀX)/(4n).
    Eigen::MatrixXd gram = data.x.transpose() * data.x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    double lips = 0.25 * es.eigenvalues().maxCoeff() / n;
    if (!(lips > 0) || !std::isfinite(lips)) lips = 1.0;

    ParamVector x = config.init ? *config.init : ParamVector::Zero(p);
    ParamVector z = x;
    double tau = 1.0;
    double fx = smooth(x);
    if (!std::isfinite(fx)) throw NumericError("fit_l1: objective not finite at init");

    // The λ=0 limit must reproduce the MLE to parameter precision, so the
    // residual target follows the same floor as fit_mle.
    const double tol = std::min(config.grad_tol, 1e-8);
    Eigen::VectorXd gx = smooth_grad(x);
    double res_norm = residual(x, gx).lpNorm<Eigen::Infinity>();
    long iter = 0;
    bool converged = res_norm <= tol;

    while (!converged && iter < config.max_iters) {
        const Eigen::VectorXd gz = smooth_grad(z);
        const double fz = smooth(z);
        ParamVector xn;
        bool step_ok = false;
        for (int bt = 0; bt < config.line_search.max_backtracks; ++bt) {
            xn = prox(z - gz / lips, lambda / lips);
            const double fxn = smooth(xn);
            const Eigen::VectorXd diff = xn - z;
            if (fxn <= fz + gz.dot(diff) + 0.5 * lips * diff.squaredNorm() + 1e-14) {
                step_ok = true;
                break;
            }
            lips *= 2.0;
        }
        if (!step_ok) break;

        const double tau_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tau * tau));
        ParamVector zn = xn + ((tau - 1.0) / tau_next) * (xn - x);
        // momentum restart when the update turns against the descent direction
        if ((z - xn).dot(xn - x) > 0) {
            zn = xn;
            tau = 1.0;
        } else {
            tau = tau_next;
        }
        x = xn;
        z = zn;
        ++iter;

        gx = smooth_grad(x);
        res_norm = residual(x, gx).lpNorm<Eigen::Infinity>();
        converged = res_norm <= tol;
    }

    FitResult res;
    res.theta = x;
    res.objective = smooth(x) + lambda * (mask * x.array().abs()).sum();
    res.grad_norm = res_norm;
    res.iters = iter;
    res.converged = converged;
    res.estimator = "l1";
    res.lambda = lambda;
    res.wall_time = seconds_since(start);
    return res;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid(25);
    for (int i = 0; i < 25; ++i) grid[i] = std::pow(10.0, -5.0 + 6.0 * i / 24.0);
    return grid;
}

void CvConfig::validate() const {
    if (folds < 2) throw ContractViolation("CvConfig: folds must be >= 2");
    if (lambda_grid.empty()) throw ContractViolation("CvConfig: lambda_grid must be non-empty");
    for (double l : lambda_grid)
        if (!(l >= 0) || !std::isfinite(l))
            throw ContractViolation("CvConfig: lambda_grid entries must be finite and >= 0");
    fit.validate();
}

PenalizedFit penalized_l1(const CvConfig& config) {
    return [config](const ModelContract& m, const Dataset& d, double lam,
                    const std::optional<ParamVector>& warm) {
        FitConfig fc = config.fit;
        if (warm) fc.init = *warm;
        return fit_l1(m, d, lam, config.shrink_intercept, fc);
    };
}

PenalizedFit penalized_l2(const CvConfig& config) {
    return [config](const ModelContract& m, const Dataset& d, double lam,
                    const std::optional<ParamVector>& warm) {
        FitConfig fc = config.fit;
        if (warm) fc.init = *warm;
        return fit_l2(m, d, lam, config.shrink_intercept, fc);
    };
}

std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t fold_seed) {
    if (folds < 2 || static_cast<Eigen::Index>(folds) > n)
        throw ContractViolation("fold_assignment: need 2 <= folds <= n");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    auto engine = make_engine(fold_seed);
    std::shuffle(idx.begin(), idx.end(), engine);
    std::vector<int> assignment(static_cast<std::size_t>(n));
    for (int f = 0; f < folds; ++f) {
        const Eigen::Index lo = n * f / folds, hi = n * (f + 1) / folds;
        for (Eigen::Index i = lo; i < hi; ++i)
            assignment[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = f;
    }
    return assignment;
}

namespace {

Dataset subset(const Dataset& data, const std::vector<Eigen::Index>& rows) {
    Dataset out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), data.x.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.x.row(static_cast<Eigen::Index>(i)) = data.x.row(rows[i]);
        out.y[static_cast<Eigen::Index>(i)] = data.y[rows[i]];
    }
    return out;
}

bool has_single_class_fold(const Dataset& data, const std::vector<int>& assignment, int folds) {
    std::vector<double> lo(static_cast<std::size_t>(folds), 1.0);
    std::vector<double> hi(static_cast<std::size_t>(folds), 0.0);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        auto f = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
        lo[f] = std::min(lo[f], data.y[i]);
        hi[f] = std::max(hi[f], data.y[i]);
    }
    for (int f = 0; f < folds; ++f)
        if (lo[static_cast<std::size_t>(f)] == hi[static_cast<std::size_t>(f)]) return true;
    return false;
}

}  // namespace

CvResult cross_validate(const ModelContract& model, const Dataset& data, const PenalizedFit& fit_fn,
                        const CvConfig& config) {
    data.validate();
    config.validate();
    if (static_cast<Eigen::Index>(config.folds) > data.n())
        throw ContractViolation("cross_validate: more folds than rows");

    std::vector<int> assignment =
        fold_assignment(data.n(), config.folds, derive_seed(config.fold_seed, "folds"));
    if (has_single_class_fold(data, assignment, config.folds)) {
        assignment =
            fold_assignment(data.n(), config.folds, derive_seed(config.fold_seed, "refold"));
        if (has_single_class_fold(data, assignment, config.folds))
            throw NumericError(
                "cross_validate: a validation fold still holds a single class after one "
                "reshuffle; too few observations of one label");
    }

    std::vector<double> grid = config.lambda_grid;
    std::sort(grid.begin(), grid.end());
    const std::size_t nlam = grid.size();

    // entropy[g][f]: out-of-fold Ĥ for grid point g on fold f
    std::vector<std::vector<double>> entropy(nlam,
                                             std::vector<double>(static_cast<std::size_t>(config.folds)));
    for (int f = 0; f < config.folds; ++f) {
        std::vector<Eigen::Index> train_rows, val_rows;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            if (assignment[static_cast<std::size_t>(i)] == f)
                val_rows.push_back(i);
            else
                train_rows.push_back(i);
        }
        const Dataset train = subset(data, train_rows);
        const Dataset val = subset(data, val_rows);
        // Walk the grid from large λ to small, warm-starting each fit from
        // the previous solution.
        std::optional<ParamVector> warm;
        for (std::size_t g = nlam; g-- > 0;) {
            FitResult fr = fit_fn(model, train, grid[g], warm);
            warm = fr.theta;
            entropy[g][static_cast<std::size_t>(f)] = entropy_estimate(model, val, fr.theta);
        }
    }

    CvResult result;
    result.curve.resize(nlam);
    for (std::size_t g = 0; g < nlam; ++g) {
        const auto& e = entropy[g];
        const double k = static_cast<double>(config.folds);
        const double mean = std::accumulate(e.begin(), e.end(), 0.0) / k;
        double ss = 0;
        for (double v : e) ss += (v - mean) * (v - mean);
        result.curve[g] = {grid[g], mean, std::sqrt(ss / (k - 1.0))};
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < nlam; ++g)
        if (result.curve[g].mean_entropy <= result.curve[best].mean_entropy) best = g;
    result.best_lambda = result.curve[best].lambda;
    result.fit = fit_fn(model, data, result.best_lambda, std::nullopt);
    return result;
}

}  // namespace ice
