#pragma once

#include <functional>
#include <vector>

#include "ice/fit.hpp"

namespace ice {

// Maximum likelihood by damped Newton. converged=true requires
// ‖score‖∞ ≤ min(config.grad_tol, 1e-8). Throws SeparationError when a
// coordinate runs past 50 with the score still unconverged.
FitResult fit_mle(const ModelContract& model, const Dataset& data, const FitConfig& config = {});

// argmin -ℓ(θ) + λ ‖θ‖² by penalized Newton. shrink_intercept=false leaves
// coordinate 0 out of the penalty.
FitResult fit_l2(const ModelContract& model, const Dataset& data, double lambda,
                 bool shrink_intercept = false, const FitConfig& config = {});

// argmin -ℓ(θ) + λ ‖θ‖₁ by proximal gradient (iterative soft-thresholding
// with backtracking and momentum restarts).
FitResult fit_l1(const ModelContract& model, const Dataset& data, double lambda,
                 bool shrink_intercept = false, const FitConfig& config = {});

// sign(z)·max(|z|−threshold, 0), the scalar prox of threshold·|·|
double soft_threshold(double z, double threshold);

// 25 points, log-spaced over [1e-5, 1e+1].
std::vector<double> default_lambda_grid();

struct CvConfig {
    int folds = 10;
    std::vector<double> lambda_grid = default_lambda_grid();
    std::uint64_t fold_seed = 0;
    bool shrink_intercept = false;
    FitConfig fit;  // inner fit settings

    void validate() const;
};

struct CvCurvePoint {
    double lambda = 0;
    double mean_entropy = 0;  // out-of-fold Ĥ averaged over folds
    double std_entropy = 0;   // (folds-1)-denominator standard deviation
};

struct CvResult {
    double best_lambda = 0;            // lowest mean entropy, ties toward larger λ
    FitResult fit;                     // refit on all rows at best_lambda
    std::vector<CvCurvePoint> curve;   // sorted by lambda ascending
};

// Penalized fitter slot: (model, data, lambda, warm start or absent) → fit.
using PenalizedFit = std::function<FitResult(const ModelContract&, const Dataset&, double,
                                             const std::optional<ParamVector>&)>;

PenalizedFit penalized_l1(const CvConfig& config);
PenalizedFit penalized_l2(const CvConfig& config);

// K-fold cross validation on out-of-fold entropy. Folds come from a seeded
// shuffle; a single-class validation fold triggers one reshuffle before error.
CvResult cross_validate(const ModelContract& model, const Dataset& data,
                        const PenalizedFit& fit_fn, const CvConfig& config);

// The shuffled fold assignment, exposed for tests: entry i is the fold of row i.
std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t fold_seed);

}  // namespace ice
