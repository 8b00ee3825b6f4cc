#pragma once

#include "ice/fit.hpp"
#include "ice/info_matrices.hpp"

namespace ice {

// Trace-penalized likelihood objective
//   -ℓ(θ) + tr(Î(θ) Ĵ(θ)⁻¹) / (3n)
// with both matrices rebuilt at the evaluation point.
double ice_objective(const ModelContract& model, const Dataset& data, const ParamVector& theta);

// Analytic -score plus a central finite difference of the trace penalty,
// step h_k = fd_step_scale (1 + |θ_k|). freeze_trace drops the penalty term,
// leaving exactly -score.
Eigen::VectorXd ice_gradient(const ModelContract& model, const Dataset& data,
                             const ParamVector& theta, double fd_step_scale = 1e-5,
                             bool freeze_trace = false);

// Gradient of the raw trace tr(Î Ĵ⁻¹) alone, without the /(3n) scaling.
// analytic=true takes the model's index-derivative route and requires the
// model to provide one; analytic=false takes the central-difference route.
// Exposed so the two routes can be compared head to head.
Eigen::VectorXd trace_gradient(const ModelContract& model, const Dataset& data,
                               const ParamVector& theta, bool analytic,
                               double fd_step_scale = 1e-5);

// Steepest descent with backtracking on ice_objective, started at the MLE
// unless config.init says otherwise. Monotone in the objective; returns the
// best iterate seen. Models exposing index_derivatives get an analytic trace
// gradient unless config.force_fd_trace is set; the two paths are
// interchangeable within finite-difference accuracy.
FitResult fit_ice(const ModelContract& model, const Dataset& data, const FitConfig& config = {});

}  // namespace ice
