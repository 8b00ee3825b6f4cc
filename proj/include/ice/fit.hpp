#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>

#include "ice/model.hpp"

namespace ice {

struct LineSearchConfig {
    double shrink = 0.5;              // step multiplier per backtrack
    double sufficient_decrease = 1e-4;  // Armijo constant
    int max_backtracks = 60;
};

struct FitConfig {
    int max_iters = 2000;
    double grad_tol = 1e-6;        // ∞-norm stopping threshold
    double fd_step_scale = 1e-5;   // h_k = fd_step_scale (1 + |θ_k|)
    LineSearchConfig line_search;
    std::optional<ParamVector> init;  // absent: ice starts at the MLE, others at zero
    bool force_fd_trace = false;      // bypass the analytic trace-gradient path
    std::uint64_t perturb_seed = 0;   // stream for the singular-at-init fallback draw

    void validate() const;  // throws ContractViolation
};

struct FitResult {
    ParamVector theta;
    double objective = 0;   // final value of the estimator's own objective
    double grad_norm = 0;   // ∞-norm of its (sub)gradient at theta
    long iters = 0;
    bool converged = false;
    std::string estimator;  // mle | l1 | l2 | ice
    double jitter_used = 0;  // largest ridge any trace solve needed
    double wall_time = 0;    // seconds
    std::optional<double> lambda;  // penalty weight for l1/l2
    std::string penalty_scale;     // ice: "trace/(3n)"
    bool init_perturbed = false;   // ice singular-at-init fallback fired

    nlohmann::ordered_json to_json() const;
};

FitResult fit_result_from_json(const nlohmann::json& j);

}  // namespace ice
