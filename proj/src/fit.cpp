#include "ice/fit.hpp"

#include <limits>

namespace ice {

void FitConfig::validate() const {
    if (max_iters < 1)
        throw ContractViolation("FitConfig: max_iters must be >= 1, got " +
                                std::to_string(max_iters));
    if (!(grad_tol > 0)) throw ContractViolation("FitConfig: grad_tol must be positive");
    if (!(fd_step_scale > 0)) throw ContractViolation("FitConfig: fd_step_scale must be positive");
    if (!(line_search.shrink > 0 && line_search.shrink < 1))
        throw ContractViolation("FitConfig: line_search.shrink must be in (0,1)");
    if (!(line_search.sufficient_decrease > 0 && line_search.sufficient_decrease < 0.5))
        throw ContractViolation("FitConfig: line_search.sufficient_decrease must be in (0,0.5)");
    if (line_search.max_backtracks < 1)
        throw ContractViolation("FitConfig: line_search.max_backtracks must be >= 1");
    if (init && !init->allFinite())
        throw ContractViolation("FitConfig: init must be finite");
}

nlohmann::ordered_json FitResult::to_json() const {
    nlohmann::ordered_json j;
    j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    j["objective"] = objective;
    j["grad_norm"] = grad_norm;
    j["iters"] = iters;
    j["converged"] = converged;
    j["estimator"] = estimator;
    j["jitter_used"] = jitter_used;
    j["wall_time"] = wall_time;
    if (lambda) j["lambda"] = *lambda;
    if (!penalty_scale.empty()) j["penalty_scale"] = penalty_scale;
    if (init_perturbed) j["init_perturbed"] = true;
    return j;
}

namespace {

// JSON has no literal for infinities; they round-trip through null.
double number_or_inf(const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

}  // namespace

FitResult fit_result_from_json(const nlohmann::json& j) {
    FitResult r;
    const auto& t = j.at("theta");
    r.theta.resize(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i)
        r.theta[static_cast<Eigen::Index>(i)] = t[i].get<double>();
    r.objective = number_or_inf(j.at("objective"));
    r.grad_norm = number_or_inf(j.at("grad_norm"));
    r.iters = j.at("iters").get<long>();
    r.converged = j.at("converged").get<bool>();
    r.estimator = j.at("estimator").get<std::string>();
    r.jitter_used = j.at("jitter_used").get<double>();
    r.wall_time = j.at("wall_time").get<double>();
    if (j.contains("lambda")) r.lambda = j.at("lambda").get<double>();
    if (j.contains("penalty_scale")) r.penalty_scale = j.at("penalty_scale").get<std::string>();
    if (j.contains("init_perturbed")) r.init_perturbed = j.at("init_perturbed").get<bool>();
    return r;
}

}  // namespace ice
