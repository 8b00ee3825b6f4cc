#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ice/synthetic.hpp"

namespace ice {

// One study run: which study, the (p, m, n_train) grid, how many
// replications per cell, which estimators, and the seed everything else is
// derived from. Defaults are the desk-scale shape; full-scale runs override
// replications.
struct ExperimentConfig {
    std::string study = "compare";  // compare | converge | variance-ratio
    std::vector<ProblemSpec> grid;
    long replications = 100;
    std::vector<std::string> estimators = {"mle", "l1", "l2", "ice"};
    std::uint64_t base_seed = 0;
    std::filesystem::path out_dir = ".";
    int parallelism = 1;
    bool record_timing = false;  // wall_ms stays 0 unless set, keeping reruns byte-identical
    std::vector<long> n_list = {500, 1000, 2000, 5000, 10000, 20000, 50000, 100000};

    void validate() const;
    // Deterministic key=value rendering; the hash of this string is stamped
    // into every output file's header.
    std::string canonical() const;
    std::uint64_t config_hash() const;
};

// Flat key = value text; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(const std::filesystem::path& file);
ExperimentConfig parse_config_text(const std::string& text);

// δ(θ, θ') = Ĥ(θ) − Ĥ(θ') on the shared test set. Negative means θ carries
// less out-of-sample entropy than θ'.
double entropy_error(const ModelContract& model, const Dataset& test, const ParamVector& theta,
                     const ParamVector& theta_ref);

// Order-sensitive digest of a dataset's bytes; guards the every-estimator-
// sees-the-same-test-set invariant.
std::uint64_t dataset_hash(const Dataset& data);

struct EstimatorOutcome {
    std::string estimator;
    std::optional<double> lambda;  // CV winners only
    double h_test = 0;
    double delta_vs_mle = 0;
    double delta_vs_theta0 = 0;
    std::string converged;  // "1", "0", or "error:<kind>"
    double jitter_used = 0;
    double wall_ms = 0;
};

struct ReplicationReport {
    std::string spec_id;
    long rep = 0;
    std::uint64_t seed = 0;
    long discarded_attempts = 0;
    std::vector<EstimatorOutcome> outcomes;
};

struct CellSummary {
    std::string spec_id;
    std::string estimator;
    double mean_delta = 0;
    double std_delta = 0;
    std::optional<double> t_stat;  // absent when fewer than 2 effective reps or zero spread
    long r_effective = 0;
    bool unreliable = false;  // more than 10% of replications failed
};

struct CompareResult {
    std::vector<ReplicationReport> reports;
    std::vector<CellSummary> summaries;
};

// Head-to-head study: per cell and replication, fresh problem, all
// estimators on the shared train/test pair, δ against the replication's MLE.
// Writes reports.csv and summary.csv under config.out_dir.
CompareResult run_compare(const ExperimentConfig& config);

struct ConvergeRow {
    long n = 0;
    double h_theta0 = 0;
    double delta_mle = 0;
    double delta_l2 = 0;
    double delta_ice = 0;
};

// Convergence study: ten fixed problems, fresh training sets of growing
// size, mean δ(θ_E, θ0) per n. Writes converge.csv.
std::vector<ConvergeRow> run_converge(const ExperimentConfig& config);

// Asymptotic-variance diagnostic: one fixed problem, R fresh training sets,
// the trace ratio of the √n-scaled error covariances of the regularized fit
// and the MLE, with a paired-bootstrap percentile interval.
// Writes variance_ratio.json.
nlohmann::ordered_json run_variance_ratio(const ExperimentConfig& config);

// (R−1)-denominator sample covariance of a set of equally sized vectors.
Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& vs);

// Exact fixed-id label for a cell, e.g. "p5_m2_n500".
std::string spec_id(const ProblemSpec& spec);

}  // namespace ice
