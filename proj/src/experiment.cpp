#include "ice/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "ice/baselines.hpp"
#include "ice/csv.hpp"
#include "ice/ice_estimator.hpp"
#include "ice/rng.hpp"

namespace ice {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= b[i];
        h *= kFnvPrime;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_any(const std::string& s, std::string_view seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (seps.find(c) != std::string_view::npos) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const SeparationError*>(&e)) return "separation";
    if (dynamic_cast<const SingularInformation*>(&e)) return "singular";
    if (dynamic_cast<const GenerationError*>(&e)) return "generation";
    if (dynamic_cast<const ContractViolation*>(&e)) return "contract";
    if (dynamic_cast<const NumericError*>(&e)) return "numeric";
    return "unknown";
}

// Runs task(0..count-1) across a small worker pool; tasks own their state
// and write only to their own output slot, so scheduling never shows up in
// the results.
void parallel_for(long count, int parallelism, const std::function<void(long)>& task) {
    if (parallelism <= 1 || count <= 1) {
        for (long i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<long> next{0};
    auto worker = [&] {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= count) return;
            task(i);
        }
    };
    const long nthreads = std::min<long>(parallelism, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (long t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::string spec_id(const ProblemSpec& spec) {
    return "p" + std::to_string(spec.p) + "_m" + std::to_string(spec.m) + "_n" +
           std::to_string(spec.n_train);
}

void ExperimentConfig::validate() const {
    if (study != "compare" && study != "converge" && study != "variance-ratio")
        throw ContractViolation("ExperimentConfig: unknown study '" + study + "'");
    if (grid.empty()) throw ContractViolation("ExperimentConfig: grid must be nonempty");
    for (const auto& spec : grid) spec.validate();
    if (replications < 2)
        throw ContractViolation("ExperimentConfig: replications must be >= 2 for t-statistics");
    if (estimators.empty()) throw ContractViolation("ExperimentConfig: estimators must be nonempty");
    for (const auto& e : estimators)
        if (e != "mle" && e != "l1" && e != "l2" && e != "ice")
            throw ContractViolation("ExperimentConfig: unknown estimator '" + e + "'");
    if (parallelism < 1) throw ContractViolation("ExperimentConfig: parallelism must be >= 1");
    if (n_list.empty()) throw ContractViolation("ExperimentConfig: n_list must be nonempty");
    for (long n : n_list)
        if (n < 1) throw ContractViolation("ExperimentConfig: n_list entries must be >= 1");
}

std::string ExperimentConfig::canonical() const {
    // parallelism and out_dir never change the produced numbers, so they stay
    // out of the hash.
    std::ostringstream os;
    os << "study=" << study << "\n";
    for (const auto& s : grid)
        os << "cell=" << s.p << ":" << s.m << ":" << s.n_train << ":" << s.n_test << ":"
           << csv::format(s.eig_lo) << ":" << csv::format(s.eig_hi) << ":"
           << csv::format(s.balance_lo) << ":" << csv::format(s.balance_hi) << ":"
           << csv::format(s.entropy_floor) << "\n";
    os << "replications=" << replications << "\n";
    os << "estimators=";
    for (std::size_t i = 0; i < estimators.size(); ++i)
        os << (i ? "," : "") << estimators[i];
    os << "\n";
    os << "base_seed=" << base_seed << "\n";
    os << "record_timing=" << (record_timing ? 1 : 0) << "\n";
    os << "n_list=";
    for (std::size_t i = 0; i < n_list.size(); ++i) os << (i ? "," : "") << n_list[i];
    os << "\n";
    return os.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
    const std::string c = canonical();
    return fnv1a(kFnvOffset, c.data(), c.size());
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    // Cell triples are expanded after scalar keys so the shared ProblemSpec
    // knobs apply to every cell regardless of key order.
    std::vector<std::array<long, 3>> triples;
    ProblemSpec shared;  // carries n_test and the generation knobs

    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ContractViolation("config line " + std::to_string(line_no) +
                                    ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (value.empty())
            throw ContractViolation("config line " + std::to_string(line_no) + ": empty value for '" +
                                    key + "'");

        if (key == "study") {
            cfg.study = value;
        } else if (key == "cells") {
            for (const std::string& item : split_any(value, " ,;")) {
                const auto parts = split_any(item, ":");
                if (parts.size() != 3)
                    throw ContractViolation("config: cell '" + item + "' is not p:m:n");
                triples.push_back({csv::parse_int(parts[0]), csv::parse_int(parts[1]),
                                   csv::parse_int(parts[2])});
            }
        } else if (key == "replications") {
            cfg.replications = csv::parse_int(value);
        } else if (key == "estimators") {
            cfg.estimators = split_any(value, " ,");
        } else if (key == "base_seed") {
            cfg.base_seed = csv::parse_uint(value);
        } else if (key == "parallelism") {
            cfg.parallelism = static_cast<int>(csv::parse_int(value));
        } else if (key == "record_timing") {
            if (value == "1" || value == "true")
                cfg.record_timing = true;
            else if (value == "0" || value == "false")
                cfg.record_timing = false;
            else
                throw ContractViolation("config: record_timing must be 0/1/true/false");
        } else if (key == "out_dir") {
            cfg.out_dir = value;
        } else if (key == "n_list") {
            cfg.n_list.clear();
            for (const std::string& item : split_any(value, " ,")) cfg.n_list.push_back(csv::parse_int(item));
        } else if (key == "n_test") {
            shared.n_test = csv::parse_int(value);
        } else if (key == "eig_lo") {
            shared.eig_lo = csv::parse_double(value);
        } else if (key == "eig_hi") {
            shared.eig_hi = csv::parse_double(value);
        } else if (key == "balance_lo") {
            shared.balance_lo = csv::parse_double(value);
        } else if (key == "balance_hi") {
            shared.balance_hi = csv::parse_double(value);
        } else if (key == "entropy_floor") {
            shared.entropy_floor = csv::parse_double(value);
        } else {
            throw ContractViolation("config: unknown key '" + key + "'");
        }
    }

    for (const auto& t : triples) {
        ProblemSpec s = shared;
        s.p = t[0];
        s.m = t[1];
        s.n_train = t[2];
        cfg.grid.push_back(s);
    }
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ContractViolation("config: cannot open " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

double entropy_error(const ModelContract& model, const Dataset& test, const ParamVector& theta,
                     const ParamVector& theta_ref) {
    return entropy_estimate(model, test, theta) - entropy_estimate(model, test, theta_ref);
}

std::uint64_t dataset_hash(const Dataset& data) {
    std::uint64_t h = kFnvOffset;
    const auto n = static_cast<std::size_t>(data.x.size());
    h = fnv1a(h, data.x.data(), n * sizeof(double));
    h = fnv1a(h, data.y.data(), static_cast<std::size_t>(data.y.size()) * sizeof(double));
    return h;
}

namespace {

struct RepInputs {
    const ExperimentConfig& config;
    const LogisticModel& model;
    const Problem& prob;
    std::uint64_t rep_seed;
    std::uint64_t test_hash;
    double h_mle;
    double h_theta0;
    const FitResult& mle_fit;
};

EstimatorOutcome evaluate_estimator(const RepInputs& in, const std::string& name) {
    EstimatorOutcome out;
    out.estimator = name;
    const auto start = Clock::now();
    try {
        FitResult fit;
        if (name == "mle") {
            // Reuses the replication's reference fit: δ(θ̂, θ̂) must be 0
            // exactly and the fit is already paid for.
            fit = in.mle_fit;
        } else if (name == "l2" || name == "l1") {
            CvConfig cv;
            cv.fold_seed = in.rep_seed;
            // The studies reproduce the published comparison, whose penalty
            // covers every coordinate, intercept included. Library callers
            // keep the unconfounded default.
            cv.shrink_intercept = true;
            const CvResult res =
                cross_validate(in.model, in.prob.train,
                               name == "l2" ? penalized_l2(cv) : penalized_l1(cv), cv);
            fit = res.fit;
            out.lambda = res.best_lambda;
        } else if (name == "ice") {
            FitConfig fc;
            fc.perturb_seed = in.rep_seed;
            fit = fit_ice(in.model, in.prob.train, fc);
        } else {
            throw ContractViolation("unknown estimator '" + name + "'");
        }
        out.h_test = entropy_estimate(in.model, in.prob.test, fit.theta);
        out.delta_vs_mle = out.h_test - in.h_mle;
        out.delta_vs_theta0 = out.h_test - in.h_theta0;
        out.converged = fit.converged ? "1" : "0";
        out.jitter_used = fit.jitter_used;
        if (dataset_hash(in.prob.test) != in.test_hash)
            throw NumericError("test set mutated during estimator evaluation");
    } catch (const std::exception& e) {
        out.converged = "error:" + error_kind(e);
        out.h_test = out.delta_vs_mle = out.delta_vs_theta0 =
            std::numeric_limits<double>::quiet_NaN();
    }
    if (in.config.record_timing) out.wall_ms = elapsed_ms(start);
    return out;
}

ReplicationReport run_replication(const ExperimentConfig& config, const LogisticModel& model,
                                  const ProblemSpec& cell_spec, std::size_t cell_index, long rep) {
    const std::uint64_t cell_seed = derive_seed(config.base_seed, "cell", cell_index);
    const std::uint64_t rep_seed = derive_seed(cell_seed, "rep", static_cast<std::uint64_t>(rep));

    ProblemSpec spec = cell_spec;
    spec.seed = rep_seed;

    ReplicationReport report;
    report.spec_id = spec_id(cell_spec);
    report.rep = rep;
    report.seed = rep_seed;

    auto fail_all = [&](const std::string& tag) {
        for (const auto& name : config.estimators) {
            EstimatorOutcome out;
            out.estimator = name;
            out.converged = tag;
            out.h_test = out.delta_vs_mle = out.delta_vs_theta0 =
                std::numeric_limits<double>::quiet_NaN();
            report.outcomes.push_back(std::move(out));
        }
    };

    Problem prob;
    try {
        prob = make_problem(spec);
    } catch (const std::exception& e) {
        fail_all("error:" + error_kind(e));
        return report;
    }
    report.discarded_attempts = prob.discarded_attempts;

    FitResult mle;
    try {
        mle = fit_mle(model, prob.train, {});
    } catch (const std::exception& e) {
        // Without θ̂ no δ in this replication is defined; the reference
        // failure poisons every estimator row.
        const std::string kind = error_kind(e);
        for (const auto& name : config.estimators) {
            EstimatorOutcome out;
            out.estimator = name;
            out.converged = name == "mle" ? "error:" + kind : "error:mle-" + kind;
            out.h_test = out.delta_vs_mle = out.delta_vs_theta0 =
                std::numeric_limits<double>::quiet_NaN();
            report.outcomes.push_back(std::move(out));
        }
        return report;
    }

    RepInputs in{config,
                 model,
                 prob,
                 rep_seed,
                 dataset_hash(prob.test),
                 entropy_estimate(model, prob.test, mle.theta),
                 entropy_estimate(model, prob.test, prob.theta0),
                 mle};
    for (const auto& name : config.estimators)
        report.outcomes.push_back(evaluate_estimator(in, name));
    return report;
}

std::vector<CellSummary> summarize_cells(const ExperimentConfig& config,
                                         const std::vector<ReplicationReport>& reports) {
    std::vector<CellSummary> summaries;
    for (std::size_t c = 0; c < config.grid.size(); ++c) {
        const std::string id = spec_id(config.grid[c]);
        for (const auto& name : config.estimators) {
            CellSummary s;
            s.spec_id = id;
            s.estimator = name;
            std::vector<double> deltas;
            long errors = 0;
            for (const auto& rep : reports) {
                if (rep.spec_id != id) continue;
                for (const auto& out : rep.outcomes) {
                    if (out.estimator != name) continue;
                    if (out.converged.rfind("error:", 0) == 0)
                        ++errors;
                    else
                        deltas.push_back(out.delta_vs_mle);
                }
            }
            s.r_effective = static_cast<long>(deltas.size());
            if (!deltas.empty()) {
                double mean = 0;
                for (double d : deltas) mean += d;
                mean /= static_cast<double>(deltas.size());
                s.mean_delta = mean;
                if (deltas.size() >= 2) {
                    double ss = 0;
                    for (double d : deltas) ss += (d - mean) * (d - mean);
                    s.std_delta = std::sqrt(ss / (static_cast<double>(deltas.size()) - 1.0));
                    if (s.std_delta > 0)
                        s.t_stat =
                            mean / (s.std_delta / std::sqrt(static_cast<double>(deltas.size())));
                }
            }
            s.unreliable =
                errors * 10 > config.replications;  // strictly more than 10% failed
            summaries.push_back(std::move(s));
        }
    }
    return summaries;
}

std::vector<std::string> header_comments(const ExperimentConfig& config) {
    return {"config_hash=" + hex64(config.config_hash()),
            "base_seed=" + std::to_string(config.base_seed)};
}

void write_reports_csv(const ExperimentConfig& config,
                       const std::vector<ReplicationReport>& reports) {
    csv::Table t;
    t.comments = header_comments(config);
    t.header = {"spec_id",       "rep",       "seed",           "estimator",
                "lambda",        "H_test",    "delta_vs_mle",   "delta_vs_theta0",
                "converged",     "jitter_used", "wall_ms"};
    for (const auto& rep : reports) {
        for (const auto& out : rep.outcomes) {
            t.rows.push_back({rep.spec_id, csv::format_int(rep.rep), csv::format_uint(rep.seed),
                              out.estimator, out.lambda ? csv::format(*out.lambda) : "",
                              csv::format(out.h_test), csv::format(out.delta_vs_mle),
                              csv::format(out.delta_vs_theta0), out.converged,
                              csv::format(out.jitter_used), csv::format(out.wall_ms)});
        }
    }
    csv::write(config.out_dir / "reports.csv", t);
}

void write_summary_csv(const ExperimentConfig& config, const std::vector<CellSummary>& summaries) {
    csv::Table t;
    t.comments = header_comments(config);
    t.comments.push_back(
        "t_stat = mean_delta / (std_delta / sqrt(r_effective)), paired by replication, "
        "std with (r_effective-1)");
    t.header = {"spec_id", "estimator", "mean_delta", "std_delta",
                "t_stat",  "r_effective", "unreliable_flag"};
    for (const auto& s : summaries) {
        t.rows.push_back({s.spec_id, s.estimator, csv::format(s.mean_delta),
                          csv::format(s.std_delta), s.t_stat ? csv::format(*s.t_stat) : "",
                          csv::format_int(s.r_effective), s.unreliable ? "1" : "0"});
    }
    csv::write(config.out_dir / "summary.csv", t);
}

}  // namespace

CompareResult run_compare(const ExperimentConfig& config) {
    config.validate();
    if (config.study != "compare")
        throw ContractViolation("run_compare: config.study is '" + config.study + "'");
    const LogisticModel model;

    const long cells = static_cast<long>(config.grid.size());
    const long total = cells * config.replications;
    std::vector<ReplicationReport> reports(static_cast<std::size_t>(total));
    parallel_for(total, config.parallelism, [&](long task) {
        const auto cell = static_cast<std::size_t>(task / config.replications);
        const long rep = task % config.replications;
        reports[static_cast<std::size_t>(task)] =
            run_replication(config, model, config.grid[cell], cell, rep);
    });

    CompareResult result;
    result.reports = std::move(reports);
    result.summaries = summarize_cells(config, result.reports);

    std::filesystem::create_directories(config.out_dir);
    write_reports_csv(config, result.reports);
    write_summary_csv(config, result.summaries);
    return result;
}

std::vector<ConvergeRow> run_converge(const ExperimentConfig& config) {
    config.validate();
    if (config.study != "converge")
        throw ContractViolation("run_converge: config.study is '" + config.study + "'");
    const LogisticModel model;
    const ProblemSpec& base = config.grid.front();
    const long problems = 10;

    // Fixed problems up front; their own train sets are never used.
    std::vector<Problem> fixed(static_cast<std::size_t>(problems));
    std::vector<std::uint64_t> prob_seeds(static_cast<std::size_t>(problems));
    for (long i = 0; i < problems; ++i) {
        ProblemSpec spec = base;
        spec.seed = derive_seed(config.base_seed, "problem", static_cast<std::uint64_t>(i));
        prob_seeds[static_cast<std::size_t>(i)] = spec.seed;
        fixed[static_cast<std::size_t>(i)] = make_problem(spec);
    }

    struct CellOut {
        double h_theta0 = std::numeric_limits<double>::quiet_NaN();
        double d_mle = std::numeric_limits<double>::quiet_NaN();
        double d_l2 = std::numeric_limits<double>::quiet_NaN();
        double d_ice = std::numeric_limits<double>::quiet_NaN();
        bool ok = false;
    };
    const long n_count = static_cast<long>(config.n_list.size());
    std::vector<CellOut> outs(static_cast<std::size_t>(problems * n_count));

    parallel_for(problems * n_count, config.parallelism, [&](long task) {
        const auto pi = static_cast<std::size_t>(task / n_count);
        const auto ni = static_cast<std::size_t>(task % n_count);
        const long n = config.n_list[ni];
        const Problem& prob = fixed[pi];
        const std::uint64_t ps = prob_seeds[pi];
        CellOut& out = outs[static_cast<std::size_t>(task)];
        try {
            Dataset train;
            auto x_rng = make_engine(derive_seed(ps, "train-x", static_cast<std::uint64_t>(n)));
            train.x = with_intercept(
                sample_regressors(n, prob.mu, prob.sigma, x_rng));
            auto y_rng = make_engine(derive_seed(ps, "train-y", static_cast<std::uint64_t>(n)));
            train.y = generate_responses(train.x, prob.theta0, y_rng);

            const FitResult mle = fit_mle(model, train, {});
            CvConfig cv;
            cv.fold_seed = derive_seed(ps, "folds", static_cast<std::uint64_t>(n));
            cv.shrink_intercept = true;  // published protocol, as in run_compare
            const CvResult l2 = cross_validate(model, train, penalized_l2(cv), cv);
            FitConfig fc;
            fc.perturb_seed = ps;
            const FitResult ice_fit = fit_ice(model, train, fc);

            out.h_theta0 = entropy_estimate(model, prob.test, prob.theta0);
            out.d_mle = entropy_error(model, prob.test, mle.theta, prob.theta0);
            out.d_l2 = entropy_error(model, prob.test, l2.fit.theta, prob.theta0);
            out.d_ice = entropy_error(model, prob.test, ice_fit.theta, prob.theta0);
            out.ok = true;
        } catch (const std::exception& e) {
            std::cerr << "converge: problem " << pi << " n=" << n << " failed: " << e.what()
                      << "\n";
        }
    });

    std::vector<ConvergeRow> rows;
    std::vector<long> sorted_n = config.n_list;
    std::sort(sorted_n.begin(), sorted_n.end());
    for (long n : sorted_n) {
        const auto ni = static_cast<std::size_t>(
            std::find(config.n_list.begin(), config.n_list.end(), n) - config.n_list.begin());
        ConvergeRow row;
        row.n = n;
        double h0 = 0, dm = 0, dl = 0, di = 0;
        long ok = 0;
        for (long pi = 0; pi < problems; ++pi) {
            const CellOut& out = outs[static_cast<std::size_t>(pi * n_count) + ni];
            if (!out.ok) continue;
            h0 += out.h_theta0;
            dm += out.d_mle;
            dl += out.d_l2;
            di += out.d_ice;
            ++ok;
        }
        if (ok == 0) throw NumericError("run_converge: every problem failed at n=" + std::to_string(n));
        row.h_theta0 = h0 / static_cast<double>(ok);
        row.delta_mle = dm / static_cast<double>(ok);
        row.delta_l2 = dl / static_cast<double>(ok);
        row.delta_ice = di / static_cast<double>(ok);
        rows.push_back(row);
    }

    csv::Table t;
    t.comments = header_comments(config);
    t.header = {"n", "H_theta0", "delta_mle", "delta_l2", "delta_ice"};
    for (const auto& r : rows)
        t.rows.push_back({csv::format_int(r.n), csv::format(r.h_theta0), csv::format(r.delta_mle),
                          csv::format(r.delta_l2), csv::format(r.delta_ice)});
    std::filesystem::create_directories(config.out_dir);
    csv::write(config.out_dir / "converge.csv", t);
    return rows;
}

nlohmann::ordered_json run_variance_ratio(const ExperimentConfig& config) {
    config.validate();
    if (config.study != "variance-ratio")
        throw ContractViolation("run_variance_ratio: config.study is '" + config.study + "'");
    if (config.grid.size() != 1)
        throw ContractViolation("run_variance_ratio: exactly one grid cell expected");
    const LogisticModel model;

    ProblemSpec spec = config.grid.front();
    spec.seed = derive_seed(config.base_seed, "problem", 0);
    const Problem prob = make_problem(spec);
    const double root_n = std::sqrt(static_cast<double>(spec.n_train));

    struct Pair {
        Eigen::VectorXd v_mle, v_ice;
        bool ok = false;
    };
    std::vector<Pair> pairs(static_cast<std::size_t>(config.replications));
    parallel_for(config.replications, config.parallelism, [&](long r) {
        Pair& pr = pairs[static_cast<std::size_t>(r)];
        try {
            // Fresh training sets reuse the problem's streams under indices
            // offset past any make_problem ever uses.
            const std::uint64_t idx = (1ULL << 32) + static_cast<std::uint64_t>(r);
            Dataset train;
            auto x_rng = make_engine(derive_seed(spec.seed, "train-x", idx));
            train.x = with_intercept(sample_regressors(spec.n_train, prob.mu, prob.sigma, x_rng));
            auto y_rng = make_engine(derive_seed(spec.seed, "train-y", idx));
            train.y = generate_responses(train.x, prob.theta0, y_rng);

            const FitResult mle = fit_mle(model, train, {});
            FitConfig fc;
            fc.perturb_seed = derive_seed(spec.seed, "rep", static_cast<std::uint64_t>(r));
            const FitResult ice_fit = fit_ice(model, train, fc);
            pr.v_mle = root_n * (mle.theta - prob.theta0);
            pr.v_ice = root_n * (ice_fit.theta - prob.theta0);
            pr.ok = true;
        } catch (const std::exception& e) {
            std::cerr << "variance-ratio: replication " << r << " failed: " << e.what() << "\n";
        }
    });

    std::vector<Eigen::VectorXd> vm, vi;
    for (const auto& pr : pairs) {
        if (!pr.ok) continue;
        vm.push_back(pr.v_mle);
        vi.push_back(pr.v_ice);
    }
    const long r_eff = static_cast<long>(vm.size());
    if (r_eff < 2) throw NumericError("run_variance_ratio: fewer than 2 successful replications");

    const Eigen::MatrixXd c_mle = sample_covariance(vm);
    const Eigen::MatrixXd c_ice = sample_covariance(vi);
    const double trace_ratio = c_ice.trace() / c_mle.trace();

    nlohmann::ordered_json per_coord = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < c_mle.rows(); ++k)
        per_coord.push_back(c_ice(k, k) / c_mle(k, k));

    // Paired percentile bootstrap on the trace ratio: the same resampled
    // replication indices feed both covariance traces.
    const int resamples = 1000;
    auto boot_rng = make_engine(derive_seed(config.base_seed, "bootstrap"));
    std::uniform_int_distribution<long> pick(0, r_eff - 1);
    std::vector<double> ratios;
    ratios.reserve(resamples);
    for (int b = 0; b < resamples; ++b) {
        std::vector<Eigen::VectorXd> bm, bi;
        bm.reserve(static_cast<std::size_t>(r_eff));
        bi.reserve(static_cast<std::size_t>(r_eff));
        for (long r = 0; r < r_eff; ++r) {
            const auto j = static_cast<std::size_t>(pick(boot_rng));
            bm.push_back(vm[j]);
            bi.push_back(vi[j]);
        }
        ratios.push_back(sample_covariance(bi).trace() / sample_covariance(bm).trace());
    }
    std::sort(ratios.begin(), ratios.end());
    const auto lo_idx = static_cast<std::size_t>(std::llround(0.025 * (resamples - 1)));
    const auto hi_idx = static_cast<std::size_t>(std::llround(0.975 * (resamples - 1)));

    nlohmann::ordered_json out{{"trace_ratio", trace_ratio},
                               {"per_coord_ratios", per_coord},
                               {"ci_low", ratios[lo_idx]},
                               {"ci_high", ratios[hi_idx]},
                               {"reference_c", 1.0 / 9.0},
                               {"R", r_eff},
                               {"seed", config.base_seed}};
    std::filesystem::create_directories(config.out_dir);
    std::ofstream f(config.out_dir / "variance_ratio.json");
    if (!f)
        throw NumericError("run_variance_ratio: cannot open " +
                           (config.out_dir / "variance_ratio.json").string());
    f << out.dump(2) << "\n";
    return out;
}

Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& vs) {
    if (vs.size() < 2) throw ContractViolation("sample_covariance: need at least 2 vectors");
    const Eigen::Index p = vs.front().size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    for (const auto& v : vs) {
        if (v.size() != p) throw ContractViolation("sample_covariance: mixed dimensions");
        mean += v;
    }
    mean /= static_cast<double>(vs.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
    for (const auto& v : vs) {
        const Eigen::VectorXd d = v - mean;
        c.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0);
    }
    c.triangularView<Eigen::StrictlyUpper>() = c.transpose().triangularView<Eigen::StrictlyUpper>();
    return c / (static_cast<double>(vs.size()) - 1.0);
}

}  // namespace ice
