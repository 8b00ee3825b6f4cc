#include "ice/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "ice/baselines.hpp"
#include "ice/criteria.hpp"
#include "ice/experiment.hpp"
#include "ice/ice_estimator.hpp"
#include "ice/rng.hpp"

namespace ice {

namespace {

// Shared flag bundle; each subcommand registers only the members it honors.
struct CliArgs {
    std::string config;
    std::string out;
    std::string estimator;
    std::string fit_file;
    std::string problem_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    long replications = 0;
    int parallelism = 0;
};

ExperimentConfig load_study_config(const CliArgs& args, const std::string& study) {
    ExperimentConfig cfg = parse_config(args.config);
    cfg.study = study;  // the subcommand names the study; the file supplies the rest
    if (args.seed_given) cfg.base_seed = args.seed;
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (args.replications > 0) cfg.replications = args.replications;
    if (args.parallelism > 0) cfg.parallelism = args.parallelism;
    return cfg;
}

int run_gen(const CliArgs& args) {
    const ExperimentConfig cfg = parse_config(args.config);
    const std::filesystem::path out =
        args.out.empty() ? cfg.out_dir : std::filesystem::path(args.out);
    const std::uint64_t base = args.seed_given ? args.seed : cfg.base_seed;
    if (cfg.grid.empty()) throw ContractViolation("gen: config defines no cells");
    for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        ProblemSpec spec = cfg.grid[i];
        spec.seed = derive_seed(base, "problem", i);
        const Problem prob = make_problem(spec);
        const std::filesystem::path dir =
            out / ("cell" + std::to_string(i) + "_" + spec_id(spec));
        save_problem(dir, prob, spec);
        std::cerr << "gen: wrote " << dir.string() << " (discarded " << prob.discarded_attempts
                  << " attempts)\n";
    }
    return 0;
}

int run_fit(const CliArgs& args) {
    ProblemSpec spec;
    const Problem prob = load_problem(args.problem_dir, &spec);
    const std::uint64_t seed = args.seed_given ? args.seed : spec.seed;
    const LogisticModel model;

    FitResult fit;
    if (args.estimator == "mle") {
        fit = fit_mle(model, prob.train);
    } else if (args.estimator == "l1" || args.estimator == "l2") {
        CvConfig cv;
        cv.fold_seed = seed;
        fit = cross_validate(model, prob.train,
                             args.estimator == "l1" ? penalized_l1(cv) : penalized_l2(cv), cv)
                  .fit;
    } else if (args.estimator == "ice") {
        FitConfig fc;
        fc.perturb_seed = seed;
        fit = fit_ice(model, prob.train, fc);
    } else {
        throw ContractViolation("fit: unknown estimator '" + args.estimator + "'");
    }

    // Timing is a measurement of this machine, not part of the estimate, so
    // the serialized result clears it and stays reproducible byte for byte.
    fit.wall_time = 0;
    const std::string text = fit.to_json().dump(2) + "\n";
    if (args.out.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(args.out, std::ios::binary);
        if (!f) throw NumericError("fit: cannot open " + args.out);
        f << text;
    }
    return 0;
}

int run_criteria(const CliArgs& args) {
    const Problem prob = load_problem(args.problem_dir);
    std::ifstream in(args.fit_file);
    if (!in) throw ContractViolation("criteria: cannot open " + args.fit_file);
    const FitResult fit = fit_result_from_json(nlohmann::json::parse(in));
    const LogisticModel model;

    const double lambda = fit.lambda.value_or(0.0);
    const QuadraticPenalty penalty;
    nlohmann::ordered_json out{{"aic", aic(model, prob.train, fit.theta).to_json()},
                               {"tic", tic(model, prob.train, fit.theta).to_json()},
                               {"ric", ric(model, prob.train, fit.theta, penalty, lambda).to_json()}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Trace-penalized likelihood estimation and its study harness"};
    app.require_subcommand(1);
    CliArgs args;

    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", args.seed, "Base seed (overrides the config file)")
            ->each([&](const std::string&) { args.seed_given = true; });
    };

    CLI::App* gen = app.add_subcommand("gen", "Materialize one problem per config cell");
    gen->add_option("--config", args.config, "Study config file")->required();
    gen->add_option("--out", args.out, "Output directory");
    add_seed(gen);

    CLI::App* fit = app.add_subcommand("fit", "Fit one estimator on a saved problem");
    fit->add_option("problem", args.problem_dir, "Problem directory from gen")->required();
    fit->add_option("--estimator", args.estimator, "mle | l1 | l2 | ice")->required();
    fit->add_option("--out", args.out, "Result file (default: standard output)");
    add_seed(fit);

    CLI::App* criteria = app.add_subcommand("criteria", "Print AIC/TIC/RIC for a fitted result");
    criteria->add_option("problem", args.problem_dir, "Problem directory from gen")->required();
    criteria->add_option("--fit", args.fit_file, "FitResult file from fit")->required();

    for (const std::string name : {"compare", "converge", "variance-ratio"}) {
        CLI::App* sub = app.add_subcommand(name, "Run the " + name + " study");
        sub->add_option("--config", args.config, "Study config file")->required();
        sub->add_option("--out", args.out, "Output directory (overrides the config file)");
        sub->add_option("--replications", args.replications, "Replication count override");
        sub->add_option("--parallelism", args.parallelism, "Worker count override");
        add_seed(sub);
    }

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (gen->parsed()) return run_gen(args);
        if (fit->parsed()) return run_fit(args);
        if (criteria->parsed()) return run_criteria(args);
        for (const auto* sub : app.get_subcommands()) {
            const std::string study = sub->get_name();
            if (study == "compare") {
                run_compare(load_study_config(args, study));
                return 0;
            }
            if (study == "converge") {
                run_converge(load_study_config(args, study));
                return 0;
            }
            if (study == "variance-ratio") {
                run_variance_ratio(load_study_config(args, study));
                return 0;
            }
        }
        throw ContractViolation("no subcommand dispatched");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace ice
