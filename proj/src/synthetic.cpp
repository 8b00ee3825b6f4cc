#include "ice/synthetic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ice/csv.hpp"
#include "ice/errors.hpp"
#include "ice/rng.hpp"

namespace ice {

void ProblemSpec::validate() const {
    if (p < 1) throw ContractViolation("ProblemSpec: p must be >= 1, got " + std::to_string(p));
    if (m < 0 || m >= p)
        throw ContractViolation("ProblemSpec: need 0 <= m < p, got m=" + std::to_string(m) +
                                " p=" + std::to_string(p));
    if (n_train < 1 || n_test < 1)
        throw ContractViolation("ProblemSpec: train and test sizes must be >= 1");
    if (!(0 < eig_lo && eig_lo < eig_hi))
        throw ContractViolation("ProblemSpec: need 0 < eig_lo < eig_hi");
    if (!(0 < balance_lo && balance_lo < balance_hi && balance_hi < 1))
        throw ContractViolation("ProblemSpec: need 0 < balance_lo < balance_hi < 1");
    if (!(entropy_floor > 0)) throw ContractViolation("ProblemSpec: entropy_floor must be positive");
}

nlohmann::ordered_json ProblemSpec::to_json() const {
    return nlohmann::ordered_json{{"p", p},
                                  {"m", m},
                                  {"n_train", n_train},
                                  {"n_test", n_test},
                                  {"eig_lo", eig_lo},
                                  {"eig_hi", eig_hi},
                                  {"balance_lo", balance_lo},
                                  {"balance_hi", balance_hi},
                                  {"entropy_floor", entropy_floor},
                                  {"seed", seed}};
}

ProblemSpec ProblemSpec::from_json(const nlohmann::json& j) {
    ProblemSpec s;
    s.p = j.at("p").get<long>();
    s.m = j.at("m").get<long>();
    s.n_train = j.at("n_train").get<long>();
    s.n_test = j.at("n_test").get<long>();
    s.eig_lo = j.at("eig_lo").get<double>();
    s.eig_hi = j.at("eig_hi").get<double>();
    s.balance_lo = j.at("balance_lo").get<double>();
    s.balance_hi = j.at("balance_hi").get<double>();
    s.entropy_floor = j.at("entropy_floor").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

Eigen::MatrixXd random_covariance(Eigen::Index p, double a, double b, std::mt19937_64& rng,
                                  Eigen::VectorXd* eigvals_out) {
    if (p < 1) throw ContractViolation("random_covariance: p must be >= 1");
    if (!(0 < a && a < b)) throw ContractViolation("random_covariance: need 0 < a < b");

    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd gauss(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) gauss(i, j) = normal(rng);

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    Eigen::MatrixXd u = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < p; ++j)
        if (r(j, j) < 0) u.col(j) = -u.col(j);

    // Eigenvalues are kept pairwise distinct; only they are redrawn.
    std::uniform_real_distribution<double> unif(a, b);
    Eigen::VectorXd eig(p);
    bool distinct = false;
    for (int attempt = 0; attempt < 100 && !distinct; ++attempt) {
        for (Eigen::Index k = 0; k < p; ++k) eig[k] = unif(rng);
        std::vector<double> sorted(eig.data(), eig.data() + p);
        std::sort(sorted.begin(), sorted.end());
        distinct = true;
        for (Eigen::Index k = 0; k + 1 < p; ++k)
            if (sorted[static_cast<std::size_t>(k + 1)] - sorted[static_cast<std::size_t>(k)] <=
                1e-12)
                distinct = false;
    }
    if (!distinct)
        throw GenerationError("random_covariance: no distinct spectrum in 100 redraws");

    if (eigvals_out) *eigvals_out = eig;
    Eigen::MatrixXd sigma = u * eig.asDiagonal() * u.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd sample_regressors(Eigen::Index n, const Eigen::VectorXd& mu,
                                  const Eigen::MatrixXd& sigma, std::mt19937_64& rng) {
    const Eigen::Index p = mu.size();
    if (sigma.rows() != p || sigma.cols() != p)
        throw ContractViolation("sample_regressors: sigma and mu disagree on dimension");
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw NumericError("sample_regressors: covariance is not positive definite");
    const Eigen::MatrixXd gamma = llt.matrixL();

    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd z(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < p; ++k) z[k] = normal(rng);
        x.row(i) = (mu + gamma * z).transpose();
    }
    return x;
}

ParamVector generate_true_params(Eigen::Index p, Eigen::Index m, std::mt19937_64& rng) {
    if (p < 1 || m < 0 || m >= p)
        throw ContractViolation("generate_true_params: need p >= 1 and 0 <= m < p");
    std::vector<Eigen::Index> slots(static_cast<std::size_t>(p));
    std::iota(slots.begin(), slots.end(), Eigen::Index{1});
    std::shuffle(slots.begin(), slots.end(), rng);

    ParamVector theta = ParamVector::Zero(p + 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    // The first m shuffled slots stay zero; the rest draw in slot order so
    // that the values do not depend on the shuffle's internal arrangement.
    std::vector<Eigen::Index> live(slots.begin() + m, slots.end());
    std::sort(live.begin(), live.end());
    for (Eigen::Index k : live) theta[k] = normal(rng);
    return theta;
}

namespace {

// Mean predicted probability and mean Bernoulli entropy over the probe rows
// at the given intercept; the design carries the intercept column.
struct ProbeSummary {
    double mean_p = 0;
    double mean_entropy = 0;
};

ProbeSummary summarize(const Eigen::VectorXd& slope_index, double intercept) {
    ProbeSummary s;
    const Eigen::Index n = slope_index.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = intercept + slope_index[i];
        // p(y=1) = 1/(1+e^t), computed on the safe side of the exponential
        const double ena = std::exp(-std::abs(t));
        const double p1 = t >= 0 ? ena / (1.0 + ena) : 1.0 / (1.0 + ena);
        s.mean_p += p1;
        if (p1 > 0 && p1 < 1)
            s.mean_entropy -= p1 * std::log(p1) + (1.0 - p1) * std::log(1.0 - p1);
    }
    s.mean_p /= static_cast<double>(n);
    s.mean_entropy /= static_cast<double>(n);
    return s;
}

}  // namespace

std::optional<ParamVector> adjust_intercept(const ParamVector& theta0, const ModelContract& model,
                                            const Eigen::MatrixXd& probe_design,
                                            const ProblemSpec& spec) {
    (void)model;  // the closed logistic form below is what LogisticModel computes
    if (probe_design.cols() != theta0.size())
        throw ContractViolation("adjust_intercept: design width disagrees with theta0");

    // x·θ with the intercept zeroed out; bisection only shifts the constant.
    ParamVector slopes = theta0;
    slopes[0] = 0.0;
    const Eigen::VectorXd slope_index = probe_design * slopes;

    double lo = -50.0, hi = 50.0;
    double t = 0.0;
    bool converged = false;
    ProbeSummary s;
    for (int iter = 0; iter < 200; ++iter) {
        t = 0.5 * (lo + hi);
        s = summarize(slope_index, t);
        if (std::abs(s.mean_p - 0.5) < 1e-6) {
            converged = true;
            break;
        }
        // mean p is strictly decreasing in the intercept
        if (s.mean_p > 0.5)
            lo = t;
        else
            hi = t;
    }
    if (!converged) return std::nullopt;
    if (!(spec.balance_lo < s.mean_p && s.mean_p < spec.balance_hi)) return std::nullopt;
    if (!(s.mean_entropy > spec.entropy_floor)) return std::nullopt;

    ParamVector adjusted = theta0;
    adjusted[0] = t;
    return adjusted;
}

Eigen::VectorXd generate_responses(const Eigen::MatrixXd& design, const ParamVector& theta0,
                                   std::mt19937_64& rng) {
    if (!theta0.allFinite()) throw ContractViolation("generate_responses: theta0 must be finite");
    if (design.cols() != theta0.size())
        throw ContractViolation("generate_responses: design width disagrees with theta0");
    const LogisticModel model;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd y(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const double p1 = predict_prob(model, design.row(i), theta0);
        y[i] = unif(rng) < p1 ? 1.0 : 0.0;
    }
    return y;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& raw) {
    Eigen::MatrixXd design(raw.rows(), raw.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(raw.cols()) = raw;
    return design;
}

Problem make_problem(const ProblemSpec& spec) {
    spec.validate();
    const LogisticModel model;

    for (long attempt = 0; attempt < 50; ++attempt) {
        const std::uint64_t attempt_seed =
            attempt == 0 ? spec.seed
                         : derive_seed(spec.seed, "retry-k", static_cast<std::uint64_t>(attempt));

        auto cov_rng = make_engine(derive_seed(attempt_seed, "cov"));
        const Eigen::MatrixXd sigma = random_covariance(spec.p, spec.eig_lo, spec.eig_hi, cov_rng);

        auto mu_rng = make_engine(derive_seed(attempt_seed, "mu"));
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::VectorXd mu(spec.p);
        for (Eigen::Index k = 0; k < spec.p; ++k) mu[k] = normal(mu_rng);

        auto train_rng = make_engine(derive_seed(attempt_seed, "train-x"));
        const Eigen::MatrixXd train_design =
            with_intercept(sample_regressors(spec.n_train, mu, sigma, train_rng));
        auto test_rng = make_engine(derive_seed(attempt_seed, "test-x"));
        const Eigen::MatrixXd test_design =
            with_intercept(sample_regressors(spec.n_test, mu, sigma, test_rng));

        auto theta_rng = make_engine(derive_seed(attempt_seed, "theta0"));
        const ParamVector raw_theta = generate_true_params(spec.p, spec.m, theta_rng);

        const auto adjusted = adjust_intercept(raw_theta, model, test_design, spec);
        if (!adjusted) continue;  // replication discarded

        Problem prob;
        prob.theta0 = *adjusted;
        prob.mu = mu;
        prob.sigma = sigma;
        prob.discarded_attempts = attempt;
        prob.train.x = train_design;
        auto train_y_rng = make_engine(derive_seed(attempt_seed, "train-y"));
        prob.train.y = generate_responses(train_design, prob.theta0, train_y_rng);
        prob.test.x = test_design;
        auto test_y_rng = make_engine(derive_seed(attempt_seed, "test-y"));
        prob.test.y = generate_responses(test_design, prob.theta0, test_y_rng);
        prob.train.validate();
        prob.test.validate();
        return prob;
    }
    throw GenerationError("make_problem: 50 attempts rejected for spec " +
                          spec.to_json().dump());
}

namespace {

void write_vector(const std::filesystem::path& file, const std::string& name,
                  const Eigen::VectorXd& v) {
    csv::write_matrix(file, {name}, v);
}

void write_dataset(const std::filesystem::path& file, const Dataset& d) {
    std::vector<std::string> header;
    header.emplace_back("y");
    for (Eigen::Index j = 0; j < d.p(); ++j) header.push_back("x" + std::to_string(j));
    Eigen::MatrixXd m(d.n(), d.p() + 1);
    m.col(0) = d.y;
    m.rightCols(d.p()) = d.x;
    csv::write_matrix(file, header, m);
}

Dataset read_dataset(const std::filesystem::path& file) {
    const Eigen::MatrixXd m = csv::read_matrix(file);
    if (m.cols() < 2) throw NumericError("dataset file " + file.string() + " has too few columns");
    Dataset d;
    d.y = m.col(0);
    d.x = m.rightCols(m.cols() - 1);
    d.validate();
    return d;
}

}  // namespace

void save_problem(const std::filesystem::path& dir, const Problem& problem,
                  const ProblemSpec& spec) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json j = spec.to_json();
    j["discarded_attempts"] = problem.discarded_attempts;
    std::ofstream out(dir / "spec.json");
    if (!out) throw NumericError("save_problem: cannot open " + (dir / "spec.json").string());
    out << j.dump(2) << "\n";
    out.close();

    write_vector(dir / "theta0.csv", "theta0", problem.theta0);
    write_vector(dir / "mu.csv", "mu", problem.mu);
    std::vector<std::string> sig_header;
    for (Eigen::Index jcol = 0; jcol < problem.sigma.cols(); ++jcol)
        sig_header.push_back("s" + std::to_string(jcol));
    csv::write_matrix(dir / "sigma.csv", sig_header, problem.sigma);
    write_dataset(dir / "train.csv", problem.train);
    write_dataset(dir / "test.csv", problem.test);
}

Problem load_problem(const std::filesystem::path& dir, ProblemSpec* spec_out) {
    std::ifstream in(dir / "spec.json");
    if (!in) throw NumericError("load_problem: cannot open " + (dir / "spec.json").string());
    nlohmann::json j;
    in >> j;
    const ProblemSpec spec = ProblemSpec::from_json(j);
    if (spec_out) *spec_out = spec;

    Problem prob;
    prob.discarded_attempts = j.value("discarded_attempts", 0L);
    prob.theta0 = csv::read_matrix(dir / "theta0.csv");
    prob.mu = csv::read_matrix(dir / "mu.csv");
    prob.sigma = csv::read_matrix(dir / "sigma.csv");
    prob.train = read_dataset(dir / "train.csv");
    prob.test = read_dataset(dir / "test.csv");
    if (prob.theta0.size() != spec.p + 1)
        throw NumericError("load_problem: theta0 length disagrees with spec");
    return prob;
}

}  // namespace ice
