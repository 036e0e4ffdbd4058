#include "dlcm/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dlcm/design.hpp"
#include "dlcm/optim.hpp"
#include "dlcm/util.hpp"

namespace dlcm {

namespace {

inline double log_logistic(double x) {
    if (x > -30.0) return -std::log1p(std::exp(-x));
    return x;
}

// signed covariate rows: row = sign_t * [def_t, deg_t], so log P(observed
// choice) = log logistic(row . beta)
Eigen::MatrixXd signed_rows(const ProcessedRider& pr) {
    const long T = pr.t_model;
    Eigen::MatrixXd X(T, pr.def.cols() + pr.deg.cols());
    X << pr.def, pr.deg;
    X = X.array().colwise() * pr.sign.array();
    return X;
}

std::vector<std::string> choice_names(const CovariateSpec& spec) {
    std::vector<std::string> names = spec.f_attrs;
    if (spec.choice_asc) names.push_back("asc");
    for (const auto& g : spec.g_attrs) names.push_back(g);
    return names;
}

int count_obs(const std::vector<ProcessedRider>& data) {
    int n = 0;
    for (const auto& pr : data) n += pr.t_model;
    return n;
}

}  // namespace

double mnl_loglik(const std::vector<ProcessedRider>& data, const Eigen::VectorXd& beta,
                  Eigen::VectorXd* grad) {
    double ll = 0.0;
    if (grad) grad->setZero(beta.size());
    for (const auto& pr : data) {
        const Eigen::MatrixXd X = signed_rows(pr);
        const Eigen::VectorXd v = X * beta;
        for (long t = 0; t < v.size(); ++t) ll += log_logistic(v[t]);
        if (grad) {
            const Eigen::VectorXd r =
                (1.0 - v.array().unaryExpr([](double x) { return logistic(x); })).matrix();
            *grad += X.transpose() * r;
        }
    }
    return ll;
}

double lc_mnl_loglik(const std::vector<ProcessedRider>& data, const Eigen::VectorXd& params,
                     Eigen::VectorXd* grad) {
    if (data.empty()) throw DataError("lc_mnl_loglik: no riders");
    const long nK = (params.size() - 1) / 2;
    if (params.size() != 1 + 2 * nK)
        throw ConfigError("lc_mnl_loglik: parameter vector has wrong length");
    const double alpha = params[0];
    const Eigen::VectorXd b1 = params.segment(1, nK);
    const Eigen::VectorXd b2 = params.segment(1 + nK, nK);
    const double p1 = logistic(alpha);

    double ll = 0.0;
    if (grad) grad->setZero(params.size());
    for (const auto& pr : data) {
        const Eigen::MatrixXd X = signed_rows(pr);
        if (X.cols() != nK) throw ConfigError("lc_mnl_loglik: covariate dimension mismatch");
        const Eigen::VectorXd v1 = X * b1;
        const Eigen::VectorXd v2 = X * b2;
        double B1 = 0.0, B2 = 0.0;
        for (long t = 0; t < v1.size(); ++t) {
            B1 += log_logistic(v1[t]);
            B2 += log_logistic(v2[t]);
        }
        const double l1 = std::log(p1) + B1;
        const double l2 = std::log(1.0 - p1) + B2;
        const double m = std::max(l1, l2);
        const double li = m + std::log(std::exp(l1 - m) + std::exp(l2 - m));
        ll += li;
        if (grad) {
            const double r1 = std::exp(l1 - li);
            const double r2 = std::exp(l2 - li);
            (*grad)[0] += r1 * (1.0 - p1) - r2 * p1;
            const Eigen::VectorXd s1 =
                (1.0 - v1.array().unaryExpr([](double x) { return logistic(x); })).matrix();
            const Eigen::VectorXd s2 =
                (1.0 - v2.array().unaryExpr([](double x) { return logistic(x); })).matrix();
            grad->segment(1, nK) += r1 * (X.transpose() * s1);
            grad->segment(1 + nK, nK) += r2 * (X.transpose() * s2);
        }
    }
    return ll;
}

BaselineResult fit_mnl(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                       const BaselineConfig& config) {
    if (data.empty()) throw DataError("fit_mnl: no riders to fit");
    const auto names = choice_names(spec);
    const long nK = static_cast<long>(names.size());

    BfgsOptions opt;
    opt.gtol = config.tolerance * std::max(1, count_obs(data));
    opt.max_iterations = config.max_iterations;
    opt.max_evals = 20 * config.max_iterations;
    const Objective neg = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        const double f = mnl_loglik(data, x, g);
        if (g) *g = -*g;
        return -f;
    };
    const OptimResult res = minimize_bfgs(neg, Eigen::VectorXd::Zero(nK), opt);

    BaselineResult out;
    out.kind = "mnl";
    for (const auto& n : names) out.param_names.push_back("mnl." + n);
    out.estimates = res.x;
    out.loglik = -res.f;
    out.converged = res.converged;
    out.n_obs = count_obs(data);
    out.n_riders = static_cast<int>(data.size());
    out.separation_flag = res.x.cwiseAbs().maxCoeff() > 50.0;
    out.degenerate_class = false;
    out.class1_share = std::numeric_limits<double>::quiet_NaN();

    const Eigen::MatrixXd H = fd_hessian(
        [&](const Eigen::VectorXd& x) { return mnl_loglik(data, x, nullptr); }, res.x, 1e-4,
        true);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-H);
    out.std_errors.resize(nK);
    out.z_values.resize(nK);
    for (long j = 0; j < nK; ++j) {
        double d = 0.0;
        for (long k = 0; k < nK; ++k) {
            const double lam = std::max(es.eigenvalues()[k], 1e-12);
            d += es.eigenvectors()(j, k) * es.eigenvectors()(j, k) / lam;
        }
        out.std_errors[j] = std::sqrt(std::max(d, 0.0));
        out.z_values[j] = out.std_errors[j] > 0.0 ? out.estimates[j] / out.std_errors[j] : 0.0;
    }
    return out;
}

BaselineResult fit_lc_mnl(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                          const BaselineConfig& config) {
    if (data.empty()) throw DataError("fit_lc_mnl: no riders to fit");
    const auto names = choice_names(spec);
    const long nK = static_cast<long>(names.size());
    const std::size_t N = data.size();

    // per-rider signed covariates cached once
    std::vector<Eigen::MatrixXd> X(N);
    for (std::size_t i = 0; i < N; ++i) X[i] = signed_rows(data[i]);

    const auto class_loglik = [&](std::size_t i, const Eigen::VectorXd& b) {
        const Eigen::VectorXd v = X[i] * b;
        double s = 0.0;
        for (long t = 0; t < v.size(); ++t) s += log_logistic(v[t]);
        return s;
    };

    BfgsOptions opt;
    opt.max_iterations = config.max_iterations;
    opt.max_evals = 20 * config.max_iterations;

    Eigen::VectorXd best_params;
    double best_ll = -std::numeric_limits<double>::infinity();
    bool best_converged = false;

    for (int start = 0; start < std::max(1, config.n_starts); ++start) {
        auto rng = make_rng(config.seed, static_cast<std::uint64_t>(start), Stream::Starts);
        std::uniform_real_distribution<double> unif(-0.5, 0.5);
        Eigen::VectorXd b1(nK), b2(nK);
        for (long k = 0; k < nK; ++k) b1[k] = unif(rng);
        for (long k = 0; k < nK; ++k) b2[k] = unif(rng);
        double p1 = 0.5;

        double ll_prev = -std::numeric_limits<double>::infinity();
        double ll = ll_prev;
        bool converged = false;
        Eigen::VectorXd resp(N);
        for (int iter = 0; iter < config.max_iterations; ++iter) {
            // E-step: rider-level responsibilities and the mixture loglik
            ll = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double l1 = std::log(p1) + class_loglik(i, b1);
                const double l2 = std::log(1.0 - p1) + class_loglik(i, b2);
                const double m = std::max(l1, l2);
                const double li = m + std::log(std::exp(l1 - m) + std::exp(l2 - m));
                resp[i] = std::exp(l1 - li);
                ll += li;
            }
            if (std::abs(ll - ll_prev) < config.tolerance) {
                converged = true;
                break;
            }
            ll_prev = ll;
            // M-step: share in closed form, weighted logits by BFGS
            p1 = std::min(std::max(resp.mean(), 1e-12), 1.0 - 1e-12);
            for (int cls = 0; cls < 2; ++cls) {
                Eigen::VectorXd& b = cls == 0 ? b1 : b2;
                const double wtot =
                    cls == 0 ? resp.sum() : static_cast<double>(N) - resp.sum();
                opt.gtol = config.tolerance * std::max(1.0, wtot);
                const Objective neg = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
                    double f = 0.0;
                    if (g) g->setZero(nK);
                    for (std::size_t i = 0; i < N; ++i) {
                        const double w = cls == 0 ? resp[i] : 1.0 - resp[i];
                        const Eigen::VectorXd v = X[i] * x;
                        for (long t = 0; t < v.size(); ++t) f += w * log_logistic(v[t]);
                        if (g) {
                            const Eigen::VectorXd s =
                                (1.0 - v.array().unaryExpr(
                                           [](double u) { return logistic(u); }))
                                    .matrix();
                            *g += w * (X[i].transpose() * s);
                        }
                    }
                    if (g) *g = -*g;
                    return -f;
                };
                b = minimize_bfgs(neg, b, opt).x;
            }
        }

        if (ll > best_ll) {
            best_ll = ll;
            best_params.resize(1 + 2 * nK);
            best_params[0] = std::log(p1) - std::log1p(-p1);
            best_params.segment(1, nK) = b1;
            best_params.segment(1 + nK, nK) = b2;
            best_converged = converged;
        }
    }

    // label anchor: class 1 carries the more negative first coefficient
    if (nK > 0 && best_params[1 + nK] < best_params[1]) {
        Eigen::VectorXd tmp = best_params.segment(1, nK);
        best_params.segment(1, nK) = best_params.segment(1 + nK, nK);
        best_params.segment(1 + nK, nK) = tmp;
        best_params[0] = -best_params[0];
    }

    BaselineResult out;
    out.kind = "lcmnl";
    out.param_names.push_back("lcmnl.alpha");
    for (const auto& n : names) out.param_names.push_back("lcmnl.c1." + n);
    for (const auto& n : names) out.param_names.push_back("lcmnl.c2." + n);
    out.estimates = best_params;
    out.loglik = best_ll;
    out.converged = best_converged;
    out.n_obs = count_obs(data);
    out.n_riders = static_cast<int>(N);
    out.class1_share = logistic(best_params[0]);
    out.degenerate_class =
        std::min(out.class1_share, 1.0 - out.class1_share) < 1e-4;
    out.separation_flag = best_params.tail(2 * nK).cwiseAbs().maxCoeff() > 50.0;

    const long nP = best_params.size();
    const Eigen::MatrixXd H = fd_hessian(
        [&](const Eigen::VectorXd& x) { return lc_mnl_loglik(data, x, nullptr); },
        best_params, 1e-4, true);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-H);
    out.std_errors.resize(nP);
    out.z_values.resize(nP);
    for (long j = 0; j < nP; ++j) {
        double d = 0.0;
        for (long k = 0; k < nP; ++k) {
            const double lam = std::max(es.eigenvalues()[k], 1e-12);
            d += es.eigenvectors()(j, k) * es.eigenvectors()(j, k) / lam;
        }
        out.std_errors[j] = std::sqrt(std::max(d, 0.0));
        out.z_values[j] = out.std_errors[j] > 0.0 ? out.estimates[j] / out.std_errors[j] : 0.0;
    }
    return out;
}

}  // namespace dlcm
