#include "dlcm/em.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dlcm/design.hpp"
#include "dlcm/optim.hpp"
#include "dlcm/util.hpp"

namespace dlcm {

namespace {

// log(logistic(x)) without overflow
inline double log_logistic(double x) {
    if (x > -30.0) return -std::log1p(std::exp(-x));
    return x;  // log(sigma(x)) ~ x for very negative x
}

inline double floor_prob(double p) { return p < kProbFloor ? kProbFloor : p; }

}  // namespace

ForwardOut forward(const RiderKernels& k) {
    const long T = k.emis.rows();
    ForwardOut out;
    out.alpha.resize(T, 2);
    out.scale.resize(T);
    out.log_scale.resize(T);

    double a1 = k.init1 * floor_prob(k.emis(0, 0));
    double a2 = (1.0 - k.init1) * floor_prob(k.emis(0, 1));
    double c = a1 + a2;
    if (!(c > 0.0) || !std::isfinite(c))
        throw NumericError("forward: all-zero alpha row at t=1");
    out.alpha(0, 0) = a1 / c;
    out.alpha(0, 1) = a2 / c;
    out.scale[0] = c;
    out.log_scale[0] = std::log(c);

    for (long t = 1; t < T; ++t) {
        const double p11 = k.ptrans1(t - 1, 0);   // P(next=1 | cur=1)
        const double p21 = k.ptrans1(t - 1, 1);   // P(next=1 | cur=2)
        const double prev1 = out.alpha(t - 1, 0);
        const double prev2 = out.alpha(t - 1, 1);
        a1 = floor_prob(k.emis(t, 0)) * (prev1 * p11 + prev2 * p21);
        a2 = floor_prob(k.emis(t, 1)) * (prev1 * (1.0 - p11) + prev2 * (1.0 - p21));
        c = a1 + a2;
        if (!(c > 0.0) || !std::isfinite(c))
            throw NumericError("forward: all-zero alpha row at t=" + std::to_string(t + 1));
        out.alpha(t, 0) = a1 / c;
        out.alpha(t, 1) = a2 / c;
        out.scale[t] = c;
        out.log_scale[t] = std::log(c);
    }
    out.loglik = out.log_scale.sum();
    return out;
}

Eigen::MatrixXd backward(const RiderKernels& k, const Eigen::VectorXd& scale) {
    const long T = k.emis.rows();
    Eigen::MatrixXd beta(T, 2);
    beta(T - 1, 0) = 1.0;
    beta(T - 1, 1) = 1.0;
    for (long t = T - 2; t >= 0; --t) {
        const double p11 = k.ptrans1(t, 0);
        const double p21 = k.ptrans1(t, 1);
        const double e1b1 = floor_prob(k.emis(t + 1, 0)) * beta(t + 1, 0);
        const double e2b2 = floor_prob(k.emis(t + 1, 1)) * beta(t + 1, 1);
        beta(t, 0) = (p11 * e1b1 + (1.0 - p11) * e2b2) / scale[t + 1];
        beta(t, 1) = (p21 * e1b1 + (1.0 - p21) * e2b2) / scale[t + 1];
    }
    if (!beta.allFinite()) throw NumericError("backward: non-finite beta");
    return beta;
}

ForwardOut forward(const ProcessedRider& rider, const Theta& theta,
                   const Eigen::MatrixXd& rider_draws) {
    return forward(rider_kernels(rider, theta, rider_draws));
}

Eigen::MatrixXd backward(const ProcessedRider& rider, const Theta& theta,
                         const Eigen::MatrixXd& rider_draws) {
    const RiderKernels k = rider_kernels(rider, theta, rider_draws);
    return backward(k, forward(k).scale);
}

double conditional_loglik(const std::vector<ProcessedRider>& data, const Theta& theta,
                          const DrawSet& draws) {
    std::vector<double> ll(data.size());
    parallel_for(data.size(), worker_threads(), [&](std::size_t i) {
        ll[i] = forward(rider_kernels(data[i], theta, draws.rider(i))).loglik;
    });
    double total = 0.0;
    for (double v : ll) total += v;  // fixed order => thread-count independent
    if (!std::isfinite(total)) throw NumericError("conditional_loglik: non-finite value");
    return total;
}

Posteriors e_step(const std::vector<ProcessedRider>& data, const Theta& theta,
                  const DrawSet& draws) {
    const std::size_t N = data.size();
    Posteriors post;
    post.pi.resize(N);
    post.omega.resize(N);
    std::vector<double> ll(N), viol(N, 0.0);

    parallel_for(N, worker_threads(), [&](std::size_t i) {
        const RiderKernels k = rider_kernels(data[i], theta, draws.rider(i));
        const ForwardOut fw = forward(k);
        const Eigen::MatrixXd beta = backward(k, fw.scale);
        const long T = k.emis.rows();

        Eigen::MatrixXd pi = (fw.alpha.array() * beta.array()).matrix();
        Eigen::MatrixXd omega(std::max<long>(T - 1, 0), 4);
        double v = 0.0;
        for (long t = 1; t < T; ++t) {
            const double e1b = floor_prob(k.emis(t, 0)) * beta(t, 0) / fw.scale[t];
            const double e2b = floor_prob(k.emis(t, 1)) * beta(t, 1) / fw.scale[t];
            const double p11 = k.ptrans1(t - 1, 0);
            const double p21 = k.ptrans1(t - 1, 1);
            omega(t - 1, 0) = fw.alpha(t - 1, 0) * p11 * e1b;
            omega(t - 1, 1) = fw.alpha(t - 1, 0) * (1.0 - p11) * e2b;
            omega(t - 1, 2) = fw.alpha(t - 1, 1) * p21 * e1b;
            omega(t - 1, 3) = fw.alpha(t - 1, 1) * (1.0 - p21) * e2b;
            // marginalisation identities
            v = std::max(v, std::abs(omega(t - 1, 0) + omega(t - 1, 1) - pi(t - 1, 0)));
            v = std::max(v, std::abs(omega(t - 1, 2) + omega(t - 1, 3) - pi(t - 1, 1)));
            v = std::max(v, std::abs(omega(t - 1, 0) + omega(t - 1, 2) - pi(t, 0)));
            v = std::max(v, std::abs(omega(t - 1, 1) + omega(t - 1, 3) - pi(t, 1)));
        }
        for (long t = 0; t < T; ++t)
            v = std::max(v, std::abs(pi(t, 0) + pi(t, 1) - 1.0));

        post.pi[i] = std::move(pi);
        post.omega[i] = std::move(omega);
        ll[i] = fw.loglik;
        viol[i] = v;
    });

    post.loglik = 0.0;
    for (double v : ll) post.loglik += v;
    post.max_identity_violation = 0.0;
    for (double v : viol) post.max_identity_violation = std::max(post.max_identity_violation, v);
    return post;
}

// ---------------------------------------------------------------------------
// M-step subproblems
// ---------------------------------------------------------------------------
namespace mstep {

double init_objective(const std::vector<ProcessedRider>& data, const Posteriors& post,
                      const Eigen::VectorXd& coef, Eigen::VectorXd* grad) {
    double obj = 0.0;
    if (grad) grad->setZero(coef.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double k = data[i].init_z.dot(coef);
        const double w1 = post.pi[i](0, 0);
        const double w2 = post.pi[i](0, 1);
        obj += w1 * log_logistic(k) + w2 * log_logistic(-k);
        if (grad) *grad += (w1 - (w1 + w2) * logistic(k)) * data[i].init_z;
    }
    return obj;
}

double transition_objective(const std::vector<ProcessedRider>& data, const Posteriors& post,
                            int from_class, const Eigen::VectorXd& coef,
                            Eigen::VectorXd* grad) {
    if (from_class != 1 && from_class != 2)
        throw ConfigError("transition_objective: from_class must be 1 or 2");
    const int base = (from_class - 1) * 2;
    double obj = 0.0;
    if (grad) grad->setZero(coef.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& om = post.omega[i];
        const auto& X = data[i].trans_x;
        for (long t = 0; t < om.rows(); ++t) {
            const double m = X.row(t).dot(coef);
            const double w1 = om(t, base);      // into class 1
            const double w2 = om(t, base + 1);  // into class 2
            obj += w1 * log_logistic(m) + w2 * log_logistic(-m);
            if (grad) *grad += (w1 - (w1 + w2) * logistic(m)) * X.row(t).transpose();
        }
    }
    return obj;
}

double noncomp_objective(const std::vector<ProcessedRider>& data, const Posteriors& post,
                         const Eigen::VectorXd& coef, Eigen::VectorXd* grad) {
    double obj = 0.0;
    if (grad) grad->setZero(coef.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& X = data[i].noncomp_x;
        if (X.cols() != coef.size())
            throw ConfigError("noncomp_objective: coefficient dimension mismatch");
        for (long t = 0; t < X.rows(); ++t) {
            const double s = data[i].sign[t];
            const double v = s * X.row(t).dot(coef);
            const double w = post.pi[i](t, 1);
            obj += w * log_logistic(v);
            if (grad) *grad += w * (1.0 - logistic(v)) * s * X.row(t).transpose();
        }
    }
    return obj;
}

double choice_objective(const std::vector<ProcessedRider>& data, const Posteriors& post,
                        const DrawSet& draws, const Eigen::VectorXd& coef,
                        Eigen::VectorXd* grad) {
    // coef = [gamma (nF), varrho (nG), sigma (nG)]
    const std::size_t N = data.size();
    if (N == 0) return 0.0;
    const long nF = data[0].def.cols();
    const long nG = data[0].deg.cols();
    if (coef.size() != nF + 2 * nG)
        throw ConfigError("choice_objective: coefficient dimension mismatch");
    const Eigen::VectorXd gamma = coef.head(nF);
    const Eigen::VectorXd varrho = coef.segment(nF, nG);
    const Eigen::VectorXd sigma = coef.tail(nG);

    const long P = 1 + nF + 2 * nG;  // per-rider slot: objective + gradient
    Eigen::MatrixXd slots = Eigen::MatrixXd::Zero(static_cast<long>(N), P);

    parallel_for(N, worker_threads(), [&](std::size_t i) {
        const auto& pr = data[i];
        const Eigen::MatrixXd& D = draws.rider(i);  // R x nG
        const long R = D.rows();
        const long T = pr.t_model;

        // chi' (nG x R) = varrho + sigma .* draw
        Eigen::MatrixXd chiT = (D * sigma.asDiagonal()).transpose();
        chiT.colwise() += varrho;
        Eigen::MatrixXd util = pr.deg * chiT;                 // T x R
        util.colwise() += (pr.def * gamma).eval();
        // probability of the observed choice per draw
        Eigen::ArrayXXd p =
            1.0 / (1.0 + (-(util.array().colwise() * pr.sign.array())).exp());
        Eigen::ArrayXd pbar = p.rowwise().mean().max(kProbFloor);

        const Eigen::ArrayXd w = post.pi[i].col(0).array();
        double obj = (w * pbar.log()).sum();

        // c_t = w_t * sign_t / (R * pbar_t); A = p(1-p)
        Eigen::ArrayXd c = w * pr.sign.array() / (static_cast<double>(R) * pbar);
        Eigen::ArrayXXd A = p * (1.0 - p);
        Eigen::VectorXd cra = (c * A.rowwise().sum()).matrix();   // T
        Eigen::MatrixXd B = A.matrix() * D;                       // T x nG

        slots(static_cast<long>(i), 0) = obj;
        slots.row(static_cast<long>(i)).segment(1, nF) = (pr.def.transpose() * cra).transpose();
        slots.row(static_cast<long>(i)).segment(1 + nF, nG) =
            (pr.deg.transpose() * cra).transpose();
        slots.row(static_cast<long>(i)).segment(1 + nF + nG, nG) =
            ((pr.deg.array() * B.array()).colwise() * c).colwise().sum();
        (void)T;
    });

    double obj = 0.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(P - 1);
    for (long i = 0; i < slots.rows(); ++i) {
        obj += slots(i, 0);
        g += slots.row(i).tail(P - 1).transpose();
    }
    if (grad) *grad = g;
    return obj;
}

}  // namespace mstep

// ---------------------------------------------------------------------------
// M-step driver
// ---------------------------------------------------------------------------
namespace {

// Maximise a concave-ish subproblem with warm start; retries once from a
// perturbed start if the line search stalls away from a stationary point.
Eigen::VectorXd solve_subproblem(const Objective& neg_obj, const Eigen::VectorXd& x0,
                                 const BfgsOptions& opt, std::uint64_t perturb_key) {
    OptimResult res = minimize_bfgs(neg_obj, x0, opt);
    if (!res.converged && res.message == "line search failed" &&
        res.grad.lpNorm<Eigen::Infinity>() > 10.0 * opt.gtol) {
        auto rng = make_rng(perturb_key, 0, Stream::Starts);
        std::uniform_real_distribution<double> unif(-0.05, 0.05);
        Eigen::VectorXd x1 = res.x;
        for (long j = 0; j < x1.size(); ++j) x1[j] += unif(rng);
        OptimResult res2 = minimize_bfgs(neg_obj, x1, opt);
        if (res2.f <= res.f) res = res2;
        // keep whichever point is best; the EM step only requires improvement
        Eigen::VectorXd g0(x0.size());
        const double f0 = neg_obj(x0, &g0);
        if (res.f > f0) return x0;
    }
    return res.x;
}

double block_weight_init(const std::vector<ProcessedRider>& data) {
    return static_cast<double>(data.size());
}

}  // namespace

Theta m_step(const std::vector<ProcessedRider>& data, const Posteriors& post,
             const Theta& theta_prev, const CovariateSpec& spec, const EMConfig& config,
             const DrawSet& draws) {
    Theta theta = theta_prev;
    BfgsOptions opt;
    opt.max_iterations = config.inner_max_iter;
    opt.max_evals = 20 * config.inner_max_iter;

    // ---- initialisation logit (weights pi_i1s) ----
    {
        Eigen::VectorXd x0(spec.n_init_z() + spec.n_init_c());
        x0 << theta_prev.zeta0, theta_prev.zeta0_c;
        opt.gtol = config.inner_gtol * std::max(1.0, block_weight_init(data));
        const Objective neg = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            const double f = mstep::init_objective(data, post, x, g);
            if (g) *g = -*g;
            return -f;
        };
        const Eigen::VectorXd x = solve_subproblem(neg, x0, opt, config.seed ^ 0x11);
        theta.zeta0 = x.head(spec.n_init_z());
        theta.zeta0_c = x.tail(spec.n_init_c());
    }

    // ---- transition logits (weights omega) ----
    for (int cls = 1; cls <= 2; ++cls) {
        Eigen::VectorXd x0(spec.n_trans_x() + spec.n_trans_c());
        if (cls == 1) x0 << theta_prev.zeta1, theta_prev.zeta1_c;
        else x0 << theta_prev.zeta2, theta_prev.zeta2_c;
        double wsum = 0.0;
        const int base = (cls - 1) * 2;
        for (std::size_t i = 0; i < data.size(); ++i)
            wsum += post.omega[i].col(base).sum() + post.omega[i].col(base + 1).sum();
        opt.gtol = config.inner_gtol * std::max(1.0, wsum);
        const Objective neg = [&, cls](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            const double f = mstep::transition_objective(data, post, cls, x, g);
            if (g) *g = -*g;
            return -f;
        };
        const Eigen::VectorXd x =
            solve_subproblem(neg, x0, opt, config.seed ^ (0x22 + static_cast<unsigned>(cls)));
        if (cls == 1) {
            theta.zeta1 = x.head(spec.n_trans_x());
            theta.zeta1_c = x.tail(spec.n_trans_c());
        } else {
            theta.zeta2 = x.head(spec.n_trans_x());
            theta.zeta2_c = x.tail(spec.n_trans_c());
        }
    }

    // ---- inertia logit (weights pi_it2) ----
    {
        Eigen::VectorXd x0(2 + spec.n_noncomp_extra());
        x0[0] = theta_prev.lambda1;
        x0[1] = theta_prev.lambda2;
        if (spec.n_noncomp_extra() > 0) x0.tail(spec.n_noncomp_extra()) = theta_prev.noncomp_extra;
        double wsum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) wsum += post.pi[i].col(1).sum();
        opt.gtol = config.inner_gtol * std::max(1.0, wsum);
        const Objective neg = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            const double f = mstep::noncomp_objective(data, post, x, g);
            if (g) *g = -*g;
            return -f;
        };
        const Eigen::VectorXd x = solve_subproblem(neg, x0, opt, config.seed ^ 0x33);
        theta.lambda1 = x[0];
        theta.lambda2 = x[1];
        if (spec.n_noncomp_extra() > 0) theta.noncomp_extra = x.tail(spec.n_noncomp_extra());
    }

    // ---- simulated mixed logit (weights pi_it1) ----
    {
        const long nF = spec.n_f();
        const long nG = spec.n_g();
        Eigen::VectorXd x0(nF + 2 * nG);
        x0 << theta_prev.gamma, theta_prev.varrho, sigma_from_psi(theta_prev.psi);
        double wsum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) wsum += post.pi[i].col(0).sum();
        opt.gtol = config.inner_gtol * std::max(1.0, wsum);
        const Objective neg = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            const double f = mstep::choice_objective(data, post, draws, x, g);
            if (g) *g = -*g;
            return -f;
        };
        const Eigen::VectorXd x = solve_subproblem(neg, x0, opt, config.seed ^ 0x44);
        theta.gamma = x.head(nF);
        theta.varrho = x.segment(nF, nG);
        theta.psi = x.tail(nG).array().square();
    }

    return theta;
}

// ---------------------------------------------------------------------------
// EM driver
// ---------------------------------------------------------------------------
namespace {

Theta random_start(const CovariateSpec& spec, std::uint64_t seed, int start_index) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(start_index), Stream::Starts);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    auto rand_vec = [&](int n) {
        Eigen::VectorXd v(n);
        for (int k = 0; k < n; ++k) v[k] = unif(rng);
        return v;
    };
    Theta th;
    th.zeta0 = rand_vec(spec.n_init_z());
    th.zeta0_c = rand_vec(spec.n_init_c());
    th.zeta1 = rand_vec(spec.n_trans_x());
    th.zeta1_c = rand_vec(spec.n_trans_c());
    th.zeta2 = rand_vec(spec.n_trans_x());
    th.zeta2_c = rand_vec(spec.n_trans_c());
    th.gamma = rand_vec(spec.n_f());
    th.varrho = rand_vec(spec.n_g());
    th.psi = Eigen::VectorXd::Constant(spec.n_g(), 0.25);  // sd 0.5
    th.lambda1 = 1.0;
    th.lambda2 = 1.0;
    th.noncomp_extra = rand_vec(spec.n_noncomp_extra());
    return th;
}

struct RunOut {
    Theta theta;
    std::vector<double> trace;
    bool converged = false;
    double viol = 0.0;
};

RunOut run_em_once(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                   const EMConfig& config, const DrawSet& draws, const Theta& theta0) {
    RunOut out;
    out.theta = theta0;
    double ll_prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        Posteriors post = e_step(data, out.theta, draws);
        out.trace.push_back(post.loglik);
        out.viol = std::max(out.viol, post.max_identity_violation);
        if (std::abs(post.loglik - ll_prev) < config.tolerance) {
            out.converged = true;
            break;
        }
        ll_prev = post.loglik;
        out.theta = m_step(data, post, out.theta, spec, config, draws);
    }
    return out;
}

}  // namespace

EstimationResult em_estimate(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                             const EMConfig& config) {
    if (data.empty()) throw DataError("em_estimate: no riders to fit");
    for (const auto& pr : data)
        if (pr.t_model < 2)
            throw DataError("em_estimate: rider " + pr.rider_id +
                            " has fewer than 2 modelling occasions");
    const auto t0 = std::chrono::steady_clock::now();

    const DrawSet draws =
        DrawSet::halton(static_cast<int>(data.size()), config.draws, spec.n_g(), config.seed);

    RunOut best;
    bool have_best = false;
    double overall_viol = 0.0;
    std::string last_error;
    for (int s = 0; s < config.n_starts; ++s) {
        const Theta theta0 = random_start(spec, config.seed, s);
        try {
            RunOut run = run_em_once(data, spec, config, draws, theta0);
            overall_viol = std::max(overall_viol, run.viol);
            if (!have_best || run.trace.back() > best.trace.back()) {
                best = std::move(run);
                have_best = true;
            }
        } catch (const NumericError& e) {
            last_error = e.what();
        }
    }
    if (!have_best)
        throw NumericError("em_estimate: all starts failed numerically; last error: " +
                           last_error);

    EstimationResult res;
    res.theta = best.theta;
    res.param_names = parameter_names(spec);
    res.estimates = pack_theta(best.theta, spec);
    res.loglik_trace = best.trace;
    res.final_loglik = best.trace.back();
    res.iterations = static_cast<int>(best.trace.size());
    res.converged = best.converged;
    res.mu = 0.0;  // caller records the expectation config
    res.seed = config.seed;
    res.max_posterior_violation = overall_viol;
    res.n_riders = static_cast<int>(data.size());
    res.n_obs = 0;
    for (const auto& pr : data) res.n_obs += pr.t_model;

    res.gradient = loglik_gradient(data, spec, best.theta, draws);

    if (config.compute_se) {
        bool pd = true;
        double rcond = 0.0;
        res.std_errors = std_errors(data, spec, best.theta, draws, &pd, &rcond);
        res.hessian_pd = pd;
        res.hessian_rcond = rcond;
        res.z_values.resize(res.estimates.size());
        for (long j = 0; j < res.estimates.size(); ++j)
            res.z_values[j] =
                res.std_errors[j] > 0.0 ? res.estimates[j] / res.std_errors[j] : 0.0;
    }

    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

MuProfile grid_search_mu(const std::function<std::vector<ProcessedRider>(double)>& builder,
                         const std::vector<double>& grid, const CovariateSpec& spec,
                         const EMConfig& config) {
    if (grid.empty()) throw ConfigError("grid_search_mu: empty grid");
    MuProfile prof;
    EMConfig point_config = config;
    point_config.compute_se = false;  // only the winning point needs SEs
    bool have_best = false;
    std::string last_error;
    for (double mu : grid) {
        prof.mu.push_back(mu);
        try {
            const auto data = builder(mu);
            EstimationResult r = em_estimate(data, spec, point_config);
            r.mu = mu;
            prof.loglik.push_back(r.final_loglik);
            prof.ok.push_back(true);
            if (!have_best || r.final_loglik > prof.best.final_loglik) {
                prof.best = std::move(r);
                prof.best_mu = mu;
                have_best = true;
            }
        } catch (const std::exception& e) {
            prof.loglik.push_back(std::numeric_limits<double>::quiet_NaN());
            prof.ok.push_back(false);
            last_error = e.what();
        }
    }
    if (!have_best)
        throw NumericError("grid_search_mu: every grid point failed; last error: " + last_error);
    if (config.compute_se) {
        const auto data = builder(prof.best_mu);
        const DrawSet draws = DrawSet::halton(static_cast<int>(data.size()), config.draws,
                                              spec.n_g(), config.seed);
        bool pd = true;
        double rcond = 0.0;
        prof.best.std_errors = std_errors(data, spec, prof.best.theta, draws, &pd, &rcond);
        prof.best.hessian_pd = pd;
        prof.best.hessian_rcond = rcond;
        prof.best.z_values.resize(prof.best.estimates.size());
        for (long j = 0; j < prof.best.estimates.size(); ++j)
            prof.best.z_values[j] = prof.best.std_errors[j] > 0.0
                                        ? prof.best.estimates[j] / prof.best.std_errors[j]
                                        : 0.0;
    }
    return prof;
}

Eigen::VectorXd loglik_gradient(const std::vector<ProcessedRider>& data,
                                const CovariateSpec& spec, const Theta& theta_hat,
                                const DrawSet& draws) {
    const Eigen::VectorXd x = pack_theta(theta_hat, spec);
    return fd_gradient(
        [&](const Eigen::VectorXd& v) {
            return conditional_loglik(data, unpack_theta(v, spec), draws);
        },
        x, 1e-6);
}

Eigen::VectorXd std_errors(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                           const Theta& theta_hat, const DrawSet& draws, bool* hessian_pd,
                           double* rcond) {
    Eigen::VectorXd x = pack_theta(theta_hat, spec);
    // The likelihood is a function of psi >= 0 only; the optimiser's reflected
    // parameterisation (sigma = sqrt(|psi|)) creates an artificial kink at
    // psi = 0.  When a variance estimate sits within the stencil width of the
    // boundary, evaluate the Hessian a whisker inside the domain so central
    // differences measure the curvature of the actual likelihood surface
    // instead of the reflection artefact.
    const double fd_eps = 1e-4;
    const double psi_floor = 2.0 * fd_eps;
    const long psi_off = spec.n_init_z() + spec.n_init_c() +
                         2 * (spec.n_trans_x() + spec.n_trans_c()) + spec.n_f() + spec.n_g();
    for (long j = psi_off; j < psi_off + spec.n_g(); ++j)
        if (x[j] < psi_floor) x[j] = psi_floor;
    const Eigen::MatrixXd H = fd_hessian(
        [&](const Eigen::VectorXd& v) {
            return conditional_loglik(data, unpack_theta(v, spec), draws);
        },
        x, fd_eps, /*richardson=*/true);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-H);
    if (es.info() != Eigen::Success)
        throw NumericError("std_errors: eigendecomposition of the Hessian failed");
    const Eigen::VectorXd ev = es.eigenvalues();
    const double emax = ev.cwiseAbs().maxCoeff();
    const double emin = ev.cwiseAbs().minCoeff();
    const double rc = emax > 0.0 ? emin / emax : 0.0;
    if (rcond) *rcond = rc;
    if (!(emax > 0.0) || rc < 1e-14)
        throw NumericError("std_errors: singular Hessian (rcond = " + format_real(rc) + ")");
    const bool pd = ev.minCoeff() > 0.0;
    if (hessian_pd) *hessian_pd = pd;

    // diag of (-H)^-1 via the eigen decomposition; non-positive directions
    // are clamped and flagged through hessian_pd
    Eigen::VectorXd se(x.size());
    for (long j = 0; j < x.size(); ++j) {
        double d = 0.0;
        for (long k = 0; k < ev.size(); ++k) {
            const double lam = std::max(ev[k], 1e-12 * emax);
            d += es.eigenvectors()(j, k) * es.eigenvectors()(j, k) / lam;
        }
        se[j] = std::sqrt(std::max(d, 0.0));
    }
    return se;
}

}  // namespace dlcm
