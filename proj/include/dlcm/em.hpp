#pragma once

#include <functional>
#include <vector>

#include "dlcm/config.hpp"
#include "dlcm/draws.hpp"
#include "dlcm/model.hpp"
#include "dlcm/types.hpp"

namespace dlcm {

// ---------------------------------------------------------------------------
// Scaled forward/backward recursions (2 latent classes)
//
// alpha rows are normalised to sum to 1; scale[t-1] holds the normaliser, and
// sum(log scale) is the rider's conditional log-likelihood. beta is rescaled
// with the same factors so that pi = alpha .* beta without further
// normalisation.
// ---------------------------------------------------------------------------
struct ForwardOut {
    Eigen::MatrixXd alpha;      // T x 2
    Eigen::VectorXd scale;      // T (linear)
    Eigen::VectorXd log_scale;  // T
    double loglik = 0.0;
};

ForwardOut forward(const RiderKernels& k);
Eigen::MatrixXd backward(const RiderKernels& k, const Eigen::VectorXd& scale);

ForwardOut forward(const ProcessedRider& rider, const Theta& theta,
                   const Eigen::MatrixXd& rider_draws);
Eigen::MatrixXd backward(const ProcessedRider& rider, const Theta& theta,
                         const Eigen::MatrixXd& rider_draws);

Posteriors e_step(const std::vector<ProcessedRider>& data, const Theta& theta,
                  const DrawSet& draws);

// ---------------------------------------------------------------------------
// M-step subproblem objectives (values of the weighted log-likelihoods to be
// maximised, with analytical gradients). Exposed for verification.
// ---------------------------------------------------------------------------
namespace mstep {

// Initialisation logit over coef = [zeta0, zeta0_c]; weights pi_i1s.
double init_objective(const std::vector<ProcessedRider>& data, const Posteriors& post,
                      const Eigen::VectorXd& coef, Eigen::VectorXd* grad);

// Transition logit for from_class in {1,2} over coef = [zeta_s, zeta_s_c];
// weights omega into t = 2..T.
double transition_objective(const std::vector<ProcessedRider>& data, const Posteriors& post,
                            int from_class, const Eigen::VectorXd& coef, Eigen::VectorXd* grad);

// Inertia logit over coef = [lambda1, lambda2, extras]; weights pi_it2.
double noncomp_objective(const std::vector<ProcessedRider>& data, const Posteriors& post,
                         const Eigen::VectorXd& coef, Eigen::VectorXd* grad);

// Simulated mixed logit over coef = [gamma, varrho, sigma]; weights pi_it1.
// sigma enters as an unconstrained standard deviation.
double choice_objective(const std::vector<ProcessedRider>& data, const Posteriors& post,
                        const DrawSet& draws, const Eigen::VectorXd& coef,
                        Eigen::VectorXd* grad);

}  // namespace mstep

Theta m_step(const std::vector<ProcessedRider>& data, const Posteriors& post,
             const Theta& theta_prev, const CovariateSpec& spec, const EMConfig& config,
             const DrawSet& draws);

EstimationResult em_estimate(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                             const EMConfig& config);

struct MuProfile {
    std::vector<double> mu;
    std::vector<double> loglik;
    std::vector<bool> ok;         // grid point estimated successfully
    double best_mu = 0.0;
    EstimationResult best;
};

// Rebuilds the processed data per grid point (expectations depend on mu) and
// refits; ties broken toward smaller mu.
MuProfile grid_search_mu(const std::function<std::vector<ProcessedRider>(double)>& builder,
                         const std::vector<double>& grid, const CovariateSpec& spec,
                         const EMConfig& config);

// Standard errors from the central-difference Hessian of the conditional
// log-likelihood (variance parameterisation): sqrt(diag(-H^-1)).
Eigen::VectorXd std_errors(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                           const Theta& theta_hat, const DrawSet& draws, bool* hessian_pd,
                           double* rcond);

// Central-difference gradient of the conditional log-likelihood in the packed
// parameterisation (step 1e-6 * max(1,|theta_j|)).
Eigen::VectorXd loglik_gradient(const std::vector<ProcessedRider>& data,
                                const CovariateSpec& spec, const Theta& theta_hat,
                                const DrawSet& draws);

}  // namespace dlcm
