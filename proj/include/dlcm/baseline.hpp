#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dlcm/config.hpp"
#include "dlcm/types.hpp"

namespace dlcm {

// Pooled binary logit over all modelling occasions. Covariates are the
// expected-attribute differences [F block (incl. ASC if configured), G block].
// Analytic gradient, BFGS from zeros (the loglik is concave; n_starts is
// ignored), standard errors from the numerical Hessian.
BaselineResult fit_mnl(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                       const BaselineConfig& config);

// Two-class mixture of that logit with rider-level class membership and a
// constant-only membership logit, fitted by EM with random multi-starts.
// Classes are label-anchored so class 1 carries the more negative first
// choice coefficient. Flags: degenerate_class if a class share collapses
// below 1e-4, separation_flag if any |coefficient| exceeds 50.
BaselineResult fit_lc_mnl(const std::vector<ProcessedRider>& data, const CovariateSpec& spec,
                          const BaselineConfig& config);

// Log-likelihoods with analytic gradients, exposed for verification.
// MNL: beta over the pooled covariates.
double mnl_loglik(const std::vector<ProcessedRider>& data, const Eigen::VectorXd& beta,
                  Eigen::VectorXd* grad);
// LC-MNL: params = [alpha (membership logit), beta_1, beta_2].
double lc_mnl_loglik(const std::vector<ProcessedRider>& data, const Eigen::VectorXd& params,
                     Eigen::VectorXd* grad);

}  // namespace dlcm
