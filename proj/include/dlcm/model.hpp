#pragma once

#include <utility>
#include <vector>

#include "dlcm/config.hpp"
#include "dlcm/draws.hpp"
#include "dlcm/types.hpp"

namespace dlcm {

// ---------------------------------------------------------------------------
// Parameter packing
//
// Packed order: [zeta0, zeta0_c, zeta1, zeta1_c, zeta2, zeta2_c, gamma,
// varrho, psi, lambda1, lambda2, noncomp_extra]; psi entries are variances.
// parameter_names() in design.hpp yields matching labels.
// ---------------------------------------------------------------------------
int theta_dim(const CovariateSpec& spec);
Eigen::VectorXd pack_theta(const Theta& theta, const CovariateSpec& spec);
Theta unpack_theta(const Eigen::VectorXd& v, const CovariateSpec& spec);

// Mixing standard deviations from variances; |psi| keeps the kernels defined
// for small negative excursions during finite differencing.
Eigen::VectorXd sigma_from_psi(const Eigen::VectorXd& psi);

// ---------------------------------------------------------------------------
// Scalar kernels (reference implementations; the batched path below is used
// in estimation)
// ---------------------------------------------------------------------------

// P(class 1 at t=1), P(class 2 at t=1) from the initialisation covariates.
std::pair<double, double> init_class_prob(const ProcessedRider& rider,
                                          const Eigen::VectorXd& zeta0,
                                          const Eigen::VectorXd& zeta0_c);

// P(class at t+1 = 1 | class at t = from_class), using the mismatch at t.
std::pair<double, double> transition_prob(const ProcessedRider& rider, int t, int from_class,
                                          const Theta& theta);

// Compensatory binary logit over routes at a realised coefficient vector chi.
std::pair<double, double> comp_choice_prob(const ProcessedRider& rider, int t,
                                           const Eigen::VectorXd& gamma,
                                           const Eigen::VectorXd& chi);

// Simulated marginal probability: average of comp_choice_prob over
// chi_r = varrho + sqrt(psi) .* draw_r.
std::pair<double, double> comp_choice_prob_marginal(const ProcessedRider& rider, int t,
                                                    const Eigen::VectorXd& gamma,
                                                    const Eigen::VectorXd& varrho,
                                                    const Eigen::VectorXd& psi,
                                                    const Eigen::MatrixXd& rider_draws);

// Inertia kernel: P(route 1) = logistic(lambda1*1[lag=1] - lambda2*1[lag=2]
// + extras); extra_x and extra_coef may be empty.
std::pair<double, double> noncomp_choice_prob(int lagged_choice, double lambda1, double lambda2,
                                              const Eigen::VectorXd& extra_x,
                                              const Eigen::VectorXd& extra_coef);

// Probability of the observed choice y_t under the given class.
double emission_prob(const ProcessedRider& rider, int t, int cls, const Theta& theta,
                     const Eigen::MatrixXd& rider_draws);

// ---------------------------------------------------------------------------
// Batched kernels
// ---------------------------------------------------------------------------
struct RiderKernels {
    // emis(t-1, s-1): probability of the observed choice at t under class s.
    Eigen::MatrixXd emis;     // T x 2
    double init1 = 0.5;       // P(class 1 at t=1)
    // ptrans1(t-1, s-1): P(class at t+1 = 1 | class at t = s), t = 1..T-1.
    Eigen::MatrixXd ptrans1;  // (T-1) x 2
};

RiderKernels rider_kernels(const ProcessedRider& rider, const Theta& theta,
                           const Eigen::MatrixXd& rider_draws);

std::vector<RiderKernels> all_kernels(const std::vector<ProcessedRider>& data,
                                      const Theta& theta, const DrawSet& draws);

// Sum over riders of log P(y_i1..T | y_i0, inputs); forward-recursion based,
// scaled against underflow. Defined alongside the forward machinery.
double conditional_loglik(const std::vector<ProcessedRider>& data, const Theta& theta,
                          const DrawSet& draws);

// ---------------------------------------------------------------------------
// Crowding multipliers
// ---------------------------------------------------------------------------
struct CrowdingMultipliers {
    std::vector<std::string> bands;
    Eigen::VectorXd multipliers;     // (gamma_tt + gamma_band) / gamma_tt
    // diagnostic linear fit of multiplier against band density midpoints
    double slope = 0.0;
    double intercept = 0.0;
    double extrapolated_at = 0.0;    // density where the line is evaluated
    double extrapolated_value = 0.0;
};

CrowdingMultipliers crowding_multipliers(double gamma_tt,
                                         const Eigen::VectorXd& interaction_coefs,
                                         const std::vector<std::string>& band_names,
                                         const Eigen::VectorXd& band_midpoints,
                                         double extrapolate_at = 6.0);

}  // namespace dlcm
