#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dlcm {

// ---------------------------------------------------------------------------
// Raw panel data
// ---------------------------------------------------------------------------

struct TripRecord {
    int occasion = 0;        // 1-based position in the rider's sequence
    int chosen_route = 0;    // 1 or 2
    std::string od;          // origin-destination label ("" when the panel has none)
    Eigen::VectorXd attributes;  // experienced attributes, order = PanelDataset::attribute_names
};

struct RiderRecord {
    std::string rider_id;
    std::string od_pair;     // modal OD after screening ("" before)
    std::vector<TripRecord> trips;  // ordered by occasion
};

struct PanelDataset {
    std::vector<std::string> attribute_names;
    std::vector<RiderRecord> riders;
};

struct ScreeningReport {
    long n_input = 0;
    long n_after_min_choices = 0;
    long n_after_od = 0;
    long n_after_route_mix = 0;
    long n_after_tinit = 0;   // final survivor count
    // reason -> rider count removed for that reason
    std::map<std::string, long> removals;
    // distribution summaries over survivors
    struct Quantiles {
        double min = 0, p25 = 0, median = 0, p75 = 0, max = 0, mean = 0;
    };
    Quantiles total_occasions;   // T_I + T
    Quantiles model_occasions;   // T
};

// ---------------------------------------------------------------------------
// Estimation-ready rider
//
// The time clock is shifted: modelling occasion t = 1..T corresponds to the
// rider's original occasion T_I + t. All expectations are built once from the
// raw sequence for a given (mu, memory) setting.
// ---------------------------------------------------------------------------
struct ProcessedRider {
    std::string rider_id;
    int t_init = 0;  // T_I
    int t_model = 0; // T
    int y0 = 0;      // choice at original occasion T_I (lag for modelling t = 1)
    std::vector<int> y;  // modelling-phase choices, length T, values in {1,2}

    // Compensatory choice model: expected attributes per route (T x nF, T x nG)
    // and their route-1 minus route-2 differences.
    Eigen::MatrixXd ef1, ef2, eg1, eg2;
    Eigen::MatrixXd def;  // T x nF (includes the route-1 constant column when configured)
    Eigen::MatrixXd deg;  // T x nG

    // Transition covariates [X_diff block, Xc block]; row t used for the
    // transition from class at t to class at t+1 (rows 1..T-1 enter the fit).
    Eigen::MatrixXd trans_x;  // T x (nX + nXc)

    // Initialisation covariates [Z_diff block, Zc block] at original occasion T_I.
    Eigen::VectorXd init_z;   // nZ + nZc

    // Non-compensatory covariates: [1(lag=1), -1(lag=2), extras...] per t.
    Eigen::MatrixXd noncomp_x;  // T x (2 + nNc)

    // +1 where y_t = 1, -1 where y_t = 2 (sign flips for binary logit kernels).
    Eigen::VectorXd sign;  // T
};

// ---------------------------------------------------------------------------
// Parameters
//
// psi holds the variances of the random coefficients (diagonal mixing
// covariance); optimisation runs internally on unconstrained standard
// deviations, and all public reporting uses psi.
// ---------------------------------------------------------------------------
struct Theta {
    Eigen::VectorXd zeta0, zeta0_c;  // initialisation: mismatch block, history/const block
    Eigen::VectorXd zeta1, zeta1_c;  // transition from class 1
    Eigen::VectorXd zeta2, zeta2_c;  // transition from class 2
    Eigen::VectorXd gamma;           // fixed choice coefficients
    Eigen::VectorXd varrho;          // means of random choice coefficients
    Eigen::VectorXd psi;             // variances of random choice coefficients
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    Eigen::VectorXd noncomp_extra;   // optional constant/history coefficients

    int size() const {
        return static_cast<int>(zeta0.size() + zeta0_c.size() + zeta1.size() + zeta1_c.size() +
                                zeta2.size() + zeta2_c.size() + gamma.size() + varrho.size() +
                                psi.size() + 2 + noncomp_extra.size());
    }
};

// Which attribute columns and history covariates feed each kernel.
struct CovariateSpec {
    std::vector<std::string> f_attrs;         // fixed-coefficient choice attributes
    std::vector<std::string> g_attrs;         // random-coefficient choice attributes
    std::vector<std::string> trans_mismatch;  // attributes in the transition mismatch
    std::vector<std::string> init_mismatch;   // attributes in the initialisation mismatch
    std::vector<std::string> trans_history;   // history covariates in Xc
    std::vector<std::string> init_history;    // history covariates in Zc
    std::vector<std::string> noncomp_history; // extra non-compensatory covariates
    bool trans_const = true;   // constant appended to Xc
    bool init_const = true;    // constant appended to Zc
    bool choice_asc = false;   // route-1 constant appended to F
    bool noncomp_const = false;

    int n_f() const { return static_cast<int>(f_attrs.size()) + (choice_asc ? 1 : 0); }
    int n_g() const { return static_cast<int>(g_attrs.size()); }
    int n_trans_x() const { return static_cast<int>(trans_mismatch.size()); }
    int n_trans_c() const { return static_cast<int>(trans_history.size()) + (trans_const ? 1 : 0); }
    int n_init_z() const { return static_cast<int>(init_mismatch.size()); }
    int n_init_c() const { return static_cast<int>(init_history.size()) + (init_const ? 1 : 0); }
    int n_noncomp_extra() const {
        return static_cast<int>(noncomp_history.size()) + (noncomp_const ? 1 : 0);
    }
};

// ---------------------------------------------------------------------------
// E-step output
// ---------------------------------------------------------------------------
struct Posteriors {
    // pi[i]: T x 2 smoothed class probabilities.
    std::vector<Eigen::MatrixXd> pi;
    // omega[i]: (T-1) x 4 pairwise probabilities for the transition into
    // t = 2..T, columns ordered (from,to) = (1,1), (1,2), (2,1), (2,2).
    std::vector<Eigen::MatrixXd> omega;
    double loglik = 0.0;
    // Largest deviation from the marginalisation identities seen in this E-step.
    double max_identity_violation = 0.0;
};

// ---------------------------------------------------------------------------
// Estimation output
// ---------------------------------------------------------------------------
struct EstimationResult {
    Theta theta;
    std::vector<std::string> param_names;
    Eigen::VectorXd estimates;   // packed parameter vector (variance parameterisation)
    Eigen::VectorXd std_errors;
    Eigen::VectorXd z_values;
    Eigen::VectorXd gradient;    // conditional loglik gradient at convergence
    std::vector<double> loglik_trace;
    double final_loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    bool hessian_pd = true;      // false => std errors unreliable
    double hessian_rcond = 0.0;
    double mu = 0.0;
    std::uint64_t seed = 0;
    double max_posterior_violation = 0.0;  // across all E-steps of the kept run
    double wall_seconds = 0.0;
    int n_riders = 0;
    long n_obs = 0;
};

struct DecodedSequence {
    std::string rider_id;
    std::vector<int> classes;  // length T, values in {1,2}
    double log_joint = 0.0;
    std::vector<int> marginal_classes;  // diagnostic: per-occasion argmax of pi
};

struct ClassShareReport {
    double overall_class1 = 0.0;    // fraction of occasions decoded compensatory
    // bands over total occasions (T_I + T): [0,10), [10,20], (20, inf)
    double band_low = 0.0, band_mid = 0.0, band_high = 0.0;
    long n_low = 0, n_mid = 0, n_high = 0;  // riders per band
    long n_occasions = 0;
    bool empty = true;
};

struct BaselineResult {
    std::string kind;  // "mnl" or "lcmnl"
    std::vector<std::string> param_names;
    Eigen::VectorXd estimates;
    Eigen::VectorXd std_errors;
    Eigen::VectorXd z_values;
    double loglik = 0.0;
    long n_obs = 0;
    int n_riders = 0;
    bool converged = false;
    bool separation_flag = false;  // |coefficient| > 50
    bool degenerate_class = false; // LC-MNL: a class share below 1e-4
    double class1_share = 0.0;     // LC-MNL only
};

}  // namespace dlcm
