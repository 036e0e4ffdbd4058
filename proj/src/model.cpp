#include "dlcm/model.hpp"

#include <cmath>

#include "dlcm/util.hpp"

namespace dlcm {

int theta_dim(const CovariateSpec& spec) {
    return spec.n_init_z() + spec.n_init_c() + 2 * (spec.n_trans_x() + spec.n_trans_c()) +
           spec.n_f() + 2 * spec.n_g() + 2 + spec.n_noncomp_extra();
}

Eigen::VectorXd pack_theta(const Theta& th, const CovariateSpec& spec) {
    Eigen::VectorXd v(theta_dim(spec));
    long pos = 0;
    auto put = [&](const Eigen::VectorXd& x, int expect, const char* what) {
        if (x.size() != expect)
            throw ConfigError(std::string("pack_theta: ") + what + " has dimension " +
                              std::to_string(x.size()) + ", expected " + std::to_string(expect));
        v.segment(pos, x.size()) = x;
        pos += x.size();
    };
    put(th.zeta0, spec.n_init_z(), "zeta0");
    put(th.zeta0_c, spec.n_init_c(), "zeta0_c");
    put(th.zeta1, spec.n_trans_x(), "zeta1");
    put(th.zeta1_c, spec.n_trans_c(), "zeta1_c");
    put(th.zeta2, spec.n_trans_x(), "zeta2");
    put(th.zeta2_c, spec.n_trans_c(), "zeta2_c");
    put(th.gamma, spec.n_f(), "gamma");
    put(th.varrho, spec.n_g(), "varrho");
    put(th.psi, spec.n_g(), "psi");
    v[pos++] = th.lambda1;
    v[pos++] = th.lambda2;
    put(th.noncomp_extra, spec.n_noncomp_extra(), "noncomp_extra");
    return v;
}

Theta unpack_theta(const Eigen::VectorXd& v, const CovariateSpec& spec) {
    if (v.size() != theta_dim(spec))
        throw ConfigError("unpack_theta: vector has dimension " + std::to_string(v.size()) +
                          ", expected " + std::to_string(theta_dim(spec)));
    Theta th;
    long pos = 0;
    auto take = [&](int n) {
        Eigen::VectorXd x = v.segment(pos, n);
        pos += n;
        return x;
    };
    th.zeta0 = take(spec.n_init_z());
    th.zeta0_c = take(spec.n_init_c());
    th.zeta1 = take(spec.n_trans_x());
    th.zeta1_c = take(spec.n_trans_c());
    th.zeta2 = take(spec.n_trans_x());
    th.zeta2_c = take(spec.n_trans_c());
    th.gamma = take(spec.n_f());
    th.varrho = take(spec.n_g());
    th.psi = take(spec.n_g());
    th.lambda1 = v[pos++];
    th.lambda2 = v[pos++];
    th.noncomp_extra = take(spec.n_noncomp_extra());
    return th;
}

Eigen::VectorXd sigma_from_psi(const Eigen::VectorXd& psi) {
    return psi.array().abs().sqrt();
}

namespace {

Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out(a.size() + b.size());
    out.head(a.size()) = a;
    out.tail(b.size()) = b;
    return out;
}

void check_prob_pair(double p, const char* what) {
    if (!std::isfinite(p)) throw NumericError(std::string(what) + ": non-finite probability");
}

}  // namespace

std::pair<double, double> init_class_prob(const ProcessedRider& rider,
                                          const Eigen::VectorXd& zeta0,
                                          const Eigen::VectorXd& zeta0_c) {
    if (zeta0.size() + zeta0_c.size() != rider.init_z.size())
        throw ConfigError("init_class_prob: coefficient/covariate dimension mismatch");
    const double k = rider.init_z.dot(concat(zeta0, zeta0_c));
    const double p1 = logistic(k);
    check_prob_pair(p1, "init_class_prob");
    return {p1, 1.0 - p1};
}

std::pair<double, double> transition_prob(const ProcessedRider& rider, int t, int from_class,
                                          const Theta& theta) {
    if (from_class != 1 && from_class != 2)
        throw ConfigError("transition_prob: from_class must be 1 or 2");
    if (t < 1 || t > rider.t_model - 1)
        throw ConfigError("transition_prob: t must lie in 1..T-1");
    const Eigen::VectorXd coef = from_class == 1 ? concat(theta.zeta1, theta.zeta1_c)
                                                 : concat(theta.zeta2, theta.zeta2_c);
    if (coef.size() != rider.trans_x.cols())
        throw ConfigError("transition_prob: coefficient/covariate dimension mismatch");
    const double m = rider.trans_x.row(t - 1).dot(coef);
    const double p1 = logistic(m);
    check_prob_pair(p1, "transition_prob");
    return {p1, 1.0 - p1};
}

std::pair<double, double> comp_choice_prob(const ProcessedRider& rider, int t,
                                           const Eigen::VectorXd& gamma,
                                           const Eigen::VectorXd& chi) {
    if (t < 1 || t > rider.t_model) throw ConfigError("comp_choice_prob: t outside 1..T");
    if (gamma.size() != rider.def.cols() || chi.size() != rider.deg.cols())
        throw ConfigError("comp_choice_prob: coefficient/covariate dimension mismatch");
    const double dv = rider.def.row(t - 1).dot(gamma) + rider.deg.row(t - 1).dot(chi);
    if (!std::isfinite(dv)) throw NumericError("comp_choice_prob: non-finite utility");
    const double p1 = logistic(dv);
    return {p1, 1.0 - p1};
}

std::pair<double, double> comp_choice_prob_marginal(const ProcessedRider& rider, int t,
                                                    const Eigen::VectorXd& gamma,
                                                    const Eigen::VectorXd& varrho,
                                                    const Eigen::VectorXd& psi,
                                                    const Eigen::MatrixXd& rider_draws) {
    if (rider_draws.rows() == 0) throw ConfigError("comp_choice_prob_marginal: empty draw set");
    if (rider_draws.cols() != varrho.size() || psi.size() != varrho.size())
        throw ConfigError("comp_choice_prob_marginal: draw/coefficient dimension mismatch");
    const Eigen::VectorXd sigma = sigma_from_psi(psi);
    double acc = 0.0;
    for (long r = 0; r < rider_draws.rows(); ++r) {
        const Eigen::VectorXd chi =
            varrho + (sigma.array() * rider_draws.row(r).transpose().array()).matrix();
        acc += comp_choice_prob(rider, t, gamma, chi).first;
    }
    const double p1 = acc / static_cast<double>(rider_draws.rows());
    return {p1, 1.0 - p1};
}

std::pair<double, double> noncomp_choice_prob(int lagged_choice, double lambda1, double lambda2,
                                              const Eigen::VectorXd& extra_x,
                                              const Eigen::VectorXd& extra_coef) {
    if (lagged_choice != 1 && lagged_choice != 2)
        throw ConfigError("noncomp_choice_prob: lagged choice must be 1 or 2");
    if (extra_x.size() != extra_coef.size())
        throw ConfigError("noncomp_choice_prob: extra covariate dimension mismatch");
    double v = lagged_choice == 1 ? lambda1 : -lambda2;
    if (extra_x.size() > 0) v += extra_x.dot(extra_coef);
    const double p1 = logistic(v);
    check_prob_pair(p1, "noncomp_choice_prob");
    return {p1, 1.0 - p1};
}

double emission_prob(const ProcessedRider& rider, int t, int cls, const Theta& theta,
                     const Eigen::MatrixXd& rider_draws) {
    if (cls != 1 && cls != 2) throw ConfigError("emission_prob: class must be 1 or 2");
    if (t < 1 || t > rider.t_model) throw ConfigError("emission_prob: t outside 1..T");
    const int y = rider.y[static_cast<std::size_t>(t - 1)];
    if (cls == 1) {
        const auto p = comp_choice_prob_marginal(rider, t, theta.gamma, theta.varrho, theta.psi,
                                                 rider_draws);
        return y == 1 ? p.first : p.second;
    }
    const int lag = t == 1 ? rider.y0 : rider.y[static_cast<std::size_t>(t - 2)];
    Eigen::VectorXd extra_x;
    if (theta.noncomp_extra.size() > 0)
        extra_x = rider.noncomp_x.row(t - 1).tail(theta.noncomp_extra.size()).transpose();
    const auto p =
        noncomp_choice_prob(lag, theta.lambda1, theta.lambda2, extra_x, theta.noncomp_extra);
    return y == 1 ? p.first : p.second;
}

RiderKernels rider_kernels(const ProcessedRider& rider, const Theta& theta,
                           const Eigen::MatrixXd& rider_draws) {
    const int T = rider.t_model;
    const long R = rider_draws.rows();
    if (R == 0) throw ConfigError("rider_kernels: empty draw set");
    RiderKernels k;
    k.emis.resize(T, 2);
    k.ptrans1.resize(std::max(0, T - 1), 2);

    // class 1 emissions: signed utilities over all draws, vectorised
    const Eigen::VectorXd sigma = sigma_from_psi(theta.psi);
    // chi' = (nG x R): varrho + sigma .* draw
    const Eigen::MatrixXd chiT =
        (rider_draws * sigma.asDiagonal()).transpose().colwise() + theta.varrho;
    Eigen::MatrixXd util = rider.deg * chiT;  // T x R
    util.colwise() += (rider.def * theta.gamma).eval();
    // observed-choice probability per draw
    Eigen::ArrayXXd p =
        1.0 / (1.0 + (-(util.array().colwise() * rider.sign.array())).exp());
    k.emis.col(0) = p.rowwise().mean();

    // class 2 emissions
    const Eigen::VectorXd lam =
        (Eigen::VectorXd(2) << theta.lambda1, theta.lambda2).finished();
    Eigen::VectorXd vn = rider.noncomp_x.leftCols(2) * lam;
    if (theta.noncomp_extra.size() > 0)
        vn += rider.noncomp_x.rightCols(theta.noncomp_extra.size()) * theta.noncomp_extra;
    k.emis.col(1) =
        (1.0 / (1.0 + (-(vn.array() * rider.sign.array())).exp())).matrix();

    // initialisation
    const Eigen::VectorXd z0 = concat(theta.zeta0, theta.zeta0_c);
    if (z0.size() != rider.init_z.size())
        throw ConfigError("rider_kernels: initialisation dimension mismatch");
    k.init1 = logistic(rider.init_z.dot(z0));

    // transitions (rows 1..T-1)
    if (T > 1) {
        const Eigen::VectorXd c1 = concat(theta.zeta1, theta.zeta1_c);
        const Eigen::VectorXd c2 = concat(theta.zeta2, theta.zeta2_c);
        if (c1.size() != rider.trans_x.cols())
            throw ConfigError("rider_kernels: transition dimension mismatch");
        const auto xt = rider.trans_x.topRows(T - 1);
        k.ptrans1.col(0) = (1.0 / (1.0 + (-(xt * c1).array()).exp())).matrix();
        k.ptrans1.col(1) = (1.0 / (1.0 + (-(xt * c2).array()).exp())).matrix();
    }

    if (!k.emis.allFinite() || !k.ptrans1.allFinite() || !std::isfinite(k.init1))
        throw NumericError("rider_kernels: non-finite kernel for rider " + rider.rider_id);
    return k;
}

std::vector<RiderKernels> all_kernels(const std::vector<ProcessedRider>& data,
                                      const Theta& theta, const DrawSet& draws) {
    if (draws.draws.size() < data.size())
        throw ConfigError("all_kernels: draw set smaller than rider count");
    std::vector<RiderKernels> out(data.size());
    parallel_for(data.size(), worker_threads(),
                 [&](std::size_t i) { out[i] = rider_kernels(data[i], theta, draws.rider(i)); });
    return out;
}

CrowdingMultipliers crowding_multipliers(double gamma_tt,
                                         const Eigen::VectorXd& interaction_coefs,
                                         const std::vector<std::string>& band_names,
                                         const Eigen::VectorXd& band_midpoints,
                                         double extrapolate_at) {
    if (gamma_tt == 0.0)
        throw NumericError("crowding_multipliers: base travel-time coefficient is zero");
    if (static_cast<std::size_t>(interaction_coefs.size()) != band_names.size() ||
        interaction_coefs.size() != band_midpoints.size())
        throw ConfigError("crowding_multipliers: bands/coefficients dimension mismatch");
    CrowdingMultipliers out;
    out.bands = band_names;
    out.multipliers =
        (interaction_coefs.array() + gamma_tt).matrix() / gamma_tt;
    // least-squares line through (midpoint, multiplier), plus the base point
    // (0, 1): multiplier = intercept + slope * density
    const long n = interaction_coefs.size() + 1;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd yv(n);
    X(0, 0) = 1.0;
    X(0, 1) = 0.0;
    yv(0) = 1.0;
    for (long k = 1; k < n; ++k) {
        X(k, 0) = 1.0;
        X(k, 1) = band_midpoints[k - 1];
        yv(k) = out.multipliers[k - 1];
    }
    const Eigen::Vector2d beta = (X.transpose() * X).ldlt().solve(X.transpose() * yv);
    out.intercept = beta[0];
    out.slope = beta[1];
    out.extrapolated_at = extrapolate_at;
    out.extrapolated_value = beta[0] + beta[1] * extrapolate_at;
    return out;
}

}  // namespace dlcm
