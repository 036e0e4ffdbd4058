#include <doctest.h>

#include <cmath>
#include <random>

#include "dlcm/design.hpp"
#include "dlcm/model.hpp"
#include "dlcm/util.hpp"
#include "fixtures.hpp"

using namespace dlcm;

namespace {

CovariateSpec tt_spec() {
    CovariateSpec s;
    s.f_attrs = {"tt"};
    s.g_attrs = {"tt"};
    s.trans_mismatch = {"tt"};
    s.init_mismatch = {"tt"};
    return s;
}

Theta tt_theta() {
    Theta th;
    th.zeta0 = Eigen::VectorXd::Constant(1, 0.3);
    th.zeta0_c = Eigen::VectorXd::Constant(1, -0.2);
    th.zeta1 = Eigen::VectorXd::Constant(1, 0.5);
    th.zeta1_c = Eigen::VectorXd::Constant(1, -0.1);
    th.zeta2 = Eigen::VectorXd::Constant(1, -0.4);
    th.zeta2_c = Eigen::VectorXd::Constant(1, 0.2);
    th.gamma = Eigen::VectorXd::Constant(1, -1.1);
    th.varrho = Eigen::VectorXd::Constant(1, 0.8);
    th.psi = Eigen::VectorXd::Constant(1, 0.49);
    th.lambda1 = 0.9;
    th.lambda2 = 1.7;
    th.noncomp_extra = Eigen::VectorXd(0);
    return th;
}

// Minimal rider with hand-set matrices; no expectation machinery involved.
ProcessedRider hand_rider() {
    ProcessedRider r;
    r.rider_id = "hand";
    r.t_init = 3;
    r.t_model = 2;
    r.y0 = 1;
    r.y = {1, 2};
    r.def.resize(2, 1);
    r.def << 0.2, -0.4;
    r.ef1 = r.def;
    r.ef2 = Eigen::MatrixXd::Zero(2, 1);
    r.deg.resize(2, 0);
    r.eg1.resize(2, 0);
    r.eg2.resize(2, 0);
    r.trans_x.resize(2, 1);
    r.trans_x << 0.3, 0.7;
    r.init_z = Eigen::VectorXd::Constant(1, 0.4);
    r.noncomp_x.resize(2, 2);
    r.noncomp_x << 1.0, 0.0, 1.0, 0.0;
    r.sign.resize(2);
    r.sign << 1.0, -1.0;
    return r;
}

// Theta matching hand_rider's single-column blocks with no constants.
Theta hand_theta() {
    Theta th;
    th.zeta0 = Eigen::VectorXd::Constant(1, 1.0);
    th.zeta0_c = Eigen::VectorXd(0);
    th.zeta1 = Eigen::VectorXd::Constant(1, 0.5);
    th.zeta1_c = Eigen::VectorXd(0);
    th.zeta2 = Eigen::VectorXd::Constant(1, -0.6);
    th.zeta2_c = Eigen::VectorXd(0);
    th.gamma = Eigen::VectorXd::Constant(1, 1.0);
    th.varrho = Eigen::VectorXd(0);
    th.psi = Eigen::VectorXd(0);
    th.lambda1 = 0.9;
    th.lambda2 = 1.7;
    th.noncomp_extra = Eigen::VectorXd(0);
    return th;
}

}  // namespace

TEST_CASE("theta packing round-trips and validates dimensions") {
    const CovariateSpec s = tt_spec();
    CHECK(theta_dim(s) == 2 * 1 + 2 * 2 + 1 + 2 * 1 + 2);  // 11

    // benchmark-sized spec has 17 parameters
    CovariateSpec bench;
    bench.init_mismatch = {"z1", "z2"};
    bench.trans_mismatch = {"x1", "x2"};
    bench.f_attrs = {"f1", "f2"};
    bench.g_attrs = {"g1", "g2"};
    CHECK(theta_dim(bench) == 17);

    const Theta th = tt_theta();
    const Eigen::VectorXd v = pack_theta(th, s);
    REQUIRE(v.size() == theta_dim(s));
    const Theta back = unpack_theta(v, s);
    CHECK(back.zeta0[0] == th.zeta0[0]);
    CHECK(back.zeta1_c[0] == th.zeta1_c[0]);
    CHECK(back.gamma[0] == th.gamma[0]);
    CHECK(back.varrho[0] == th.varrho[0]);
    CHECK(back.psi[0] == th.psi[0]);
    CHECK(back.lambda1 == th.lambda1);
    CHECK(back.lambda2 == th.lambda2);
    const Eigen::VectorXd v2 = pack_theta(back, s);
    CHECK((v - v2).cwiseAbs().maxCoeff() == 0.0);

    Theta badsz = th;
    badsz.gamma = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_WITH_AS((void)pack_theta(badsz, s), doctest::Contains("gamma"), ConfigError);
    CHECK_THROWS_AS((void)unpack_theta(Eigen::VectorXd::Zero(4), s), ConfigError);
}

TEST_CASE("sigma_from_psi takes the square root of |psi|") {
    Eigen::VectorXd psi(3);
    psi << 4.0, 0.0, 2.25;
    const Eigen::VectorXd s = sigma_from_psi(psi);
    CHECK(s[0] == doctest::Approx(2.0));
    CHECK(s[1] == doctest::Approx(0.0));
    CHECK(s[2] == doctest::Approx(1.5));
    CHECK(sigma_from_psi(Eigen::VectorXd::Constant(1, -4.0))[0] == doctest::Approx(2.0));
}

TEST_CASE("initialisation kernel") {
    const ProcessedRider r = hand_rider();
    // k = 0.4 * 2.5 = 1 -> P(class 1) = logistic(1)
    const auto p = init_class_prob(r, Eigen::VectorXd::Constant(1, 2.5), Eigen::VectorXd(0));
    CHECK(p.first == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(p.first + p.second == doctest::Approx(1.0));
    CHECK_THROWS_AS(
        (void)init_class_prob(r, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1)),
        ConfigError);
}

TEST_CASE("transition kernel") {
    ProcessedRider r = hand_rider();
    r.trans_x.resize(2, 3);
    r.trans_x << 0.5, 0.5, 1.0, 0.0, 0.0, 1.0;
    Theta th = hand_theta();
    th.zeta1 = (Eigen::VectorXd(2) << 1.2, 1.1).finished();
    th.zeta1_c = Eigen::VectorXd::Constant(1, -1.5);
    th.zeta2 = (Eigen::VectorXd(2) << 0.3, -0.4).finished();
    th.zeta2_c = Eigen::VectorXd::Constant(1, 0.1);

    // m = 1.2*0.5 + 1.1*0.5 - 1.5 = -0.35
    const auto p = transition_prob(r, 1, 1, th);
    CHECK(p.first == doctest::Approx(logistic(-0.35)).epsilon(1e-12));
    CHECK(p.first == doctest::Approx(0.4134).epsilon(1e-4));
    CHECK(p.first + p.second == doctest::Approx(1.0));
    const auto q = transition_prob(r, 1, 2, th);
    CHECK(q.first == doctest::Approx(logistic(0.3 * 0.5 - 0.4 * 0.5 + 0.1)).epsilon(1e-12));

    CHECK_THROWS_AS((void)transition_prob(r, 1, 3, th), ConfigError);
    CHECK_THROWS_AS((void)transition_prob(r, 0, 1, th), ConfigError);
    CHECK_THROWS_AS((void)transition_prob(r, 2, 1, th), ConfigError);  // t <= T-1
}

TEST_CASE("compensatory choice kernel") {
    ProcessedRider r = hand_rider();
    // def row 1 = 0.2: gamma -1 -> utility -0.2; observed prob of route 1
    const auto p = comp_choice_prob(r, 1, Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd(0));
    CHECK(p.first == doctest::Approx(logistic(-0.2)).epsilon(1e-12));

    // expected-attribute difference 0.2 - 0.4 with gamma = -1: logistic(0.2)
    ProcessedRider r2 = hand_rider();
    r2.def(0, 0) = 0.2 - 0.4;
    const auto p2 =
        comp_choice_prob(r2, 1, Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd(0));
    CHECK(p2.first == doctest::Approx(0.549833997312478).epsilon(1e-12));

    // random block enters through chi
    ProcessedRider r3 = hand_rider();
    r3.deg.resize(2, 1);
    r3.deg << 0.3, 0.1;
    const auto p3 = comp_choice_prob(r3, 1, Eigen::VectorXd::Constant(1, -1.0),
                                     Eigen::VectorXd::Constant(1, 2.0));
    CHECK(p3.first == doctest::Approx(logistic(-0.2 + 0.6)).epsilon(1e-12));

    CHECK_THROWS_AS((void)comp_choice_prob(r, 0, Eigen::VectorXd::Zero(1), Eigen::VectorXd(0)),
                    ConfigError);
    CHECK_THROWS_AS((void)comp_choice_prob(r, 1, Eigen::VectorXd::Zero(2), Eigen::VectorXd(0)),
                    ConfigError);
}

TEST_CASE("non-compensatory kernel") {
    const Eigen::VectorXd none(0);
    CHECK(noncomp_choice_prob(1, 1.0, 2.0, none, none).first ==
          doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(noncomp_choice_prob(2, 1.0, 2.0, none, none).first ==
          doctest::Approx(0.11920292202211755).epsilon(1e-12));
    // lambda1 > 0 and lambda2 > 0 both push towards repeating the lag
    CHECK(noncomp_choice_prob(1, 1.0, 2.0, none, none).first > 0.5);
    CHECK(noncomp_choice_prob(2, 1.0, 2.0, none, none).second > 0.5);
    // extras shift the utility additively
    const auto p = noncomp_choice_prob(1, 1.0, 2.0, Eigen::VectorXd::Constant(1, 1.0),
                                       Eigen::VectorXd::Constant(1, 0.5));
    CHECK(p.first == doctest::Approx(logistic(1.5)).epsilon(1e-12));
    CHECK_THROWS_AS((void)noncomp_choice_prob(0, 1.0, 2.0, none, none), ConfigError);
    CHECK_THROWS_AS((void)noncomp_choice_prob(1, 1.0, 2.0, Eigen::VectorXd::Zero(1), none),
                    ConfigError);
}

TEST_CASE("simulated marginal mixed-logit probability") {
    ProcessedRider r = hand_rider();
    r.deg.resize(2, 1);
    r.deg << 0.3, 0.1;
    const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(1, 0.0);
    ProcessedRider rz = r;
    rz.def.setZero();

    SUBCASE("zero variance collapses to the conditional kernel at varrho") {
        Eigen::MatrixXd draws(4, 1);
        draws << 1.7, -0.3, 0.4, -1.7;
        const auto p = comp_choice_prob_marginal(rz, 1, gamma, Eigen::VectorXd::Constant(1, 0.5),
                                                 Eigen::VectorXd::Zero(1), draws);
        CHECK(p.first == doctest::Approx(logistic(0.3 * 0.5)).epsilon(1e-12));
    }
    SUBCASE("two-draw hand average") {
        Eigen::MatrixXd draws(2, 1);
        draws << 1.0, -1.0;
        const auto p = comp_choice_prob_marginal(rz, 1, gamma, Eigen::VectorXd::Constant(1, 0.5),
                                                 Eigen::VectorXd::Constant(1, 1.0), draws);
        const double expect = 0.5 * (logistic(0.3 * 1.5) + logistic(0.3 * -0.5));
        CHECK(p.first == doctest::Approx(expect).epsilon(1e-12));
        CHECK(p.first + p.second == doctest::Approx(1.0));
    }
    SUBCASE("draw order does not matter") {
        Eigen::MatrixXd draws(4, 1), shuffled(4, 1);
        draws << 1.7, -0.3, 0.4, -1.7;
        shuffled << -1.7, 0.4, 1.7, -0.3;
        const Eigen::VectorXd vr = Eigen::VectorXd::Constant(1, 0.5);
        const Eigen::VectorXd ps = Eigen::VectorXd::Constant(1, 0.8);
        const auto a = comp_choice_prob_marginal(rz, 1, gamma, vr, ps, draws);
        const auto b = comp_choice_prob_marginal(rz, 1, gamma, vr, ps, shuffled);
        CHECK(a.first == doctest::Approx(b.first).epsilon(1e-14));
    }
    SUBCASE("negative variance is treated as its magnitude") {
        Eigen::MatrixXd draws(2, 1);
        draws << 0.6, -0.6;
        const Eigen::VectorXd vr = Eigen::VectorXd::Constant(1, 0.5);
        const auto a =
            comp_choice_prob_marginal(rz, 1, gamma, vr, Eigen::VectorXd::Constant(1, 1.3), draws);
        const auto b = comp_choice_prob_marginal(rz, 1, gamma, vr,
                                                 Eigen::VectorXd::Constant(1, -1.3), draws);
        CHECK(a.first == doctest::Approx(b.first).epsilon(1e-15));
    }
    SUBCASE("probability is continuous at psi = 0") {
        const DrawSet ds = DrawSet::halton(1, 64, 1, 3);
        const Eigen::VectorXd vr = Eigen::VectorXd::Constant(1, 0.5);
        const double p0 =
            comp_choice_prob_marginal(rz, 1, gamma, vr, Eigen::VectorXd::Zero(1), ds.rider(0))
                .first;
        const double ph = comp_choice_prob_marginal(rz, 1, gamma, vr,
                                                    Eigen::VectorXd::Constant(1, 1e-8),
                                                    ds.rider(0))
                              .first;
        CHECK(std::abs(ph - p0) < 1e-6);
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS((void)comp_choice_prob_marginal(rz, 1, gamma, Eigen::VectorXd::Zero(1),
                                                        Eigen::VectorXd::Zero(1),
                                                        Eigen::MatrixXd(0, 1)),
                        ConfigError);
        CHECK_THROWS_AS((void)comp_choice_prob_marginal(rz, 1, gamma, Eigen::VectorXd::Zero(2),
                                                        Eigen::VectorXd::Zero(2),
                                                        Eigen::MatrixXd::Zero(2, 1)),
                        ConfigError);
    }
}

TEST_CASE("emission probabilities compose the class kernels") {
    ProcessedRider r = hand_rider();
    const Theta th = hand_theta();
    const Eigen::MatrixXd draws = Eigen::MatrixXd::Zero(2, 0);

    // class 1, t=1: y=1, util = 0.2 -> logistic(0.2)
    CHECK(emission_prob(r, 1, 1, th, draws) == doctest::Approx(logistic(0.2)).epsilon(1e-12));
    // class 1, t=2: y=2, util = -0.4 -> P(2) = logistic(0.4)
    CHECK(emission_prob(r, 2, 1, th, draws) == doctest::Approx(logistic(0.4)).epsilon(1e-12));
    // class 2, t=1: lag = y0 = 1, y=1 -> logistic(lambda1)
    CHECK(emission_prob(r, 1, 2, th, draws) == doctest::Approx(logistic(0.9)).epsilon(1e-12));
    // class 2, t=2: lag = y_1 = 1, y=2 -> 1 - logistic(lambda1)
    CHECK(emission_prob(r, 2, 2, th, draws) == doctest::Approx(logistic(-0.9)).epsilon(1e-12));

    // lag-2 branch: flip the first modelling choice
    ProcessedRider r2 = r;
    r2.y0 = 2;
    r2.noncomp_x(0, 0) = 0.0;
    r2.noncomp_x(0, 1) = -1.0;
    CHECK(emission_prob(r2, 1, 2, th, draws) ==
          doctest::Approx(logistic(-1.7)).epsilon(1e-12));

    CHECK_THROWS_AS((void)emission_prob(r, 1, 3, th, draws), ConfigError);
    CHECK_THROWS_AS((void)emission_prob(r, 3, 1, th, draws), ConfigError);
}

TEST_CASE("batched kernels agree with the scalar reference path") {
    const RiderRecord raw = fixtures::make_rider("w", {1, 2, 1, 1, 2, 2});
    const CovariateSpec s = tt_spec();
    const ProcessedRider pr = build_design(raw, {"tt"}, s, ExpectationConfig{}, SplitOptions{});
    const Theta th = tt_theta();
    const DrawSet ds = DrawSet::halton(1, 8, 1, 5);
    const auto& dr = ds.rider(0);

    const RiderKernels k = rider_kernels(pr, th, dr);
    REQUIRE(k.emis.rows() == pr.t_model);
    REQUIRE(k.ptrans1.rows() == pr.t_model - 1);

    CHECK(k.init1 ==
          doctest::Approx(init_class_prob(pr, th.zeta0, th.zeta0_c).first).epsilon(1e-12));
    for (int t = 1; t <= pr.t_model; ++t) {
        CHECK(k.emis(t - 1, 0) == doctest::Approx(emission_prob(pr, t, 1, th, dr)).epsilon(1e-12));
        CHECK(k.emis(t - 1, 1) == doctest::Approx(emission_prob(pr, t, 2, th, dr)).epsilon(1e-12));
    }
    for (int t = 1; t <= pr.t_model - 1; ++t) {
        CHECK(k.ptrans1(t - 1, 0) ==
              doctest::Approx(transition_prob(pr, t, 1, th).first).epsilon(1e-12));
        CHECK(k.ptrans1(t - 1, 1) ==
              doctest::Approx(transition_prob(pr, t, 2, th).first).epsilon(1e-12));
    }

    // vector wrapper: draw set must cover all riders
    const std::vector<ProcessedRider> data = {pr, pr};
    CHECK_THROWS_AS((void)all_kernels(data, th, DrawSet::halton(1, 8, 1, 5)), ConfigError);
    const auto ks = all_kernels(data, th, DrawSet::halton(2, 8, 1, 5));
    REQUIRE(ks.size() == 2);
    CHECK(ks[0].init1 == doctest::Approx(k.init1).epsilon(1e-14));
}

TEST_CASE("conditional loglik matches direct enumeration on tiny riders") {
    const Theta th = hand_theta();

    SUBCASE("single modelling occasion") {
        ProcessedRider r = hand_rider();
        r.t_model = 1;
        r.y = {1};
        r.def = r.def.topRows(1).eval();
        r.deg.resize(1, 0);
        r.trans_x = r.trans_x.topRows(1).eval();
        r.noncomp_x = r.noncomp_x.topRows(1).eval();
        r.sign = r.sign.head(1).eval();
        const double p1 = logistic(0.4);  // init kernel
        const double e1c1 = logistic(0.2);
        const double e1c2 = logistic(0.9);
        const double expect = std::log(p1 * e1c1 + (1.0 - p1) * e1c2);
        const double got = conditional_loglik({r}, th, DrawSet::halton(1, 2, 0, 7));
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("two occasions, four class paths") {
        const ProcessedRider r = hand_rider();
        const double p1 = logistic(0.4);
        const double p11 = logistic(0.5 * 0.3);
        const double p21 = logistic(-0.6 * 0.3);
        const double e1c1 = logistic(0.2), e2c1 = logistic(0.4);
        const double e1c2 = logistic(0.9), e2c2 = logistic(-0.9);
        const double expect =
            std::log(p1 * e1c1 * (p11 * e2c1 + (1 - p11) * e2c2) +
                     (1 - p1) * e1c2 * (p21 * e2c1 + (1 - p21) * e2c2));
        const double got = conditional_loglik({r}, th, DrawSet::halton(1, 2, 0, 7));
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("loglik is additive over riders") {
        const ProcessedRider r = hand_rider();
        const double one = conditional_loglik({r}, th, DrawSet::halton(1, 2, 0, 7));
        const double two = conditional_loglik({r, r}, th, DrawSet::halton(2, 2, 0, 7));
        CHECK(two == doctest::Approx(2.0 * one).epsilon(1e-12));
    }
}

TEST_CASE("crowding multipliers reproduce the reference table") {
    Eigen::VectorXd coefs(4);
    coefs << -0.29, -0.44, -0.79, -0.97;
    Eigen::VectorXd mids(4);
    mids << 1.25, 1.75, 2.25, 2.75;
    const std::vector<std::string> names = {"b1", "b2", "b3", "b4"};
    const CrowdingMultipliers m = crowding_multipliers(-5.0, coefs, names, mids);
    REQUIRE(m.multipliers.size() == 4);
    CHECK(std::round(m.multipliers[0] * 100.0) / 100.0 == doctest::Approx(1.06));
    CHECK(std::round(m.multipliers[1] * 100.0) / 100.0 == doctest::Approx(1.09));
    CHECK(std::round(m.multipliers[2] * 100.0) / 100.0 == doctest::Approx(1.16));
    CHECK(std::round(m.multipliers[3] * 100.0) / 100.0 == doctest::Approx(1.19));
    // multipliers rise with density; the fitted line extrapolates beyond the bands
    CHECK(m.slope > 0.0);
    CHECK(m.extrapolated_at == doctest::Approx(6.0));
    CHECK(m.extrapolated_value == doctest::Approx(m.intercept + 6.0 * m.slope));
    CHECK(m.extrapolated_value > m.multipliers[3]);

    // zero interactions give unit multipliers and a flat line
    const CrowdingMultipliers flat =
        crowding_multipliers(-5.0, Eigen::VectorXd::Zero(4), names, mids);
    CHECK((flat.multipliers.array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(flat.slope == doctest::Approx(0.0));

    CHECK_THROWS_AS((void)crowding_multipliers(0.0, coefs, names, mids), NumericError);
    CHECK_THROWS_AS(
        (void)crowding_multipliers(-5.0, coefs, {"a", "b"}, mids), ConfigError);
}
