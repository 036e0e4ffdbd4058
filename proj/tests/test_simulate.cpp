#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dlcm/design.hpp"
#include "dlcm/model.hpp"
#include "dlcm/simulate.hpp"
#include "dlcm/util.hpp"

using namespace dlcm;

namespace {

DGPConfig benchmark_dgp(int n, std::uint64_t seed) {
    DGPConfig d;
    d.n_riders = n;
    d.seed = seed;
    d.true_theta = Config::default_true_theta();
    return d;
}

std::vector<ProcessedRider> process(const SimulatedPanel& sim, const CovariateSpec& spec,
                                    const DGPConfig& dgp) {
    ExpectationConfig e;
    e.mu = dgp.mu;
    e.memory = dgp.memory;
    return build_designs(sim.panel, spec, e, SplitOptions{"fixed", dgp.t_init});
}

}  // namespace

TEST_CASE("simulated panel has the advertised shape") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig dgp = benchmark_dgp(7, 3);
    dgp.t_init = 4;
    dgp.t_model = 5;
    const SimulatedPanel sim = simulate_panel(dgp, spec);

    CHECK(sim.panel.riders.size() == 7);
    CHECK(sim.true_classes.size() == 7);
    CHECK(sim.chi.rows() == 7);
    CHECK(sim.chi.cols() == 2);
    CHECK(sim.t_init == 4);
    CHECK(sim.t_model == 5);
    // unmasked: chosen-route block plus an _alt block for the other route
    CHECK(sim.panel.attribute_names.size() == 16);
    CHECK(sim.panel.attribute_names[0] == "x1");
    CHECK(sim.panel.attribute_names[8] == "x1_alt");
    for (const auto& r : sim.panel.riders) {
        CHECK(r.trips.size() == 9);
        for (std::size_t t = 0; t < r.trips.size(); ++t) {
            CHECK(r.trips[t].occasion == static_cast<int>(t) + 1);
            CHECK((r.trips[t].chosen_route == 1 || r.trips[t].chosen_route == 2));
            CHECK(r.trips[t].attributes.size() == 16);
        }
    }
    CHECK(sim.panel.riders[0].rider_id == "r0001");
    for (const auto& s : sim.true_classes) {
        CHECK(s.size() == 5);
        for (int c : s) CHECK((c == 1 || c == 2));
    }
}

TEST_CASE("every initialisation phase satisfies the split validity condition") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig dgp = benchmark_dgp(200, 13);
    dgp.t_init = 5;
    dgp.t_model = 4;
    const SimulatedPanel sim = simulate_panel(dgp, spec);
    for (const auto& r : sim.panel.riders) {
        bool seen1 = false, seen2 = false, seen_last = false;
        const int last = r.trips[dgp.t_init - 1].chosen_route;
        for (int t = 0; t < dgp.t_init; ++t) {
            (r.trips[t].chosen_route == 1 ? seen1 : seen2) = true;
            if (t < dgp.t_init - 1 && r.trips[t].chosen_route == last) seen_last = true;
        }
        CHECK(seen1);
        CHECK(seen2);
        CHECK(seen_last);
    }
    // consequently the fixed split processes every rider
    CHECK(process(sim, spec, dgp).size() == 200);
}

TEST_CASE("identical configurations reproduce the panel bit for bit") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig dgp = benchmark_dgp(25, 99);
    dgp.t_init = 4;
    dgp.t_model = 6;
    const SimulatedPanel a = simulate_panel(dgp, spec);
    const SimulatedPanel b = simulate_panel(dgp, spec);
    CHECK((a.chi - b.chi).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < a.panel.riders.size(); ++i) {
        CHECK(a.true_classes[i] == b.true_classes[i]);
        for (std::size_t t = 0; t < a.panel.riders[i].trips.size(); ++t) {
            const auto& ta = a.panel.riders[i].trips[t];
            const auto& tb = b.panel.riders[i].trips[t];
            CHECK(ta.chosen_route == tb.chosen_route);
            CHECK((ta.attributes - tb.attributes).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    DGPConfig other = dgp;
    other.seed = 100;
    const SimulatedPanel c = simulate_panel(other, spec);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.panel.riders.size() && !any_diff; ++i)
        for (std::size_t t = 0; t < a.panel.riders[i].trips.size() && !any_diff; ++t)
            any_diff = a.panel.riders[i].trips[t].chosen_route !=
                       c.panel.riders[i].trips[t].chosen_route;
    CHECK(any_diff);
}

TEST_CASE("rider draws are independent of the population size") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig small = benchmark_dgp(3, 7);
    small.t_init = 4;
    small.t_model = 4;
    DGPConfig big = small;
    big.n_riders = 10;
    const SimulatedPanel a = simulate_panel(small, spec);
    const SimulatedPanel b = simulate_panel(big, spec);
    for (int i = 0; i < 3; ++i) {
        CHECK(a.true_classes[i] == b.true_classes[i]);
        for (std::size_t t = 0; t < a.panel.riders[i].trips.size(); ++t)
            CHECK((a.panel.riders[i].trips[t].attributes -
                   b.panel.riders[i].trips[t].attributes)
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
    }
}

TEST_CASE("attribute and taste moments match the generating distributions") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig dgp = benchmark_dgp(1500, 21);
    dgp.t_init = 4;
    dgp.t_model = 4;
    const SimulatedPanel sim = simulate_panel(dgp, spec);

    double sum = 0.0, sq = 0.0;
    long n = 0;
    for (const auto& r : sim.panel.riders)
        for (const auto& t : r.trips)
            for (long a = 0; a < t.attributes.size(); ++a) {
                sum += t.attributes[a];
                sq += t.attributes[a] * t.attributes[a];
                ++n;
            }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(mean == doctest::Approx(dgp.attr_mean).epsilon(0.01));
    CHECK(sd == doctest::Approx(dgp.attr_sd).epsilon(0.03));

    // chi ~ Normal(varrho, diag(psi))
    for (int k = 0; k < 2; ++k) {
        const double m = sim.chi.col(k).mean();
        const double v = (sim.chi.col(k).array() - m).square().mean();
        CHECK(m == doctest::Approx(dgp.true_theta.varrho[k]).epsilon(0.08));
        CHECK(std::sqrt(v) ==
              doctest::Approx(std::sqrt(dgp.true_theta.psi[k])).epsilon(0.08));
    }
}

TEST_CASE("masking drops the unchosen route but leaves the design unchanged") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig open = benchmark_dgp(40, 31);
    open.t_init = 5;
    open.t_model = 6;
    DGPConfig masked = open;
    masked.mask_unchosen = true;

    const SimulatedPanel a = simulate_panel(open, spec);
    const SimulatedPanel b = simulate_panel(masked, spec);
    CHECK(a.panel.attribute_names.size() == 16);
    CHECK(b.panel.attribute_names.size() == 8);
    for (std::size_t i = 0; i < a.panel.riders.size(); ++i)
        for (std::size_t t = 0; t < a.panel.riders[i].trips.size(); ++t) {
            CHECK(a.panel.riders[i].trips[t].chosen_route ==
                  b.panel.riders[i].trips[t].chosen_route);
            // the chosen-route block agrees; only the _alt block is dropped
            CHECK((a.panel.riders[i].trips[t].attributes.head(8) -
                   b.panel.riders[i].trips[t].attributes)
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        }

    // the likelihood design depends on experienced attributes only
    const auto da = process(a, spec, open);
    const auto db = process(b, spec, masked);
    REQUIRE(da.size() == db.size());
    for (std::size_t i = 0; i < da.size(); ++i) {
        CHECK(da[i].y == db[i].y);
        CHECK((da[i].def - db[i].def).cwiseAbs().maxCoeff() == 0.0);
        CHECK((da[i].deg - db[i].deg).cwiseAbs().maxCoeff() == 0.0);
        CHECK((da[i].trans_x - db[i].trans_x).cwiseAbs().maxCoeff() == 0.0);
        CHECK((da[i].init_z - db[i].init_z).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("an all-inertia truth locks modelling choices to the lag") {
    CovariateSpec spec = Config::default_covariates();
    DGPConfig dgp;
    dgp.n_riders = 60;
    dgp.t_init = 6;
    dgp.t_model = 8;
    dgp.seed = 17;
    dgp.init_choice_mode = "fair";  // inertia this strong cannot mix routes itself
    Theta th;
    th.zeta0 = Eigen::Vector2d(0.0, 0.0);
    th.zeta0_c = Eigen::VectorXd::Constant(1, -50.0);  // start in class 2 surely
    th.zeta1 = Eigen::Vector2d(0.0, 0.0);
    th.zeta1_c = Eigen::VectorXd::Constant(1, 0.0);
    th.zeta2 = Eigen::Vector2d(0.0, 0.0);
    th.zeta2_c = Eigen::VectorXd::Constant(1, -50.0);  // and never leave it
    th.gamma = Eigen::Vector2d(0.0, 0.0);
    th.varrho = Eigen::Vector2d(0.0, 0.0);
    th.psi = Eigen::Vector2d(0.0, 0.0);
    th.lambda1 = 50.0;
    th.lambda2 = 50.0;
    dgp.true_theta = th;

    const SimulatedPanel sim = simulate_panel(dgp, spec);
    for (std::size_t i = 0; i < sim.panel.riders.size(); ++i) {
        for (int c : sim.true_classes[i]) CHECK(c == 2);
        const auto& trips = sim.panel.riders[i].trips;
        for (int g = dgp.t_init; g < dgp.t_init + dgp.t_model; ++g)
            CHECK(trips[g].chosen_route == trips[g - 1].chosen_route);
    }
}

TEST_CASE("generated frequencies match the model kernels") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig dgp = benchmark_dgp(800, 29);
    const SimulatedPanel sim = simulate_panel(dgp, spec);
    const auto data = process(sim, spec, dgp);
    const DrawSet draws =
        DrawSet::halton(dgp.n_riders, 8, static_cast<int>(spec.g_attrs.size()), 5);
    const Theta& th = dgp.true_theta;

    // initial class: empirical share vs mean model probability
    double p_sum = 0.0, pq_sum = 0.0;
    long init_hits = 0;
    // transitions from each class: empirical vs model, pooled over occasions
    double tp_sum[2] = {0.0, 0.0}, tpq_sum[2] = {0.0, 0.0};
    long t_hits[2] = {0, 0};
    long t_n[2] = {0, 0};
    // inertia-class choices: repeat frequency by lagged route
    long rep_hits[2] = {0, 0}, rep_n[2] = {0, 0};
    // compensatory choices: empirical vs probability at the rider's realised taste
    double cp_sum = 0.0, cpq_sum = 0.0;
    long c_hits = 0;
    long c_n = 0;

    for (std::size_t i = 0; i < data.size(); ++i) {
        const RiderKernels k = rider_kernels(data[i], th, draws.rider(i));
        const auto& s = sim.true_classes[i];
        p_sum += k.init1;
        pq_sum += k.init1 * (1.0 - k.init1);
        init_hits += s[0] == 1 ? 1 : 0;
        const int T = data[i].t_model;
        for (int t = 0; t + 1 < T; ++t) {
            const int from = s[static_cast<std::size_t>(t)] - 1;
            const double p = k.ptrans1(t, from);
            tp_sum[from] += p;
            tpq_sum[from] += p * (1.0 - p);
            t_hits[from] += s[static_cast<std::size_t>(t + 1)] == 1 ? 1 : 0;
            ++t_n[from];
        }
        for (int t = 0; t < T; ++t) {
            const int lag = t == 0 ? data[i].y0 : data[i].y[static_cast<std::size_t>(t - 1)];
            const int y = data[i].y[static_cast<std::size_t>(t)];
            if (s[static_cast<std::size_t>(t)] == 2) {
                rep_hits[lag - 1] += y == lag ? 1 : 0;
                ++rep_n[lag - 1];
            } else {
                double dv = th.gamma.dot(data[i].def.row(t));
                dv += sim.chi.row(static_cast<long>(i)).dot(data[i].deg.row(t));
                const double p = 1.0 / (1.0 + std::exp(-dv));
                cp_sum += p;
                cpq_sum += p * (1.0 - p);
                c_hits += y == 1 ? 1 : 0;
                ++c_n;
            }
        }
    }

    const double n_riders = static_cast<double>(data.size());
    CHECK(std::abs(static_cast<double>(init_hits) - p_sum) <= 3.0 * std::sqrt(pq_sum) + 1.0);
    for (int from = 0; from < 2; ++from) {
        REQUIRE(t_n[from] > 200);
        CHECK(std::abs(static_cast<double>(t_hits[from]) - tp_sum[from]) <=
              3.0 * std::sqrt(tpq_sum[from]) + 1.0);
    }
    // repeat probabilities under the inertia kernel: logistic(lambda1), logistic(lambda2)
    const double pr1 = 1.0 / (1.0 + std::exp(-th.lambda1));
    const double pr2 = 1.0 / (1.0 + std::exp(-th.lambda2));
    REQUIRE(rep_n[0] > 200);
    REQUIRE(rep_n[1] > 200);
    CHECK(std::abs(static_cast<double>(rep_hits[0]) / rep_n[0] - pr1) <=
          3.0 * std::sqrt(pr1 * (1.0 - pr1) / rep_n[0]));
    CHECK(std::abs(static_cast<double>(rep_hits[1]) / rep_n[1] - pr2) <=
          3.0 * std::sqrt(pr2 * (1.0 - pr2) / rep_n[1]));
    REQUIRE(c_n > 200);
    CHECK(std::abs(static_cast<double>(c_hits) - cp_sum) <= 3.0 * std::sqrt(cpq_sum) + 1.0);
    (void)n_riders;
}

TEST_CASE("fair initialisation mode draws routes evenly") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig dgp = benchmark_dgp(400, 37);
    dgp.t_init = 8;
    dgp.t_model = 2;
    dgp.init_choice_mode = "fair";
    const SimulatedPanel sim = simulate_panel(dgp, spec);
    long ones = 0, n = 0;
    for (const auto& r : sim.panel.riders)
        for (int t = 0; t < dgp.t_init; ++t) {
            ones += r.trips[t].chosen_route == 1 ? 1 : 0;
            ++n;
        }
    const double share = static_cast<double>(ones) / static_cast<double>(n);
    // validity redraws trim the tails a little; stay within a generous band
    CHECK(share > 0.45);
    CHECK(share < 0.55);
}

TEST_CASE("simulate_panel rejects unusable configurations") {
    const CovariateSpec spec = Config::default_covariates();
    DGPConfig ok = benchmark_dgp(5, 1);

    DGPConfig d = ok;
    d.t_model = 1;
    CHECK_THROWS_AS((void)simulate_panel(d, spec), ConfigError);
    d = ok;
    d.t_init = 2;
    CHECK_THROWS_WITH_AS((void)simulate_panel(d, spec), doctest::Contains("t_init"),
                         ConfigError);
    d = ok;
    d.attr_sd = 0.0;
    CHECK_THROWS_AS((void)simulate_panel(d, spec), ConfigError);
    d = ok;
    d.n_riders = 0;
    CHECK_THROWS_AS((void)simulate_panel(d, spec), ConfigError);
    d = ok;
    d.init_choice_mode = "coin";
    CHECK_THROWS_AS((void)simulate_panel(d, spec), ConfigError);
    d = ok;
    d.true_theta.gamma = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_WITH_AS((void)simulate_panel(d, spec), doctest::Contains("dimensions"),
                         ConfigError);
    d = ok;
    d.true_theta.psi[0] = -0.5;
    CHECK_THROWS_AS((void)simulate_panel(d, spec), ConfigError);

    CovariateSpec unsupported = spec;
    unsupported.choice_asc = true;
    CHECK_THROWS_AS((void)simulate_panel(ok, unsupported), ConfigError);
}
