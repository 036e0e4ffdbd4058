#include "dlcm/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "dlcm/design.hpp"
#include "dlcm/util.hpp"

namespace dlcm {

namespace {

std::vector<int> index_of(const std::vector<std::string>& names,
                          const std::vector<std::string>& all) {
    std::vector<int> idx;
    idx.reserve(names.size());
    for (const auto& n : names) {
        const auto it = std::find(all.begin(), all.end(), n);
        idx.push_back(static_cast<int>(it - all.begin()));
    }
    return idx;
}

Eigen::VectorXd slice(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
    return out;
}

void validate(const DGPConfig& config, const CovariateSpec& spec) {
    if (config.t_model < 2) throw ConfigError("simulate_panel: t_model must be at least 2");
    if (config.t_init < 3)
        throw ConfigError(
            "simulate_panel: t_init must be at least 3 (shorter horizons cannot satisfy "
            "the initialisation validity condition)");
    if (!(config.attr_sd > 0.0)) throw ConfigError("simulate_panel: attr_sd must be positive");
    if (config.n_riders < 1) throw ConfigError("simulate_panel: n_riders must be positive");
    if (!spec.trans_history.empty() || !spec.init_history.empty() ||
        !spec.noncomp_history.empty() || spec.choice_asc || spec.noncomp_const ||
        !spec.trans_const || !spec.init_const)
        throw ConfigError(
            "simulate_panel: the generator supports constant + mismatch blocks for the "
            "initialisation/transition kernels and plain attribute blocks for the choice "
            "kernels only");
    const Theta& th = config.true_theta;
    if (th.zeta0.size() != spec.n_init_z() || th.zeta0_c.size() != spec.n_init_c() ||
        th.zeta1.size() != spec.n_trans_x() || th.zeta1_c.size() != spec.n_trans_c() ||
        th.zeta2.size() != spec.n_trans_x() || th.zeta2_c.size() != spec.n_trans_c() ||
        th.gamma.size() != spec.n_f() || th.varrho.size() != spec.n_g() ||
        th.psi.size() != spec.n_g() || th.noncomp_extra.size() != 0)
        throw ConfigError("simulate_panel: true_theta dimensions do not match the covariates");
    if (th.psi.size() > 0 && th.psi.minCoeff() < 0.0)
        throw ConfigError("simulate_panel: psi entries must be non-negative");
    if (config.init_choice_mode != "noncomp" && config.init_choice_mode != "fair")
        throw ConfigError("simulate_panel: init_choice_mode must be 'noncomp' or 'fair'");
}

}  // namespace

SimulatedPanel simulate_panel(const DGPConfig& config, const CovariateSpec& spec) {
    validate(config, spec);
    const Theta& th = config.true_theta;
    const int N = config.n_riders;
    const int TI = config.t_init;
    const int T = config.t_model;
    const int L = TI + T;

    // unified attribute list (deduplicated, stable order: x, z, f, g)
    std::vector<std::string> attrs;
    for (const auto* pool :
         {&spec.trans_mismatch, &spec.init_mismatch, &spec.f_attrs, &spec.g_attrs})
        for (const auto& n : *pool)
            if (std::find(attrs.begin(), attrs.end(), n) == attrs.end()) attrs.push_back(n);
    const int nA = static_cast<int>(attrs.size());
    const auto x_idx = index_of(spec.trans_mismatch, attrs);
    const auto z_idx = index_of(spec.init_mismatch, attrs);
    const auto f_idx = index_of(spec.f_attrs, attrs);
    const auto g_idx = index_of(spec.g_attrs, attrs);
    const long nG = spec.n_g();

    SimulatedPanel out;
    out.seed = config.seed;
    out.t_init = TI;
    out.t_model = T;
    out.theta = th;
    out.true_classes.resize(N);
    out.chi.resize(N, nG);
    out.panel.attribute_names = attrs;
    if (!config.mask_unchosen)
        for (const auto& n : attrs) out.panel.attribute_names.push_back(n + "_alt");
    out.panel.riders.resize(N);

    const Eigen::VectorXd sig =
        nG > 0 ? Eigen::VectorXd(th.psi.array().sqrt()) : Eigen::VectorXd(0);
    const int id_width = std::max<int>(4, static_cast<int>(std::to_string(N).size()));

    parallel_for(static_cast<std::size_t>(N), worker_threads(), [&](std::size_t i) {
        auto rng_attr = make_rng(config.seed, i, Stream::Attributes);
        auto rng_chi = make_rng(config.seed, i, Stream::Chi);
        auto rng_choice = make_rng(config.seed, i, Stream::Choices);
        auto rng_class = make_rng(config.seed, i, Stream::Classes);
        std::normal_distribution<double> attr_dist(config.attr_mean, config.attr_sd);
        std::normal_distribution<double> std_normal(0.0, 1.0);
        std::uniform_real_distribution<double> u01(0.0, 1.0);

        // attribute values per occasion and route (1-based occasions)
        std::vector<std::array<Eigen::VectorXd, 2>> vals(L + 1);
        for (int g = 1; g <= L; ++g)
            for (int j = 0; j < 2; ++j) {
                vals[g][j].resize(nA);
                for (int a = 0; a < nA; ++a) vals[g][j][a] = attr_dist(rng_attr);
            }

        Eigen::VectorXd chi(nG);
        for (long k = 0; k < nG; ++k) chi[k] = th.varrho[k] + sig[k] * std_normal(rng_chi);
        out.chi.row(static_cast<long>(i)) = chi.transpose();

        // initialisation choices, redrawn until the fixed-split condition holds
        std::vector<int> y(L + 1, 0);
        bool accepted = false;
        for (int attempt = 0; attempt < 100000 && !accepted; ++attempt) {
            if (config.init_choice_mode == "noncomp") {
                y[1] = u01(rng_choice) < 0.5 ? 1 : 2;
                for (int t = 2; t <= TI; ++t) {
                    const double v = y[t - 1] == 1 ? th.lambda1 : -th.lambda2;
                    y[t] = u01(rng_choice) < logistic(v) ? 1 : 2;
                }
            } else {
                for (int t = 1; t <= TI; ++t) y[t] = u01(rng_choice) < 0.5 ? 1 : 2;
            }
            bool seen1 = false, seen2 = false, seen_jT = false;
            for (int t = 1; t <= TI; ++t) (y[t] == 1 ? seen1 : seen2) = true;
            for (int t = 1; t < TI; ++t)
                if (y[t] == y[TI]) seen_jT = true;
            accepted = seen1 && seen2 && seen_jT;
        }
        if (!accepted)
            throw ConfigError(
                "simulate_panel: could not draw a valid initialisation sequence for rider " +
                std::to_string(i + 1) +
                "; the configured t_init/inertia values make the validity condition "
                "improbable");

        ExpectationTracker tracker(nA);
        for (int g = 1; g <= TI; ++g) tracker.add_experience(g, y[g], vals[g][y[g] - 1]);

        // initial class from the mismatch at the split occasion
        const int jT = y[TI];
        const Eigen::VectorXd e_split = tracker.expect(jT, TI, config.mu, config.memory);
        const Eigen::VectorXd zdiff =
            slice(vals[TI][jT - 1], z_idx) - slice(e_split, z_idx);
        const double k0 = th.zeta0.dot(zdiff) + (spec.n_init_c() > 0 ? th.zeta0_c[0] : 0.0);
        std::vector<int> s(T + 1, 0);
        s[1] = u01(rng_class) < logistic(k0) ? 1 : 2;

        for (int t = 1; t <= T; ++t) {
            const int g = TI + t;
            double p1 = 0.0;
            if (s[t] == 1) {
                const Eigen::VectorXd e1 = tracker.expect(1, g, config.mu, config.memory);
                const Eigen::VectorXd e2 = tracker.expect(2, g, config.mu, config.memory);
                double dv = 0.0;
                for (std::size_t k = 0; k < f_idx.size(); ++k)
                    dv += th.gamma[static_cast<long>(k)] * (e1[f_idx[k]] - e2[f_idx[k]]);
                for (std::size_t k = 0; k < g_idx.size(); ++k)
                    dv += chi[static_cast<long>(k)] * (e1[g_idx[k]] - e2[g_idx[k]]);
                p1 = logistic(dv);
            } else {
                const double v = y[g - 1] == 1 ? th.lambda1 : -th.lambda2;
                p1 = logistic(v);
            }
            y[g] = u01(rng_choice) < p1 ? 1 : 2;

            // transition uses the mismatch experienced at g, before adding g
            if (t < T) {
                const int jch = y[g];
                const Eigen::VectorXd e_now = tracker.expect(jch, g, config.mu, config.memory);
                const Eigen::VectorXd xdiff =
                    slice(vals[g][jch - 1], x_idx) - slice(e_now, x_idx);
                const Eigen::VectorXd& zr = s[t] == 1 ? th.zeta1 : th.zeta2;
                const Eigen::VectorXd& zc = s[t] == 1 ? th.zeta1_c : th.zeta2_c;
                const double m = zr.dot(xdiff) + (zc.size() > 0 ? zc[0] : 0.0);
                s[t + 1] = u01(rng_class) < logistic(m) ? 1 : 2;
            }
            tracker.add_experience(g, y[g], vals[g][y[g] - 1]);
        }

        RiderRecord rec;
        std::string id = std::to_string(i + 1);
        rec.rider_id = "r" + std::string(id_width - id.size(), '0') + id;
        rec.trips.resize(L);
        for (int g = 1; g <= L; ++g) {
            TripRecord& trip = rec.trips[g - 1];
            trip.occasion = g;
            trip.chosen_route = y[g];
            if (config.mask_unchosen) {
                trip.attributes = vals[g][y[g] - 1];
            } else {
                trip.attributes.resize(2 * nA);
                trip.attributes.head(nA) = vals[g][y[g] - 1];
                trip.attributes.tail(nA) = vals[g][2 - y[g]];  // the other route
            }
        }
        out.panel.riders[i] = std::move(rec);
        out.true_classes[i] = std::vector<int>(s.begin() + 1, s.end());
    });

    return out;
}

}  // namespace dlcm
