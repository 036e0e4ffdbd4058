#include "dlcm/design.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dlcm/panel.hpp"
#include "dlcm/util.hpp"

namespace dlcm {

Eigen::VectorXd decay_weights(int current, const std::vector<int>& past, double mu) {
    if (past.empty()) throw DataError("decay_weights: empty experience list");
    Eigen::VectorXd w(static_cast<long>(past.size()));
    for (std::size_t k = 0; k < past.size(); ++k) {
        if (past[k] >= current)
            throw DataError("decay_weights: past occasion " + std::to_string(past[k]) +
                            " not before current " + std::to_string(current));
        const double lag = static_cast<double>(current - past[k]);
        w[static_cast<long>(k)] = std::pow(lag, -mu);
    }
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericError("decay_weights: non-finite weight normalisation");
    return w / total;
}

void ExpectationTracker::add_experience(int occasion, int route, const Eigen::VectorXd& attrs) {
    if (route != 1 && route != 2)
        throw DataError("add_experience: route must be 1 or 2");
    if (attrs.size() != n_attrs_)
        throw DataError("add_experience: attribute dimension mismatch");
    auto& list = exps_[route - 1];
    if (!list.empty() && list.back().occasion >= occasion)
        throw DataError("add_experience: occasions must be strictly increasing");
    list.push_back({occasion, attrs});
}

bool ExpectationTracker::available(int route, int t) const {
    const auto& list = exps_[route - 1];
    return !list.empty() && list.front().occasion < t;
}

Eigen::VectorXd ExpectationTracker::expect(int route, int t, double mu, int memory) const {
    const auto& list = exps_[route - 1];
    // most recent `memory` experiences strictly before t
    int hi = static_cast<int>(list.size());
    while (hi > 0 && list[static_cast<std::size_t>(hi - 1)].occasion >= t) --hi;
    if (hi == 0)
        throw DataError("expectation unavailable: route " + std::to_string(route) +
                        " has no experience before occasion " + std::to_string(t));
    const int lo = std::max(0, hi - memory);
    std::vector<int> occ;
    for (int k = lo; k < hi; ++k) occ.push_back(list[static_cast<std::size_t>(k)].occasion);
    const Eigen::VectorXd w = decay_weights(t, occ, mu);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_attrs_);
    for (int k = lo; k < hi; ++k)
        out += w[k - lo] * list[static_cast<std::size_t>(k)].attrs;
    return out;
}

Eigen::VectorXd expected_attributes(const RiderRecord& rider, int route, int t,
                                    const ExpectationConfig& config) {
    const int n_attrs =
        rider.trips.empty() ? 0 : static_cast<int>(rider.trips.front().attributes.size());
    ExpectationTracker tracker(n_attrs);
    for (const auto& trip : rider.trips)
        if (trip.occasion < t)
            tracker.add_experience(trip.occasion, trip.chosen_route, trip.attributes);
    return tracker.expect(route, t, config.mu, config.memory);
}

namespace {

std::vector<int> attr_indices(const std::vector<std::string>& names,
                              const std::vector<std::string>& wanted) {
    std::vector<int> idx;
    idx.reserve(wanted.size());
    for (const auto& w : wanted) {
        auto it = std::find(names.begin(), names.end(), w);
        if (it == names.end())
            throw ConfigError("model covariate '" + w + "' is not an attribute of the panel");
        idx.push_back(static_cast<int>(it - names.begin()));
    }
    return idx;
}

Eigen::VectorXd gather(const Eigen::VectorXd& full, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<long>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<long>(k)] = full[idx[k]];
    return out;
}

}  // namespace

ProcessedRider build_design(const RiderRecord& rider,
                            const std::vector<std::string>& attribute_names,
                            const CovariateSpec& spec, const ExpectationConfig& config,
                            const SplitOptions& split) {
    const auto y_all = choice_sequence(rider);
    const int total = static_cast<int>(y_all.size());

    SplitResult sr;
    if (split.mode == "fixed") {
        sr.t_init = split.t_init_fixed;
        sr.t_model = total - split.t_init_fixed;
        sr.ok = sr.t_model >= 2;
    } else {
        sr = split_initialisation(y_all);
    }
    if (!sr.ok)
        throw DataError("rider " + rider.rider_id + ": no valid initialisation split");

    const auto f_idx = attr_indices(attribute_names, spec.f_attrs);
    const auto g_idx = attr_indices(attribute_names, spec.g_attrs);
    const auto x_idx = attr_indices(attribute_names, spec.trans_mismatch);
    const auto z_idx = attr_indices(attribute_names, spec.init_mismatch);

    ProcessedRider pr;
    pr.rider_id = rider.rider_id;
    pr.t_init = sr.t_init;
    pr.t_model = sr.t_model;
    pr.y0 = y_all[static_cast<std::size_t>(sr.t_init - 1)];
    pr.y.assign(y_all.begin() + sr.t_init, y_all.end());

    const int T = pr.t_model;
    const int nF = spec.n_f();
    const int nG = spec.n_g();
    pr.ef1.resize(T, nF);
    pr.ef2.resize(T, nF);
    pr.eg1.resize(T, nG);
    pr.eg2.resize(T, nG);
    pr.trans_x.resize(T, spec.n_trans_x() + spec.n_trans_c());
    pr.noncomp_x.resize(T, 2 + spec.n_noncomp_extra());
    pr.sign.resize(T);

    const int n_attrs = static_cast<int>(attribute_names.size());
    ExpectationTracker tracker(n_attrs);
    auto trip_at = [&](int g) -> const TripRecord& {
        return rider.trips[static_cast<std::size_t>(g - 1)];
    };
    for (int g = 1; g < sr.t_init; ++g)
        tracker.add_experience(g, y_all[static_cast<std::size_t>(g - 1)], trip_at(g).attributes);

    // Initialisation covariates at original occasion T_I: mismatch of the
    // chosen route against its expectation, then [const, history...].
    {
        const int g = sr.t_init;
        const int j = pr.y0;
        const Eigen::VectorXd expz = tracker.expect(j, g, config.mu, config.memory);
        const Eigen::VectorXd zdiff =
            gather(trip_at(g).attributes, z_idx) - gather(expz, z_idx);
        pr.init_z.resize(spec.n_init_z() + spec.n_init_c());
        pr.init_z.head(spec.n_init_z()) = zdiff;
        int pos = spec.n_init_z();
        if (spec.init_const) pr.init_z[pos++] = 1.0;
        if (!spec.init_history.empty()) {
            const auto h = history_covariates(y_all, g);
            for (const auto& name : spec.init_history)
                pr.init_z[pos++] = history_value(h, name);
        }
        tracker.add_experience(g, j, trip_at(g).attributes);
    }

    for (int t = 1; t <= T; ++t) {
        const int g = sr.t_init + t;  // original occasion
        // Expected attributes for both routes (built before experiencing g).
        for (int j = 1; j <= 2; ++j) {
            if (!tracker.available(j, g))
                throw DataError("rider " + rider.rider_id + ": route " + std::to_string(j) +
                                " has no experience before occasion " + std::to_string(g));
            const Eigen::VectorXd e = tracker.expect(j, g, config.mu, config.memory);
            auto& ef = j == 1 ? pr.ef1 : pr.ef2;
            auto& eg = j == 1 ? pr.eg1 : pr.eg2;
            ef.row(t - 1).head(static_cast<long>(f_idx.size())) =
                gather(e, f_idx).transpose();
            if (spec.choice_asc) ef(t - 1, nF - 1) = j == 1 ? 1.0 : 0.0;
            eg.row(t - 1) = gather(e, g_idx).transpose();
        }

        // Transition covariates at t: mismatch of the chosen route, [const, history...].
        const int j = pr.y[static_cast<std::size_t>(t - 1)];
        const Eigen::VectorXd expx = tracker.expect(j, g, config.mu, config.memory);
        pr.trans_x.row(t - 1).head(spec.n_trans_x()) =
            (gather(trip_at(g).attributes, x_idx) - gather(expx, x_idx)).transpose();
        int pos = spec.n_trans_x();
        if (spec.trans_const) pr.trans_x(t - 1, pos++) = 1.0;
        if (!spec.trans_history.empty()) {
            const auto h = history_covariates(y_all, g);
            for (const auto& name : spec.trans_history)
                pr.trans_x(t - 1, pos++) = history_value(h, name);
        }

        // Non-compensatory covariates: lag indicators from the previous
        // occasion, optional extras from history up to the previous occasion
        // (no look-ahead into the current choice).
        const int lag = t == 1 ? pr.y0 : pr.y[static_cast<std::size_t>(t - 2)];
        pr.noncomp_x(t - 1, 0) = lag == 1 ? 1.0 : 0.0;
        pr.noncomp_x(t - 1, 1) = lag == 2 ? -1.0 : 0.0;
        pos = 2;
        if (spec.noncomp_const) pr.noncomp_x(t - 1, pos++) = 1.0;
        if (!spec.noncomp_history.empty()) {
            const auto h = history_covariates(y_all, g - 1);
            for (const auto& name : spec.noncomp_history)
                pr.noncomp_x(t - 1, pos++) = history_value(h, name);
        }

        pr.sign[t - 1] = j == 1 ? 1.0 : -1.0;
        tracker.add_experience(g, j, trip_at(g).attributes);
    }

    pr.def = pr.ef1 - pr.ef2;
    pr.deg = pr.eg1 - pr.eg2;
    return pr;
}

std::vector<ProcessedRider> build_designs(const PanelDataset& data, const CovariateSpec& spec,
                                          const ExpectationConfig& config,
                                          const SplitOptions& split) {
    std::vector<ProcessedRider> out(data.riders.size());
    parallel_for(data.riders.size(), worker_threads(), [&](std::size_t i) {
        out[i] = build_design(data.riders[i], data.attribute_names, spec, config, split);
    });
    return out;
}

std::vector<std::string> parameter_names(const CovariateSpec& spec) {
    std::vector<std::string> names;
    auto block = [&names](const std::string& prefix, const std::vector<std::string>& attrs,
                          bool with_const, const std::vector<std::string>& history) {
        for (const auto& a : attrs) names.push_back(prefix + "." + a);
        if (with_const) names.push_back(prefix + ".const");
        for (const auto& h : history) names.push_back(prefix + "." + h);
    };
    block("init", spec.init_mismatch, spec.init_const, spec.init_history);
    block("trans1", spec.trans_mismatch, spec.trans_const, spec.trans_history);
    block("trans2", spec.trans_mismatch, spec.trans_const, spec.trans_history);
    for (const auto& a : spec.f_attrs) names.push_back("choice." + a);
    if (spec.choice_asc) names.push_back("choice.asc");
    for (const auto& a : spec.g_attrs) names.push_back("choice.rho_" + a);
    for (const auto& a : spec.g_attrs) names.push_back("choice.psi_" + a);
    names.push_back("noncomp.lambda1");
    names.push_back("noncomp.lambda2");
    if (spec.noncomp_const) names.push_back("noncomp.const");
    for (const auto& h : spec.noncomp_history) names.push_back("noncomp." + h);
    return names;
}

std::string dump_design(const ProcessedRider& pr) {
    std::ostringstream os;
    os << "rider_id\t" << pr.rider_id << "\nt_init\t" << pr.t_init << "\nt_model\t"
       << pr.t_model << "\ny0\t" << pr.y0 << '\n';
    os << "init_z";
    for (long k = 0; k < pr.init_z.size(); ++k) os << '\t' << format_real(pr.init_z[k], 17);
    os << '\n';
    auto dump_mat = [&os](const std::string& name, const Eigen::MatrixXd& m) {
        for (long r = 0; r < m.rows(); ++r) {
            os << name << '\t' << (r + 1);
            for (long c = 0; c < m.cols(); ++c) os << '\t' << format_real(m(r, c), 17);
            os << '\n';
        }
    };
    os << "y";
    for (int v : pr.y) os << '\t' << v;
    os << '\n';
    dump_mat("ef1", pr.ef1);
    dump_mat("ef2", pr.ef2);
    dump_mat("eg1", pr.eg1);
    dump_mat("eg2", pr.eg2);
    dump_mat("trans_x", pr.trans_x);
    dump_mat("noncomp_x", pr.noncomp_x);
    return os.str();
}

}  // namespace dlcm
