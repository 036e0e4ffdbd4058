#include "dlcm/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "dlcm/util.hpp"

namespace dlcm {

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<long>(i)] = a[i].get<double>();
    return v;
}

json names_to_json(const std::vector<std::string>& names) {
    json a = json::array();
    for (const auto& n : names) a.push_back(n);
    return a;
}

std::vector<std::string> names_from_json(const json& a) {
    std::vector<std::string> out;
    for (const auto& e : a) out.push_back(e.get<std::string>());
    return out;
}

}  // namespace

std::string iso_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json manifest_to_json(const RunManifest& m) {
    json j;
    j["command"] = m.command;
    j["config"] = m.config_path;
    j["panel"] = m.panel_path;
    j["result"] = m.result_path;
    j["out_dir"] = m.out_dir;
    j["seed"] = m.seed;
    j["threads"] = m.threads;
    j["extra"] = m.extra;
    j["wall_seconds"] = m.wall_seconds;
    j["started_at"] = m.started_at;
    j["version"] = kToolVersion;
    return j;
}

json spec_to_json(const CovariateSpec& spec) {
    json j;
    j["f_attrs"] = names_to_json(spec.f_attrs);
    j["g_attrs"] = names_to_json(spec.g_attrs);
    j["trans_mismatch"] = names_to_json(spec.trans_mismatch);
    j["init_mismatch"] = names_to_json(spec.init_mismatch);
    j["trans_history"] = names_to_json(spec.trans_history);
    j["init_history"] = names_to_json(spec.init_history);
    j["noncomp_history"] = names_to_json(spec.noncomp_history);
    j["trans_const"] = spec.trans_const;
    j["init_const"] = spec.init_const;
    j["choice_asc"] = spec.choice_asc;
    j["noncomp_const"] = spec.noncomp_const;
    return j;
}

CovariateSpec spec_from_json(const json& j) {
    CovariateSpec spec;
    spec.f_attrs = names_from_json(j.at("f_attrs"));
    spec.g_attrs = names_from_json(j.at("g_attrs"));
    spec.trans_mismatch = names_from_json(j.at("trans_mismatch"));
    spec.init_mismatch = names_from_json(j.at("init_mismatch"));
    spec.trans_history = names_from_json(j.at("trans_history"));
    spec.init_history = names_from_json(j.at("init_history"));
    spec.noncomp_history = names_from_json(j.at("noncomp_history"));
    spec.trans_const = j.at("trans_const").get<bool>();
    spec.init_const = j.at("init_const").get<bool>();
    spec.choice_asc = j.at("choice_asc").get<bool>();
    spec.noncomp_const = j.at("noncomp_const").get<bool>();
    return spec;
}

json theta_to_json(const Theta& theta) {
    json j;
    j["zeta0"] = vec_to_json(theta.zeta0);
    j["zeta0_const"] = vec_to_json(theta.zeta0_c);
    j["zeta1"] = vec_to_json(theta.zeta1);
    j["zeta1_const"] = vec_to_json(theta.zeta1_c);
    j["zeta2"] = vec_to_json(theta.zeta2);
    j["zeta2_const"] = vec_to_json(theta.zeta2_c);
    j["gamma"] = vec_to_json(theta.gamma);
    j["varrho"] = vec_to_json(theta.varrho);
    j["psi"] = vec_to_json(theta.psi);
    j["lambda1"] = theta.lambda1;
    j["lambda2"] = theta.lambda2;
    j["noncomp_extra"] = vec_to_json(theta.noncomp_extra);
    return j;
}

Theta theta_from_json(const json& j) {
    Theta theta;
    theta.zeta0 = vec_from_json(j.at("zeta0"));
    theta.zeta0_c = vec_from_json(j.at("zeta0_const"));
    theta.zeta1 = vec_from_json(j.at("zeta1"));
    theta.zeta1_c = vec_from_json(j.at("zeta1_const"));
    theta.zeta2 = vec_from_json(j.at("zeta2"));
    theta.zeta2_c = vec_from_json(j.at("zeta2_const"));
    theta.gamma = vec_from_json(j.at("gamma"));
    theta.varrho = vec_from_json(j.at("varrho"));
    theta.psi = vec_from_json(j.at("psi"));
    theta.lambda1 = j.at("lambda1").get<double>();
    theta.lambda2 = j.at("lambda2").get<double>();
    theta.noncomp_extra = vec_from_json(j.at("noncomp_extra"));
    return theta;
}

json estimation_to_json(const EstimationResult& result, const CovariateSpec& spec,
                        const ExpectationConfig& expectation, int draws) {
    json j;
    j["model"] = "dlcm";
    j["loglik"] = result.final_loglik;
    j["iterations"] = result.iterations;
    j["converged"] = result.converged;
    j["seed"] = result.seed;
    j["n_riders"] = result.n_riders;
    j["n_obs"] = result.n_obs;
    j["mu"] = expectation.mu;
    j["memory"] = expectation.memory;
    j["draws"] = draws;
    j["max_posterior_violation"] = result.max_posterior_violation;
    j["hessian_pd"] = result.hessian_pd;
    j["hessian_rcond"] = result.hessian_rcond;
    j["wall_seconds"] = result.wall_seconds;
    j["covariates"] = spec_to_json(spec);
    j["theta"] = theta_to_json(result.theta);
    json params = json::array();
    for (std::size_t k = 0; k < result.param_names.size(); ++k) {
        json p;
        p["name"] = result.param_names[k];
        p["estimate"] = result.estimates[static_cast<long>(k)];
        if (result.std_errors.size() == result.estimates.size()) {
            p["std_error"] = result.std_errors[static_cast<long>(k)];
            p["z"] = result.z_values[static_cast<long>(k)];
        }
        if (result.gradient.size() == result.estimates.size())
            p["gradient"] = result.gradient[static_cast<long>(k)];
        params.push_back(p);
    }
    j["parameters"] = params;
    j["loglik_trace"] = result.loglik_trace;
    return j;
}

json baseline_to_json(const BaselineResult& result) {
    json j;
    j["model"] = result.kind;
    j["loglik"] = result.loglik;
    j["converged"] = result.converged;
    j["n_riders"] = result.n_riders;
    j["n_obs"] = result.n_obs;
    j["separation_flag"] = result.separation_flag;
    j["degenerate_class"] = result.degenerate_class;
    if (result.kind == "lcmnl") j["class1_share"] = result.class1_share;
    json params = json::array();
    for (std::size_t k = 0; k < result.param_names.size(); ++k) {
        json p;
        p["name"] = result.param_names[k];
        p["estimate"] = result.estimates[static_cast<long>(k)];
        p["std_error"] = result.std_errors[static_cast<long>(k)];
        p["z"] = result.z_values[static_cast<long>(k)];
        params.push_back(p);
    }
    j["parameters"] = params;
    return j;
}

json screening_to_json(const ScreeningReport& report) {
    json j;
    j["n_input"] = report.n_input;
    j["n_after_min_choices"] = report.n_after_min_choices;
    j["n_after_od"] = report.n_after_od;
    j["n_after_route_mix"] = report.n_after_route_mix;
    j["n_survivors"] = report.n_after_tinit;
    json rem;
    for (const auto& [k, v] : report.removals) rem[k] = v;
    j["removals"] = rem;
    auto q = [](const ScreeningReport::Quantiles& x) {
        json jq;
        jq["min"] = x.min;
        jq["p25"] = x.p25;
        jq["median"] = x.median;
        jq["p75"] = x.p75;
        jq["max"] = x.max;
        jq["mean"] = x.mean;
        return jq;
    };
    j["total_occasions"] = q(report.total_occasions);
    j["model_occasions"] = q(report.model_occasions);
    return j;
}

json class_share_to_json(const ClassShareReport& report) {
    json j;
    j["empty"] = report.empty;
    j["overall_class1"] = report.overall_class1;
    j["bands"] = json::array();
    j["bands"].push_back({{"label", "total_occasions < 10"},
                          {"riders", report.n_low},
                          {"class1_share", report.band_low}});
    j["bands"].push_back({{"label", "10 <= total_occasions <= 20"},
                          {"riders", report.n_mid},
                          {"class1_share", report.band_mid}});
    j["bands"].push_back({{"label", "total_occasions > 20"},
                          {"riders", report.n_high},
                          {"class1_share", report.band_high}});
    j["n_occasions"] = report.n_occasions;
    return j;
}

json mu_profile_to_json(const MuProfile& profile) {
    json j;
    json pts = json::array();
    for (std::size_t k = 0; k < profile.mu.size(); ++k) {
        json p;
        p["mu"] = profile.mu[k];
        p["ok"] = static_cast<bool>(profile.ok[k]);
        if (profile.ok[k]) p["loglik"] = profile.loglik[k];
        pts.push_back(p);
    }
    j["profile"] = pts;
    j["best_mu"] = profile.best_mu;
    j["best_loglik"] = profile.best.final_loglik;
    return j;
}

std::string estimates_tsv(const EstimationResult& result) {
    std::ostringstream os;
    os << "name\testimate\tstd_error\tz\tgradient\n";
    const bool have_se = result.std_errors.size() == result.estimates.size();
    const bool have_grad = result.gradient.size() == result.estimates.size();
    for (std::size_t k = 0; k < result.param_names.size(); ++k) {
        const long j = static_cast<long>(k);
        os << result.param_names[k] << '\t' << format_real(result.estimates[j]) << '\t'
           << (have_se ? format_real(result.std_errors[j]) : "") << '\t'
           << (have_se ? format_real(result.z_values[j]) : "") << '\t'
           << (have_grad ? format_real(result.gradient[j]) : "") << '\n';
    }
    return os.str();
}

std::string baseline_tsv(const BaselineResult& result) {
    std::ostringstream os;
    os << "name\testimate\tstd_error\tz\n";
    for (std::size_t k = 0; k < result.param_names.size(); ++k) {
        const long j = static_cast<long>(k);
        os << result.param_names[k] << '\t' << format_real(result.estimates[j]) << '\t'
           << format_real(result.std_errors[j]) << '\t' << format_real(result.z_values[j])
           << '\n';
    }
    return os.str();
}

std::string trace_tsv(const std::vector<double>& loglik_trace) {
    std::ostringstream os;
    os << "iteration\tloglik\n";
    for (std::size_t k = 0; k < loglik_trace.size(); ++k)
        os << k + 1 << '\t' << format_real(loglik_trace[k]) << '\n';
    return os.str();
}

std::string decoded_tsv(const std::vector<DecodedSequence>& decoded) {
    std::ostringstream os;
    os << "rider_id\tt\tclass\tmarginal_class\n";
    for (const auto& d : decoded)
        for (std::size_t t = 0; t < d.classes.size(); ++t)
            os << d.rider_id << '\t' << t + 1 << '\t' << d.classes[t] << '\t'
               << (t < d.marginal_classes.size() ? d.marginal_classes[t] : 0) << '\n';
    return os.str();
}

std::string mu_profile_tsv(const MuProfile& profile) {
    std::ostringstream os;
    os << "mu\tloglik\tok\n";
    for (std::size_t k = 0; k < profile.mu.size(); ++k) {
        os << format_real(profile.mu[k]) << '\t';
        if (profile.ok[k]) os << format_real(profile.loglik[k]);
        else os << "nan";
        os << '\t' << (profile.ok[k] ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string truth_tsv(const std::vector<std::string>& rider_ids,
                      const std::vector<std::vector<int>>& true_classes) {
    std::ostringstream os;
    os << "rider_id\tt\ttrue_class\n";
    for (std::size_t i = 0; i < rider_ids.size(); ++i)
        for (std::size_t t = 0; t < true_classes[i].size(); ++t)
            os << rider_ids[i] << '\t' << t + 1 << '\t' << true_classes[i][t] << '\n';
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << content;
    if (!os) throw DataError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

json read_json_file(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw DataError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace dlcm
