#include "dlcm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dlcm/util.hpp"

namespace dlcm {

IniFile IniFile::parse_string(const std::string& text, const std::string& origin) {
    IniFile ini;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments (full-line or trailing, outside of values we keep it simple:
        // '#'/';' starts a comment unless escaped)
        std::string s;
        s.reserve(line.size());
        for (char c : line) {
            if (c == '#' || c == ';') break;
            s.push_back(c);
        }
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header '" + s + "'");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            ini.sections[section];  // record even if empty
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        auto& sec = ini.sections[section];
        if (sec.count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                              "' in section [" + section + "]");
        sec[key] = value;
    }
    return ini;
}

IniFile IniFile::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str(), path);
}

std::vector<double> parse_grid(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty()) return {};
    std::vector<double> out;
    if (s.find(':') != std::string::npos) {
        const auto parts = split(s, ':');
        if (parts.size() != 3) throw ConfigError("grid must be 'lo:hi:step', got '" + text + "'");
        const double lo = parse_real(parts[0], "grid lo");
        const double hi = parse_real(parts[1], "grid hi");
        const double step = parse_real(parts[2], "grid step");
        if (step <= 0.0) throw ConfigError("grid step must be positive");
        if (hi < lo) throw ConfigError("grid hi must be >= lo");
        const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
        for (int k = 0; k < n; ++k) out.push_back(lo + step * k);
        return out;
    }
    for (const auto& part : split(s, ',')) out.push_back(parse_real(part, "grid value"));
    if (out.empty()) throw ConfigError("empty grid");
    return out;
}

Theta Config::default_true_theta() {
    Theta th;
    th.zeta0 = Eigen::Vector2d(1.1, 0.9);
    th.zeta0_c = Eigen::VectorXd::Constant(1, -1.0);
    th.zeta1 = Eigen::Vector2d(1.4, 1.5);
    th.zeta1_c = Eigen::VectorXd::Constant(1, -1.0);
    th.zeta2 = Eigen::Vector2d(1.2, 1.1);
    th.zeta2_c = Eigen::VectorXd::Constant(1, -1.5);
    th.gamma = Eigen::Vector2d(-1.0, -1.5);
    th.varrho = Eigen::Vector2d(1.5, -1.5);
    th.psi = Eigen::Vector2d(1.0, 1.0);
    th.lambda1 = 1.0;
    th.lambda2 = 2.0;
    th.noncomp_extra = Eigen::VectorXd();
    return th;
}

CovariateSpec Config::default_covariates() {
    CovariateSpec cs;
    cs.f_attrs = {"f1", "f2"};
    cs.g_attrs = {"g1", "g2"};
    cs.trans_mismatch = {"x1", "x2"};
    cs.init_mismatch = {"z1", "z2"};
    cs.trans_const = true;
    cs.init_const = true;
    cs.choice_asc = false;
    cs.noncomp_const = false;
    return cs;
}

Config Config::defaults() {
    Config c;
    c.model = default_covariates();
    c.dgp.true_theta = default_true_theta();
    return c;
}

namespace {

using KV = std::map<std::string, std::string>;

class SectionReader {
  public:
    SectionReader(const std::string& name, const KV& kv) : name_(name), kv_(kv) {}

    bool has(const std::string& key) {
        seen_.insert(key);
        return kv_.count(key) > 0;
    }
    std::string raw(const std::string& key) { return kv_.at(key); }

    void get(const std::string& key, double& out) {
        if (has(key)) out = parse_real(kv_.at(key), where(key));
    }
    void get(const std::string& key, int& out) {
        if (has(key)) out = static_cast<int>(parse_int(kv_.at(key), where(key)));
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (has(key)) out = static_cast<std::uint64_t>(parse_int(kv_.at(key), where(key)));
    }
    void get(const std::string& key, bool& out) {
        if (has(key)) out = parse_bool(kv_.at(key), where(key));
    }
    void get(const std::string& key, std::string& out) {
        if (has(key)) out = trim(kv_.at(key));
    }
    void get(const std::string& key, std::vector<double>& out) {
        if (!has(key)) return;
        out.clear();
        for (const auto& part : split(kv_.at(key), ','))
            out.push_back(parse_real(part, where(key)));
    }
    void get(const std::string& key, std::vector<std::string>& out) {
        if (!has(key)) return;
        out.clear();
        for (const auto& part : split(kv_.at(key), ',')) {
            const std::string v = trim(part);
            if (!v.empty()) out.push_back(v);
        }
    }
    void get(const std::string& key, Eigen::VectorXd& out) {
        if (!has(key)) return;
        std::vector<double> vals;
        for (const auto& part : split(kv_.at(key), ','))
            vals.push_back(parse_real(part, where(key)));
        out = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<long>(vals.size()));
    }

    void finish() const {
        for (const auto& [key, _] : kv_)
            if (!seen_.count(key))
                throw ConfigError("unknown key '" + key + "' in section [" + name_ + "]");
    }

  private:
    std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }
    std::string name_;
    const KV& kv_;
    std::set<std::string> seen_;
};

}  // namespace

Config Config::from_ini(const IniFile& ini) {
    Config c = defaults();
    static const std::set<std::string> known = {"screening", "expectation", "model",
                                                "em",        "dgp",         "baseline"};
    for (const auto& [sec, _] : ini.sections) {
        if (sec.empty()) throw ConfigError("keys outside any [section] are not allowed");
        if (!known.count(sec)) throw ConfigError("unknown config section [" + sec + "]");
    }

    if (ini.sections.count("screening")) {
        SectionReader r("screening", ini.sections.at("screening"));
        r.get("enabled", c.screening.enabled);
        r.get("min_choices", c.screening.min_choices);
        r.get("max_other_od_trips", c.screening.max_other_od_trips);
        r.get("rule3", c.screening.rule3);
        r.get("t_init_mode", c.screening.t_init_mode);
        r.get("t_init_fixed", c.screening.t_init_fixed);
        r.get("discretize", c.screening.discretize);
        r.get("crowding_thresholds", c.screening.crowding_thresholds);
        r.get("sp_thresholds", c.screening.sp_thresholds);
        r.get("crowding_attr", c.screening.crowding_attr);
        r.get("sp_attr", c.screening.sp_attr);
        r.get("tt_attr", c.screening.tt_attr);
        r.finish();
        if (c.screening.t_init_mode != "auto" && c.screening.t_init_mode != "fixed")
            throw ConfigError("[screening] t_init_mode must be 'auto' or 'fixed'");
        if (c.screening.t_init_mode == "fixed" && c.screening.t_init_fixed < 1)
            throw ConfigError("[screening] t_init_fixed must be >= 1");
        if (c.screening.min_choices < 0)
            throw ConfigError("[screening] min_choices must be >= 0");
        auto check_thresholds = [](const std::vector<double>& v, const std::string& what) {
            for (std::size_t k = 1; k < v.size(); ++k)
                if (v[k] <= v[k - 1])
                    throw ConfigError(what + " thresholds must be strictly increasing");
        };
        check_thresholds(c.screening.crowding_thresholds, "[screening] crowding");
        check_thresholds(c.screening.sp_thresholds, "[screening] standing-probability");
    }

    if (ini.sections.count("expectation")) {
        SectionReader r("expectation", ini.sections.at("expectation"));
        r.get("mu", c.expectation.mu);
        r.get("memory", c.expectation.memory);
        r.finish();
        if (c.expectation.mu < 0.0) throw ConfigError("[expectation] mu must be >= 0");
        if (c.expectation.memory < 1) throw ConfigError("[expectation] memory must be >= 1");
    }

    if (ini.sections.count("model")) {
        SectionReader r("model", ini.sections.at("model"));
        r.get("f_attrs", c.model.f_attrs);
        r.get("g_attrs", c.model.g_attrs);
        r.get("trans_mismatch", c.model.trans_mismatch);
        r.get("init_mismatch", c.model.init_mismatch);
        r.get("trans_history", c.model.trans_history);
        r.get("init_history", c.model.init_history);
        r.get("noncomp_history", c.model.noncomp_history);
        r.get("trans_const", c.model.trans_const);
        r.get("init_const", c.model.init_const);
        r.get("choice_asc", c.model.choice_asc);
        r.get("noncomp_const", c.model.noncomp_const);
        r.finish();
        if (c.model.f_attrs.empty() && !c.model.choice_asc)
            throw ConfigError("[model] f_attrs must not be empty");
    }

    if (ini.sections.count("em")) {
        SectionReader r("em", ini.sections.at("em"));
        r.get("tolerance", c.em.tolerance);
        r.get("max_iterations", c.em.max_iterations);
        r.get("n_starts", c.em.n_starts);
        r.get("draws", c.em.draws);
        r.get("seed", c.em.seed);
        r.get("inner_gtol", c.em.inner_gtol);
        r.get("inner_max_iter", c.em.inner_max_iter);
        if (r.has("mu_grid")) c.em.mu_grid = parse_grid(r.raw("mu_grid"));
        r.get("compute_se", c.em.compute_se);
        r.finish();
        if (c.em.tolerance <= 0.0) throw ConfigError("[em] tolerance must be > 0");
        if (c.em.max_iterations < 1) throw ConfigError("[em] max_iterations must be >= 1");
        if (c.em.n_starts < 1) throw ConfigError("[em] n_starts must be >= 1");
        if (c.em.draws < 1) throw ConfigError("[em] draws must be >= 1");
    }

    if (ini.sections.count("dgp")) {
        SectionReader r("dgp", ini.sections.at("dgp"));
        r.get("n_riders", c.dgp.n_riders);
        r.get("t_init", c.dgp.t_init);
        r.get("t_model", c.dgp.t_model);
        r.get("attr_mean", c.dgp.attr_mean);
        r.get("attr_sd", c.dgp.attr_sd);
        r.get("memory", c.dgp.memory);
        r.get("mu", c.dgp.mu);
        r.get("seed", c.dgp.seed);
        r.get("mask_unchosen", c.dgp.mask_unchosen);
        r.get("init_choice_mode", c.dgp.init_choice_mode);
        Theta& th = c.dgp.true_theta;
        r.get("zeta0", th.zeta0);
        r.get("zeta0_const", th.zeta0_c);
        r.get("zeta1", th.zeta1);
        r.get("zeta1_const", th.zeta1_c);
        r.get("zeta2", th.zeta2);
        r.get("zeta2_const", th.zeta2_c);
        r.get("gamma", th.gamma);
        r.get("varrho", th.varrho);
        r.get("psi", th.psi);
        r.get("lambda1", th.lambda1);
        r.get("lambda2", th.lambda2);
        r.finish();
        if (c.dgp.t_model < 2) throw ConfigError("[dgp] t_model must be >= 2");
        if (c.dgp.t_init < 2) throw ConfigError("[dgp] t_init must be >= 2");
        if (c.dgp.attr_sd <= 0.0) throw ConfigError("[dgp] attr_sd must be > 0");
        if (c.dgp.n_riders < 1) throw ConfigError("[dgp] n_riders must be >= 1");
        if (c.dgp.init_choice_mode != "noncomp" && c.dgp.init_choice_mode != "fair")
            throw ConfigError("[dgp] init_choice_mode must be 'noncomp' or 'fair'");
        if ((th.psi.array() < 0.0).any()) throw ConfigError("[dgp] psi must be >= 0");
    }

    if (ini.sections.count("baseline")) {
        SectionReader r("baseline", ini.sections.at("baseline"));
        r.get("model", c.baseline.model);
        r.get("n_starts", c.baseline.n_starts);
        r.get("tolerance", c.baseline.tolerance);
        r.get("max_iterations", c.baseline.max_iterations);
        r.get("seed", c.baseline.seed);
        r.finish();
        if (c.baseline.model != "mnl" && c.baseline.model != "lcmnl")
            throw ConfigError("[baseline] model must be 'mnl' or 'lcmnl'");
    }

    return c;
}

Config Config::from_file(const std::string& path) { return from_ini(IniFile::parse_file(path)); }

}  // namespace dlcm
