#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dlcm/baseline.hpp"
#include "dlcm/config.hpp"
#include "dlcm/design.hpp"
#include "dlcm/em.hpp"
#include "dlcm/panel.hpp"
#include "dlcm/report.hpp"
#include "dlcm/simulate.hpp"
#include "dlcm/util.hpp"
#include "dlcm/viterbi.hpp"

namespace fs = std::filesystem;
using namespace dlcm;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

Config load_config(const std::string& path) {
    return path.empty() ? Config::defaults() : Config::from_file(path);
}

// All columns other than the mandatory ones are treated as attributes.
PanelSchema sniff_schema(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open panel file: " + path);
    std::string header;
    if (!std::getline(f, header)) throw DataError(path + ": empty panel file");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const char sep = header.find('\t') != std::string::npos ? '\t' : ',';
    PanelSchema schema;
    for (auto col : split(header, sep)) {
        col = trim(col);
        if (col == schema.rider_col || col == schema.occasion_col || col == schema.route_col)
            continue;
        if (col == "od") {
            schema.od_col = "od";
            continue;
        }
        schema.attribute_cols.push_back(col);
    }
    return schema;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (k) out += ", ";
        out += names[k];
    }
    return out;
}

std::string vec_ini(const Eigen::VectorXd& v) {
    std::string out;
    for (long k = 0; k < v.size(); ++k) {
        if (k) out += ", ";
        out += format_real(v[k]);
    }
    return out;
}

// Ready-to-use config for estimating a freshly simulated panel: screening
// steps 1-3 off, split fixed at the generating t_init, matching expectations.
std::string estimate_ini_for(const Config& cfg) {
    std::ostringstream os;
    os << "# estimation settings matching the simulated panel\n";
    os << "[screening]\n";
    os << "enabled = false\n";
    os << "t_init_mode = fixed\n";
    os << "t_init_fixed = " << cfg.dgp.t_init << "\n\n";
    os << "[expectation]\n";
    os << "mu = " << format_real(cfg.dgp.mu) << "\n";
    os << "memory = " << cfg.dgp.memory << "\n\n";
    os << "[model]\n";
    os << "f_attrs = " << join_names(cfg.model.f_attrs) << "\n";
    os << "g_attrs = " << join_names(cfg.model.g_attrs) << "\n";
    os << "trans_mismatch = " << join_names(cfg.model.trans_mismatch) << "\n";
    os << "init_mismatch = " << join_names(cfg.model.init_mismatch) << "\n\n";
    os << "[em]\n";
    os << "tolerance = " << format_real(cfg.em.tolerance) << "\n";
    os << "max_iterations = " << cfg.em.max_iterations << "\n";
    os << "n_starts = " << cfg.em.n_starts << "\n";
    os << "draws = " << cfg.em.draws << "\n";
    os << "seed = " << cfg.em.seed << "\n";
    return os.str();
}

void write_manifest(const fs::path& out_dir, RunManifest m, double seconds) {
    m.wall_seconds = seconds;
    m.started_at = iso_utc_now();
    write_json_file((out_dir / "manifest.json").string(), manifest_to_json(m));
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::optional<std::uint64_t>& seed_override) {
    Timer timer;
    Config cfg = load_config(config_path);
    if (seed_override) cfg.dgp.seed = *seed_override;
    fs::create_directories(out_dir);

    const SimulatedPanel sim = simulate_panel(cfg.dgp, cfg.model);
    save_panel(sim.panel, (fs::path(out_dir) / "panel.tsv").string());

    std::vector<std::string> ids;
    for (const auto& r : sim.panel.riders) ids.push_back(r.rider_id);
    write_text_file((fs::path(out_dir) / "truth.tsv").string(),
                    truth_tsv(ids, sim.true_classes));

    json truth;
    truth["model"] = "dlcm";
    truth["theta"] = theta_to_json(sim.theta);
    truth["covariates"] = spec_to_json(cfg.model);
    truth["mu"] = cfg.dgp.mu;
    truth["memory"] = cfg.dgp.memory;
    truth["draws"] = cfg.em.draws;
    truth["seed"] = cfg.em.seed;
    json echo;
    echo["n_riders"] = cfg.dgp.n_riders;
    echo["t_init"] = cfg.dgp.t_init;
    echo["t_model"] = cfg.dgp.t_model;
    echo["attr_mean"] = cfg.dgp.attr_mean;
    echo["attr_sd"] = cfg.dgp.attr_sd;
    echo["memory"] = cfg.dgp.memory;
    echo["mu"] = cfg.dgp.mu;
    echo["seed"] = cfg.dgp.seed;
    echo["mask_unchosen"] = cfg.dgp.mask_unchosen;
    echo["init_choice_mode"] = cfg.dgp.init_choice_mode;
    truth["config"] = echo;
    json chi = json::array();
    for (long i = 0; i < sim.chi.rows(); ++i) {
        json row = json::array();
        for (long k = 0; k < sim.chi.cols(); ++k) row.push_back(sim.chi(i, k));
        chi.push_back(row);
    }
    truth["chi"] = chi;
    write_json_file((fs::path(out_dir) / "truth.json").string(), truth);
    write_text_file((fs::path(out_dir) / "estimate_config.ini").string(),
                    estimate_ini_for(cfg));

    RunManifest m;
    m.command = "simulate";
    m.config_path = config_path;
    m.out_dir = out_dir;
    m.seed = cfg.dgp.seed;
    m.threads = worker_threads();
    write_manifest(out_dir, m, timer.seconds());
    std::cout << "simulate: wrote " << sim.panel.riders.size() << " riders to " << out_dir
              << "\n";
    return kExitOk;
}

// Shared front half of estimate/decode/baseline: load, screen, design.
struct Prepared {
    PanelDataset screened;
    ScreeningReport report;
    std::vector<ProcessedRider> data;
};

Prepared prepare(const std::string& panel_path, const Config& cfg, double mu, int memory) {
    Prepared p;
    PanelDataset raw = load_panel(panel_path, sniff_schema(panel_path));
    auto [screened, report] = screen_riders(raw, cfg.screening);
    p.screened = std::move(screened);
    p.report = report;
    if (cfg.screening.discretize)
        p.screened = discretize_covariates(p.screened, cfg.screening);
    const SplitOptions split{cfg.screening.t_init_mode, cfg.screening.t_init_fixed};
    const ExpectationConfig expectation{mu, memory};
    p.data = build_designs(p.screened, cfg.model, expectation, split);
    return p;
}

int cmd_estimate(const std::string& panel_path, const std::string& config_path,
                 const std::string& out_dir, const std::vector<double>& mu_grid_flag,
                 const std::optional<std::uint64_t>& seed_override,
                 const std::optional<int>& memory_override) {
    Timer timer;
    Config cfg = load_config(config_path);
    if (seed_override) cfg.em.seed = *seed_override;
    if (memory_override) {
        if (*memory_override < 1) throw ConfigError("--memory must be >= 1");
        cfg.expectation.memory = *memory_override;
    }
    fs::create_directories(out_dir);

    Prepared p = prepare(panel_path, cfg, cfg.expectation.mu, cfg.expectation.memory);
    write_text_file((fs::path(out_dir) / "screening.txt").string(),
                    format_screening_report(p.report));
    write_json_file((fs::path(out_dir) / "screening.json").string(),
                    screening_to_json(p.report));
    if (p.data.empty()) throw DataError("no riders survive screening");

    std::vector<double> grid = mu_grid_flag.empty() ? cfg.em.mu_grid : mu_grid_flag;
    EstimationResult result;
    double mu_used = cfg.expectation.mu;
    if (!grid.empty()) {
        const auto builder = [&](double mu) {
            const SplitOptions split{cfg.screening.t_init_mode, cfg.screening.t_init_fixed};
            const ExpectationConfig expectation{mu, cfg.expectation.memory};
            return build_designs(p.screened, cfg.model, expectation, split);
        };
        const MuProfile prof = grid_search_mu(builder, grid, cfg.model, cfg.em);
        write_text_file((fs::path(out_dir) / "mu_profile.tsv").string(),
                        mu_profile_tsv(prof));
        write_json_file((fs::path(out_dir) / "mu_profile.json").string(),
                        mu_profile_to_json(prof));
        result = prof.best;
        mu_used = prof.best_mu;
    } else {
        result = em_estimate(p.data, cfg.model, cfg.em);
    }
    result.mu = mu_used;

    const ExpectationConfig used{mu_used, cfg.expectation.memory};
    write_json_file((fs::path(out_dir) / "result.json").string(),
                    estimation_to_json(result, cfg.model, used, cfg.em.draws));
    write_text_file((fs::path(out_dir) / "estimates.tsv").string(), estimates_tsv(result));
    write_text_file((fs::path(out_dir) / "trace.tsv").string(),
                    trace_tsv(result.loglik_trace));

    RunManifest m;
    m.command = "estimate";
    m.config_path = config_path;
    m.panel_path = panel_path;
    m.out_dir = out_dir;
    m.seed = cfg.em.seed;
    m.threads = worker_threads();
    write_manifest(out_dir, m, timer.seconds());
    std::cout << "estimate: loglik " << format_real(result.final_loglik) << " after "
              << result.iterations << " iterations (converged="
              << (result.converged ? "true" : "false") << ")\n";
    return kExitOk;
}

int cmd_decode(const std::string& panel_path, const std::string& result_path,
               const std::string& config_path, const std::string& truth_path,
               const std::string& out_dir) {
    Timer timer;
    const Config cfg = load_config(config_path);
    fs::create_directories(out_dir);

    const json rj = read_json_file(result_path);
    const CovariateSpec spec = spec_from_json(rj.at("covariates"));
    const Theta theta = theta_from_json(rj.at("theta"));
    const double mu = rj.at("mu").get<double>();
    const int memory = rj.at("memory").get<int>();
    const int draws_n = rj.at("draws").get<int>();
    const std::uint64_t seed = rj.at("seed").get<std::uint64_t>();

    Config cfg2 = cfg;
    cfg2.model = spec;
    Prepared p = prepare(panel_path, cfg2, mu, memory);

    if (p.data.empty()) {
        write_text_file((fs::path(out_dir) / "decoded.tsv").string(),
                        decoded_tsv({}));
        ClassShareReport empty_rep;
        write_json_file((fs::path(out_dir) / "class_share.json").string(),
                        class_share_to_json(empty_rep));
        std::cout << "decode: no riders survive screening; empty report written\n";
        RunManifest m;
        m.command = "decode";
        m.config_path = config_path;
        m.panel_path = panel_path;
        m.result_path = result_path;
        m.out_dir = out_dir;
        m.seed = seed;
        m.threads = worker_threads();
        write_manifest(out_dir, m, timer.seconds());
        return kExitOk;
    }

    const DrawSet draws =
        DrawSet::halton(static_cast<int>(p.data.size()), draws_n, spec.n_g(), seed);
    const auto decoded = viterbi_decode_all(p.data, theta, draws);
    const ClassShareReport share = class_share(decoded, p.data);

    write_text_file((fs::path(out_dir) / "decoded.tsv").string(), decoded_tsv(decoded));
    json share_json = class_share_to_json(share);

    if (!truth_path.empty()) {
        // truth.tsv: rider_id, t, true_class; join on rider order
        std::map<std::string, std::vector<int>> truth_map;
        std::istringstream is(read_text_file(truth_path));
        std::string line;
        if (!std::getline(is, line)) throw DataError(truth_path + ": empty truth file");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto parts = split(line, '\t');
            if (parts.size() != 3)
                throw DataError(truth_path + ": expected 3 columns per row");
            truth_map[trim(parts[0])].push_back(
                static_cast<int>(parse_int(trim(parts[2]), truth_path)));
        }
        std::vector<std::vector<int>> truth;
        for (const auto& d : decoded) {
            const auto it = truth_map.find(d.rider_id);
            if (it == truth_map.end())
                throw DataError("truth file has no rows for rider " + d.rider_id);
            truth.push_back(it->second);
        }
        share_json["accuracy_vs_truth"] = decode_accuracy(decoded, truth);
    }
    write_json_file((fs::path(out_dir) / "class_share.json").string(), share_json);

    RunManifest m;
    m.command = "decode";
    m.config_path = config_path;
    m.panel_path = panel_path;
    m.result_path = result_path;
    m.out_dir = out_dir;
    m.seed = seed;
    m.threads = worker_threads();
    write_manifest(out_dir, m, timer.seconds());
    std::cout << "decode: class-1 share " << format_real(share.overall_class1) << " over "
              << share.n_occasions << " occasions\n";
    if (share_json.contains("accuracy_vs_truth"))
        std::cout << "decode: accuracy vs truth "
                  << format_real(share_json["accuracy_vs_truth"].get<double>()) << "\n";
    return kExitOk;
}

int cmd_baseline(const std::string& panel_path, const std::string& config_path,
                 const std::string& out_dir, const std::string& model_flag,
                 const std::optional<std::uint64_t>& seed_override) {
    Timer timer;
    Config cfg = load_config(config_path);
    if (seed_override) cfg.baseline.seed = *seed_override;
    if (!model_flag.empty()) cfg.baseline.model = model_flag;
    if (cfg.baseline.model != "mnl" && cfg.baseline.model != "lcmnl")
        throw ConfigError("unknown baseline model kind '" + cfg.baseline.model +
                          "' (expected mnl or lcmnl)");
    fs::create_directories(out_dir);

    Prepared p = prepare(panel_path, cfg, cfg.expectation.mu, cfg.expectation.memory);
    if (p.data.empty()) throw DataError("no riders survive screening");

    const BaselineResult result = cfg.baseline.model == "mnl"
                                      ? fit_mnl(p.data, cfg.model, cfg.baseline)
                                      : fit_lc_mnl(p.data, cfg.model, cfg.baseline);

    write_json_file((fs::path(out_dir) / "baseline.json").string(), baseline_to_json(result));
    write_text_file((fs::path(out_dir) / "baseline.tsv").string(), baseline_tsv(result));

    RunManifest m;
    m.command = "baseline";
    m.config_path = config_path;
    m.panel_path = panel_path;
    m.out_dir = out_dir;
    m.seed = cfg.baseline.seed;
    m.threads = worker_threads();
    m.extra = cfg.baseline.model;
    write_manifest(out_dir, m, timer.seconds());
    std::cout << "baseline (" << result.kind << "): loglik " << format_real(result.loglik)
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic latent-class route-choice model (simulate / estimate / decode / "
                 "baseline)"};
    app.require_subcommand(1);

    std::string config_path, out_dir, panel_path, result_path, truth_path;
    std::string model_flag, mu_grid_text;
    std::uint64_t seed = 0;
    int threads = 1;
    int memory = 0;

    auto add_common = [&](CLI::App* sub, bool needs_panel) {
        sub->add_option("--config", config_path, "configuration file (INI)");
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--threads", threads, "worker thread cap (results are unaffected)");
        if (needs_panel)
            sub->add_option("--panel", panel_path, "panel file (TSV/CSV)")->required();
    };

    CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic panel with truth");
    add_common(sim, false);
    auto* sim_seed = sim->add_option("--seed", seed, "override the generator seed");

    CLI::App* est = app.add_subcommand("estimate", "fit the dynamic latent-class model");
    add_common(est, true);
    auto* est_seed = est->add_option("--seed", seed, "override the EM seed");
    auto* est_grid = est->add_option("--mu-grid", mu_grid_text,
                                     "profile the decay exponent over 'lo:hi:step'");
    auto* est_mem = est->add_option("--memory", memory, "override the memory window");

    CLI::App* dec = app.add_subcommand("decode", "recover latent-class sequences");
    add_common(dec, true);
    dec->add_option("--result", result_path, "fitted result document (JSON)")->required();
    dec->add_option("--truth", truth_path, "truth sidecar for accuracy (TSV)");

    CLI::App* base = app.add_subcommand("baseline", "fit the MNL / LC-MNL baselines");
    add_common(base, true);
    auto* base_seed = base->add_option("--seed", seed, "override the baseline seed");
    base->add_option("--model", model_flag, "baseline kind: mnl or lcmnl");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        set_worker_threads(std::max(1, threads));
        const std::optional<std::uint64_t> seed_override =
            (sim_seed->count() + est_seed->count() + base_seed->count()) > 0
                ? std::optional<std::uint64_t>(seed)
                : std::nullopt;
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed_override);
        if (est->parsed()) {
            std::vector<double> grid;
            if (est_grid->count() > 0) grid = parse_grid(mu_grid_text);
            const std::optional<int> memory_override =
                est_mem->count() > 0 ? std::optional<int>(memory) : std::nullopt;
            return cmd_estimate(panel_path, config_path, out_dir, grid, seed_override,
                                memory_override);
        }
        if (dec->parsed())
            return cmd_decode(panel_path, result_path, config_path, truth_path, out_dir);
        if (base->parsed())
            return cmd_baseline(panel_path, config_path, out_dir, model_flag, seed_override);
        std::cerr << "no subcommand given\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}
