#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dlcm/types.hpp"

namespace dlcm {

// Minimal INI-style reader: [section] headers, key = value lines, '#' or ';'
// comments. Section and key names are case-sensitive; values keep inner spaces.
struct IniFile {
    // section -> key -> value; "" section for keys before any header
    std::map<std::string, std::map<std::string, std::string>> sections;

    static IniFile parse_string(const std::string& text, const std::string& origin = "<string>");
    static IniFile parse_file(const std::string& path);
};

struct ScreeningConfig {
    bool enabled = true;          // master switch for steps 1-3 (step 4 is structural)
    int min_choices = 5;          // step 1 threshold
    int max_other_od_trips = 2;   // step 2: drop if more trips than this off the modal OD; -1 disables
    bool rule3 = true;            // step 3 on/off (single-route / one-switch riders)
    std::string t_init_mode = "auto";  // "auto" (data-driven split) or "fixed"
    int t_init_fixed = 10;

    bool discretize = false;      // add crowding/standing-probability bands + interactions
    std::vector<double> crowding_thresholds = {1.0, 2.0};
    std::vector<double> sp_thresholds = {0.4, 0.7};
    std::string crowding_attr = "crowding";
    std::string sp_attr = "standing_prob";
    std::string tt_attr = "travel_time";
};

struct ExpectationConfig {
    double mu = 1.0;
    int memory = 3;
};

struct EMConfig {
    double tolerance = 1e-6;
    int max_iterations = 5000;
    int n_starts = 5;
    int draws = 200;              // simulation draws R per rider
    std::uint64_t seed = 1;
    double inner_gtol = 1e-7;     // M-step optimiser gradient tolerance
    int inner_max_iter = 200;
    std::vector<double> mu_grid;  // non-empty => grid search over mu
    bool compute_se = true;
};

struct DGPConfig {
    int n_riders = 2000;
    int t_init = 10;
    int t_model = 20;
    double attr_mean = 1.5;
    double attr_sd = 0.3;
    int memory = 3;
    double mu = 1.0;
    std::uint64_t seed = 1;
    bool mask_unchosen = false;          // true: export experienced attributes only
    std::string init_choice_mode = "noncomp";  // "noncomp" or "fair"
    Theta true_theta;                    // defaults to the benchmark generating values
};

struct BaselineConfig {
    std::string model = "mnl";  // "mnl" or "lcmnl"
    int n_starts = 5;
    double tolerance = 1e-8;
    int max_iterations = 2000;
    std::uint64_t seed = 1;
};

struct Config {
    ScreeningConfig screening;
    ExpectationConfig expectation;
    CovariateSpec model;
    EMConfig em;
    DGPConfig dgp;
    BaselineConfig baseline;

    // Default generating values: 2-component mismatch blocks with constants,
    // 2 fixed + 2 random choice attributes, inertia (1, 2).
    static Theta default_true_theta();
    static CovariateSpec default_covariates();
    static Config defaults();

    // Parse + validate; unknown sections or keys raise ConfigError naming them.
    static Config from_ini(const IniFile& ini);
    static Config from_file(const std::string& path);
};

// "lo:hi:step" -> inclusive grid (also accepts a comma-separated list).
std::vector<double> parse_grid(const std::string& text);

}  // namespace dlcm
