#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dlcm/config.hpp"
#include "dlcm/em.hpp"
#include "dlcm/types.hpp"

namespace dlcm {

inline constexpr const char* kToolVersion = "0.1.0";

using json = nlohmann::json;

// One manifest is written next to the outputs of every CLI run. Timestamps
// live only here so that the primary outputs stay byte-identical across runs.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::string panel_path;
    std::string result_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string extra;  // free-form note (model kind, grid, ...)
    double wall_seconds = 0.0;
    std::string started_at;  // ISO-8601 UTC
};

json manifest_to_json(const RunManifest& m);
std::string iso_utc_now();

// covariate specification round-trip (embedded in result documents)
json spec_to_json(const CovariateSpec& spec);
CovariateSpec spec_from_json(const json& j);

// parameter-block round-trip
json theta_to_json(const Theta& theta);
Theta theta_from_json(const json& j);

// result documents
json estimation_to_json(const EstimationResult& result, const CovariateSpec& spec,
                        const ExpectationConfig& expectation, int draws);
json baseline_to_json(const BaselineResult& result);
json screening_to_json(const ScreeningReport& report);
json class_share_to_json(const ClassShareReport& report);
json mu_profile_to_json(const MuProfile& profile);

// tabular exports (tab-separated, one header row)
std::string estimates_tsv(const EstimationResult& result);
std::string baseline_tsv(const BaselineResult& result);
std::string trace_tsv(const std::vector<double>& loglik_trace);
std::string decoded_tsv(const std::vector<DecodedSequence>& decoded);
std::string mu_profile_tsv(const MuProfile& profile);
std::string truth_tsv(const std::vector<std::string>& rider_ids,
                      const std::vector<std::vector<int>>& true_classes);

// small file helpers
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace dlcm
