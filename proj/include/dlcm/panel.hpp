#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dlcm/config.hpp"
#include "dlcm/types.hpp"

namespace dlcm {

// Column mapping for load_panel. attribute_cols order defines the attribute
// vector layout of the loaded dataset.
struct PanelSchema {
    std::string rider_col = "rider_id";
    std::string occasion_col = "occasion";
    std::string route_col = "chosen_route";
    std::string od_col;  // optional; empty => panel has a single OD
    std::vector<std::string> attribute_cols;
};

// Loads a delimiter-separated panel (tab or comma, sniffed from the header).
// Trips are sorted by the occasion column and re-indexed 1..n per rider; the
// occasion column only fixes ordering and uniqueness.
PanelDataset load_panel(const std::string& path, const PanelSchema& schema);

void save_panel(const PanelDataset& data, const std::string& path, char sep = '\t');

// Data-driven initialisation split: smallest t such that both routes appear
// in occasions 1..t and the route chosen at t has an earlier experience.
// ok=false when no such t exists or fewer than 2 modelling occasions remain.
struct SplitResult {
    int t_init = 0;
    int t_model = 0;
    bool ok = false;
};
SplitResult split_initialisation(const RiderRecord& rider);
SplitResult split_initialisation(const std::vector<int>& choices);

// Applies the four screening steps in order; survivors keep modal-OD trips
// re-indexed 1..n and get od_pair set to the modal OD.
std::pair<PanelDataset, ScreeningReport> screen_riders(const PanelDataset& data,
                                                       const ScreeningConfig& rules);

// Adds crowding/standing-probability band indicators and the four
// travel-time x band interaction columns.
PanelDataset discretize_covariates(const PanelDataset& data, const ScreeningConfig& rules);

// Named history covariates of a choice sequence, computed over occasions
// 1..t inclusive (proportions of the full sequence use its total length).
struct HistoryCovariates {
    double prop_trans_last = 0.0;   // transitions among occasions <= t, / t
    double prop_trans_total = 0.0;  // transitions over the full sequence / length
    double prop_modal = 0.0;        // modal-route share over the full sequence
    double choice_prop_r1 = 0.0;    // share of route 1 among occasions <= t
    double choice_prop_r2 = 0.0;
    double lag_route1 = 0.0;        // 1 if the choice at t-1 was route 1 (0 at t = 1)
};
HistoryCovariates history_covariates(const std::vector<int>& choices, int t);
HistoryCovariates history_covariates(const RiderRecord& rider, int t);

// Lookup by canonical name: prop_trans_last, prop_trans_total, prop_modal,
// choice_prop_r1, choice_prop_r2, choice_prop_diff, lag_route1.
double history_value(const HistoryCovariates& h, const std::string& name);

std::vector<int> choice_sequence(const RiderRecord& rider);

// Flat key-value rendering of the screening report.
std::string format_screening_report(const ScreeningReport& report);

}  // namespace dlcm
