#pragma once

// Shared hand-crafted fixtures for tests.

#include <string>
#include <vector>

#include "dlcm/types.hpp"

namespace fixtures {

inline dlcm::RiderRecord make_rider(const std::string& id, const std::vector<int>& choices,
                                    const std::vector<std::string>& ods = {}) {
    dlcm::RiderRecord r;
    r.rider_id = id;
    for (std::size_t k = 0; k < choices.size(); ++k) {
        dlcm::TripRecord t;
        t.occasion = static_cast<int>(k) + 1;
        t.chosen_route = choices[k];
        if (!ods.empty()) t.od = ods[k];
        t.attributes = Eigen::VectorXd::Constant(1, 0.1 * static_cast<double>(k + 1));
        r.trips.push_back(t);
    }
    return r;
}

// Ten crafted riders covering every screening rule, with the survivor set
// derived by hand:
//   R01  4 trips                      -> removed, step 1 (fewer than 5 choices)
//   R02  8 trips OD A + 4 trips OD B  -> removed, step 2 (4 > 2 off-modal trips)
//   R03  route 1 only                 -> removed, step 3 (single route)
//   R04  1111122222 (5/5 tie)         -> removed, step 3 (one switch into 2)
//   R05  1121111112                   -> survives; T_I = 4, T = 6
//   R06  1111212                      -> removed, step 4 (first valid split
//                                        leaves T = 1)
//   R07  1121121121                   -> survives; T_I = 4, T = 6
//   R08  8 trips OD A + 2 trips OD B  -> survives on the 8 modal trips
//                                        12112111 -> T_I = 3, T = 5
//   R09  112111                       -> removed, step 3 (route 2 chosen once)
//   R10  2212212212                   -> survives; T_I = 4, T = 6
struct ScreeningFixture {
    dlcm::PanelDataset panel;
    std::vector<std::string> expected_survivors;
    long expected_after_step1 = 9;
    long expected_after_step2 = 8;
    long expected_after_step3 = 5;
    long expected_after_step4 = 4;
};

inline ScreeningFixture screening_fixture() {
    ScreeningFixture fx;
    fx.panel.attribute_names = {"tt"};
    auto add = [&](const dlcm::RiderRecord& r) { fx.panel.riders.push_back(r); };

    add(make_rider("R01", {1, 2, 1, 2}));
    // R02: interleave a second OD often enough to trip the contamination rule
    add(make_rider("R02", {1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 1},
                   {"A", "A", "B", "A", "B", "A", "B", "A", "B", "A", "A", "A"}));
    add(make_rider("R03", {1, 1, 1, 1, 1, 1, 1, 1, 1, 1}));
    add(make_rider("R04", {1, 1, 1, 1, 1, 2, 2, 2, 2, 2}));
    add(make_rider("R05", {1, 1, 2, 1, 1, 1, 1, 1, 1, 2}));
    add(make_rider("R06", {1, 1, 1, 1, 2, 1, 2}));
    add(make_rider("R07", {1, 1, 2, 1, 1, 2, 1, 1, 2, 1}));
    // R08: modal OD A keeps choices {1,2,1,1,2,1,1,1}; the two B trips drop out
    add(make_rider("R08", {1, 2, 2, 1, 1, 2, 1, 2, 1, 1},
                   {"A", "A", "B", "A", "A", "A", "A", "B", "A", "A"}));
    add(make_rider("R09", {1, 1, 2, 1, 1, 1}));
    add(make_rider("R10", {2, 2, 1, 2, 2, 1, 2, 2, 1, 2}));

    fx.expected_survivors = {"R05", "R07", "R08", "R10"};
    return fx;
}

}  // namespace fixtures
