#include "dlcm/panel.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "dlcm/util.hpp"

namespace dlcm {

namespace {

char sniff_delimiter(const std::string& header) {
    if (header.find('\t') != std::string::npos) return '\t';
    if (header.find(',') != std::string::npos) return ',';
    throw DataError("panel header has neither tab nor comma delimiters");
}

ScreeningReport::Quantiles summarize(std::vector<double> v) {
    ScreeningReport::Quantiles q;
    if (v.empty()) return q;
    std::sort(v.begin(), v.end());
    auto quantile = [&](double p) {
        const double idx = p * static_cast<double>(v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        const double frac = idx - static_cast<double>(lo);
        return v[lo] * (1.0 - frac) + v[hi] * frac;
    };
    q.min = v.front();
    q.p25 = quantile(0.25);
    q.median = quantile(0.5);
    q.p75 = quantile(0.75);
    q.max = v.back();
    q.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return q;
}

}  // namespace

PanelDataset load_panel(const std::string& path, const PanelSchema& schema) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open panel file: " + path);

    std::string header;
    if (!std::getline(f, header)) throw DataError(path + ": empty panel file");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const char sep = sniff_delimiter(header);
    const auto cols = split(header, sep);

    auto col_index = [&](const std::string& name, bool required) -> int {
        for (std::size_t k = 0; k < cols.size(); ++k)
            if (trim(cols[k]) == name) return static_cast<int>(k);
        if (required) throw DataError(path + ": missing mandatory column '" + name + "'");
        return -1;
    };

    const int c_rider = col_index(schema.rider_col, true);
    const int c_occ = col_index(schema.occasion_col, true);
    const int c_route = col_index(schema.route_col, true);
    const int c_od = schema.od_col.empty() ? -1 : col_index(schema.od_col, true);
    std::vector<int> c_attr;
    for (const auto& a : schema.attribute_cols) c_attr.push_back(col_index(a, true));

    PanelDataset data;
    data.attribute_names = schema.attribute_cols;

    std::map<std::string, std::size_t> rider_index;
    // (rider, occasion) uniqueness
    std::set<std::pair<std::string, long long>> seen;

    std::string line;
    long lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split(line, sep);
        if (fields.size() != cols.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(cols.size()) + " fields, got " +
                            std::to_string(fields.size()));
        const std::string where = path + ":" + std::to_string(lineno);

        const std::string rid = trim(fields[static_cast<std::size_t>(c_rider)]);
        if (rid.empty()) throw DataError(where + ": empty rider id");
        const long long occ =
            parse_int(fields[static_cast<std::size_t>(c_occ)], where + " occasion");
        if (occ < 1) throw DataError(where + ": occasion must be >= 1");
        const long long route =
            parse_int(fields[static_cast<std::size_t>(c_route)], where + " chosen_route");
        if (route != 1 && route != 2)
            throw DataError(where + ": chosen_route must be 1 or 2, got " +
                            std::to_string(route));
        if (!seen.insert({rid, occ}).second)
            throw DataError(where + ": duplicate (rider, occasion) = (" + rid + ", " +
                            std::to_string(occ) + ")");

        TripRecord trip;
        trip.occasion = static_cast<int>(occ);
        trip.chosen_route = static_cast<int>(route);
        if (c_od >= 0) trip.od = trim(fields[static_cast<std::size_t>(c_od)]);
        trip.attributes.resize(static_cast<long>(c_attr.size()));
        for (std::size_t k = 0; k < c_attr.size(); ++k)
            trip.attributes[static_cast<long>(k)] = parse_real(
                fields[static_cast<std::size_t>(c_attr[k])],
                where + " " + schema.attribute_cols[k]);
        // attribute values must be finite
        for (long k = 0; k < trip.attributes.size(); ++k)
            if (!std::isfinite(trip.attributes[k]))
                throw DataError(where + ": non-finite attribute " + schema.attribute_cols
                                    [static_cast<std::size_t>(k)]);

        auto it = rider_index.find(rid);
        if (it == rider_index.end()) {
            rider_index.emplace(rid, data.riders.size());
            RiderRecord r;
            r.rider_id = rid;
            r.trips.push_back(std::move(trip));
            data.riders.push_back(std::move(r));
        } else {
            data.riders[it->second].trips.push_back(std::move(trip));
        }
    }

    for (auto& rider : data.riders) {
        std::stable_sort(rider.trips.begin(), rider.trips.end(),
                         [](const TripRecord& a, const TripRecord& b) {
                             return a.occasion < b.occasion;
                         });
        for (std::size_t k = 0; k < rider.trips.size(); ++k)
            rider.trips[k].occasion = static_cast<int>(k) + 1;
    }
    return data;
}

void save_panel(const PanelDataset& data, const std::string& path, char sep) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write panel file: " + path);
    const bool has_od = std::any_of(data.riders.begin(), data.riders.end(), [](const auto& r) {
        return std::any_of(r.trips.begin(), r.trips.end(),
                           [](const TripRecord& t) { return !t.od.empty(); });
    });
    f << "rider_id" << sep << "occasion" << sep << "chosen_route";
    if (has_od) f << sep << "od";
    for (const auto& a : data.attribute_names) f << sep << a;
    f << '\n';
    for (const auto& rider : data.riders) {
        for (const auto& trip : rider.trips) {
            f << rider.rider_id << sep << trip.occasion << sep << trip.chosen_route;
            if (has_od) f << sep << trip.od;
            for (long k = 0; k < trip.attributes.size(); ++k)
                f << sep << format_real(trip.attributes[k], 17);
            f << '\n';
        }
    }
    if (!f) throw DataError("failed writing panel file: " + path);
}

std::vector<int> choice_sequence(const RiderRecord& rider) {
    std::vector<int> y;
    y.reserve(rider.trips.size());
    for (const auto& t : rider.trips) y.push_back(t.chosen_route);
    return y;
}

SplitResult split_initialisation(const std::vector<int>& choices) {
    SplitResult res;
    const int n = static_cast<int>(choices.size());
    bool seen1 = false, seen2 = false;
    for (int t = 1; t <= n; ++t) {
        const int yt = choices[static_cast<std::size_t>(t - 1)];
        // condition (b): the route chosen at t has an earlier experience
        bool prior = false;
        for (int u = 1; u < t; ++u)
            if (choices[static_cast<std::size_t>(u - 1)] == yt) {
                prior = true;
                break;
            }
        seen1 = seen1 || yt == 1;
        seen2 = seen2 || yt == 2;
        if (seen1 && seen2 && prior) {
            res.t_init = t;
            res.t_model = n - t;
            res.ok = res.t_model >= 2;
            return res;
        }
    }
    return res;  // no valid split
}

SplitResult split_initialisation(const RiderRecord& rider) {
    return split_initialisation(choice_sequence(rider));
}

std::pair<PanelDataset, ScreeningReport> screen_riders(const PanelDataset& data,
                                                       const ScreeningConfig& rules) {
    ScreeningReport report;
    report.n_input = static_cast<long>(data.riders.size());

    PanelDataset out;
    out.attribute_names = data.attribute_names;

    std::vector<RiderRecord> stage = data.riders;

    // Step 1: minimum observed choices.
    {
        std::vector<RiderRecord> kept;
        for (auto& rider : stage) {
            if (rules.enabled &&
                static_cast<int>(rider.trips.size()) < rules.min_choices) {
                ++report.removals["step1_min_choices"];
            } else {
                kept.push_back(std::move(rider));
            }
        }
        stage = std::move(kept);
        report.n_after_min_choices = static_cast<long>(stage.size());
    }

    // Step 2: OD contamination. The modal OD is the rider's most-travelled OD
    // (ties broken to the lexicographically smallest label); riders with more
    // than max_other_od_trips trips on other ODs are dropped, and survivors
    // keep only modal-OD trips, re-indexed.
    {
        std::vector<RiderRecord> kept;
        for (auto& rider : stage) {
            std::map<std::string, int> od_counts;
            for (const auto& trip : rider.trips) ++od_counts[trip.od];
            std::string modal;
            int best = -1;
            for (const auto& [od, cnt] : od_counts)
                if (cnt > best) {
                    best = cnt;
                    modal = od;
                }
            const int other =
                static_cast<int>(rider.trips.size()) - od_counts[modal];
            if (rules.enabled && rules.max_other_od_trips >= 0 &&
                other > rules.max_other_od_trips) {
                ++report.removals["step2_od_contamination"];
                continue;
            }
            if (other > 0) {
                std::vector<TripRecord> trips;
                trips.reserve(rider.trips.size());
                for (auto& trip : rider.trips)
                    if (trip.od == modal) trips.push_back(std::move(trip));
                rider.trips = std::move(trips);
                for (std::size_t k = 0; k < rider.trips.size(); ++k)
                    rider.trips[k].occasion = static_cast<int>(k) + 1;
            }
            rider.od_pair = modal;
            kept.push_back(std::move(rider));
        }
        stage = std::move(kept);
        report.n_after_od = static_cast<long>(stage.size());
    }

    // Step 3: single-route riders, or riders entering the least-chosen route
    // exactly once. On a count tie the rule is applied to both routes.
    {
        std::vector<RiderRecord> kept;
        for (auto& rider : stage) {
            bool drop = false;
            if (rules.enabled && rules.rule3) {
                const auto y = choice_sequence(rider);
                const int n1 = static_cast<int>(std::count(y.begin(), y.end(), 1));
                const int n2 = static_cast<int>(y.size()) - n1;
                auto triggers = [&](int route, int count) {
                    if (count <= 1) return true;
                    int switches_in = 0;
                    for (std::size_t t = 1; t < y.size(); ++t)
                        if (y[t] == route && y[t - 1] != route) ++switches_in;
                    return switches_in == 1;
                };
                if (n1 < n2) drop = triggers(1, n1);
                else if (n2 < n1) drop = triggers(2, n2);
                else drop = triggers(1, n1) || triggers(2, n2);
            }
            if (drop) ++report.removals["step3_route_mix"];
            else kept.push_back(std::move(rider));
        }
        stage = std::move(kept);
        report.n_after_route_mix = static_cast<long>(stage.size());
    }

    // Step 4: a valid initialisation split with at least 2 modelling occasions.
    {
        std::vector<double> totals, models;
        for (auto& rider : stage) {
            SplitResult sr;
            if (rules.t_init_mode == "fixed") {
                const int n = static_cast<int>(rider.trips.size());
                sr.t_init = rules.t_init_fixed;
                sr.t_model = n - rules.t_init_fixed;
                sr.ok = sr.t_model >= 2;
                if (sr.ok) {
                    const auto y = choice_sequence(rider);
                    bool seen1 = false, seen2 = false, prior = false;
                    for (int t = 1; t <= sr.t_init; ++t) {
                        const int yt = y[static_cast<std::size_t>(t - 1)];
                        if (t < sr.t_init && yt == y[static_cast<std::size_t>(sr.t_init - 1)])
                            prior = true;
                        seen1 = seen1 || yt == 1;
                        seen2 = seen2 || yt == 2;
                    }
                    sr.ok = seen1 && seen2 && prior;
                }
            } else {
                sr = split_initialisation(rider);
            }
            if (!sr.ok) {
                ++report.removals["step4_initialisation_split"];
                continue;
            }
            totals.push_back(static_cast<double>(rider.trips.size()));
            models.push_back(static_cast<double>(sr.t_model));
            out.riders.push_back(std::move(rider));
        }
        report.n_after_tinit = static_cast<long>(out.riders.size());
        report.total_occasions = summarize(totals);
        report.model_occasions = summarize(models);
    }

    return {std::move(out), report};
}

PanelDataset discretize_covariates(const PanelDataset& data, const ScreeningConfig& rules) {
    if (rules.crowding_thresholds.size() != 2 || rules.sp_thresholds.size() != 2)
        throw ConfigError("discretisation expects exactly 2 thresholds per attribute");
    auto find_attr = [&](const std::string& name) -> int {
        for (std::size_t k = 0; k < data.attribute_names.size(); ++k)
            if (data.attribute_names[k] == name) return static_cast<int>(k);
        throw DataError("discretisation: attribute column '" + name + "' not in panel");
    };
    const int a_crowd = find_attr(rules.crowding_attr);
    const int a_sp = find_attr(rules.sp_attr);
    const int a_tt = find_attr(rules.tt_attr);
    const double c1 = rules.crowding_thresholds[0];
    const double c2 = rules.crowding_thresholds[1];
    const double s1 = rules.sp_thresholds[0];
    const double s2 = rules.sp_thresholds[1];

    PanelDataset out = data;
    for (const auto& name : {std::string("crowding1"), std::string("crowding2"),
                             std::string("sp1"), std::string("sp2"),
                             std::string("tt_x_c1sp1"), std::string("tt_x_c1sp2"),
                             std::string("tt_x_c2sp1"), std::string("tt_x_c2sp2")}) {
        if (std::find(out.attribute_names.begin(), out.attribute_names.end(), name) !=
            out.attribute_names.end())
            throw DataError("discretisation would overwrite existing column '" + name + "'");
        out.attribute_names.push_back(name);
    }

    for (auto& rider : out.riders) {
        for (auto& trip : rider.trips) {
            const double crowd = trip.attributes[a_crowd];
            const double sp = trip.attributes[a_sp];
            const double tt = trip.attributes[a_tt];
            if (crowd < 0.0)
                throw DataError("rider " + rider.rider_id + ": crowding density must be >= 0");
            if (sp < 0.0 || sp > 1.0)
                throw DataError("rider " + rider.rider_id +
                                ": standing probability must lie in [0,1]");
            if (tt <= 0.0)
                throw DataError("rider " + rider.rider_id + ": travel time must be > 0");
            // bands are left-closed/right-open; the top band is right-closed
            const double cb1 = (crowd >= c1 && crowd < c2) ? 1.0 : 0.0;
            const double cb2 = crowd >= c2 ? 1.0 : 0.0;
            const double sb1 = (sp >= s1 && sp < s2) ? 1.0 : 0.0;
            const double sb2 = sp >= s2 ? 1.0 : 0.0;
            Eigen::VectorXd ext(trip.attributes.size() + 8);
            ext.head(trip.attributes.size()) = trip.attributes;
            const long base = trip.attributes.size();
            ext[base + 0] = cb1;
            ext[base + 1] = cb2;
            ext[base + 2] = sb1;
            ext[base + 3] = sb2;
            ext[base + 4] = tt * cb1 * sb1;
            ext[base + 5] = tt * cb1 * sb2;
            ext[base + 6] = tt * cb2 * sb1;
            ext[base + 7] = tt * cb2 * sb2;
            trip.attributes = std::move(ext);
        }
    }
    return out;
}

HistoryCovariates history_covariates(const std::vector<int>& choices, int t) {
    const int n = static_cast<int>(choices.size());
    if (t < 1 || t > n)
        throw DataError("history_covariates: occasion " + std::to_string(t) +
                        " outside 1.." + std::to_string(n));
    HistoryCovariates h;
    int trans_t = 0, trans_total = 0, n1_t = 0, n1_total = 0;
    for (int u = 1; u <= n; ++u) {
        const int yu = choices[static_cast<std::size_t>(u - 1)];
        const bool sw = u >= 2 && yu != choices[static_cast<std::size_t>(u - 2)];
        if (sw) ++trans_total;
        if (yu == 1) ++n1_total;
        if (u <= t) {
            if (sw) ++trans_t;
            if (yu == 1) ++n1_t;
        }
    }
    h.prop_trans_last = static_cast<double>(trans_t) / static_cast<double>(t);
    h.prop_trans_total = static_cast<double>(trans_total) / static_cast<double>(n);
    h.prop_modal =
        static_cast<double>(std::max(n1_total, n - n1_total)) / static_cast<double>(n);
    h.choice_prop_r1 = static_cast<double>(n1_t) / static_cast<double>(t);
    h.choice_prop_r2 = 1.0 - h.choice_prop_r1;
    h.lag_route1 = (t >= 2 && choices[static_cast<std::size_t>(t - 2)] == 1) ? 1.0 : 0.0;
    return h;
}

HistoryCovariates history_covariates(const RiderRecord& rider, int t) {
    return history_covariates(choice_sequence(rider), t);
}

double history_value(const HistoryCovariates& h, const std::string& name) {
    if (name == "prop_trans_last") return h.prop_trans_last;
    if (name == "prop_trans_total") return h.prop_trans_total;
    if (name == "prop_modal") return h.prop_modal;
    if (name == "choice_prop_r1") return h.choice_prop_r1;
    if (name == "choice_prop_r2") return h.choice_prop_r2;
    if (name == "choice_prop_diff") return h.choice_prop_r1 - h.choice_prop_r2;
    if (name == "lag_route1") return h.lag_route1;
    throw ConfigError("unknown history covariate '" + name + "'");
}

std::string format_screening_report(const ScreeningReport& r) {
    std::ostringstream os;
    os << "riders_input = " << r.n_input << '\n';
    os << "riders_after_step1_min_choices = " << r.n_after_min_choices << '\n';
    os << "riders_after_step2_od = " << r.n_after_od << '\n';
    os << "riders_after_step3_route_mix = " << r.n_after_route_mix << '\n';
    os << "riders_after_step4_initialisation = " << r.n_after_tinit << '\n';
    for (const auto& [reason, count] : r.removals)
        os << "removed." << reason << " = " << count << '\n';
    auto dump = [&os](const std::string& name, const ScreeningReport::Quantiles& q) {
        os << name << ".min = " << format_real(q.min) << '\n';
        os << name << ".p25 = " << format_real(q.p25) << '\n';
        os << name << ".median = " << format_real(q.median) << '\n';
        os << name << ".p75 = " << format_real(q.p75) << '\n';
        os << name << ".max = " << format_real(q.max) << '\n';
        os << name << ".mean = " << format_real(q.mean) << '\n';
    };
    dump("total_occasions", r.total_occasions);
    dump("model_occasions", r.model_occasions);
    return os.str();
}

}  // namespace dlcm
