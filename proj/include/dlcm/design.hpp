#pragma once

#include <string>
#include <vector>

#include "dlcm/config.hpp"
#include "dlcm/types.hpp"

namespace dlcm {

// Power-law decay weights over past occasions: w_k ~ (current - past_k)^(-mu),
// normalised to sum to 1. Ordering matches the input.
Eigen::VectorXd decay_weights(int current, const std::vector<int>& past, double mu);

// Incrementally tracks per-route experiences and serves decay-weighted
// expectations over the most recent `memory` experiences of a route,
// lags measured in overall occasion units.
class ExpectationTracker {
  public:
    explicit ExpectationTracker(int n_attrs) : n_attrs_(n_attrs) {}

    void add_experience(int occasion, int route, const Eigen::VectorXd& attrs);
    // Any experience of this route strictly before occasion t?
    bool available(int route, int t) const;
    Eigen::VectorXd expect(int route, int t, double mu, int memory) const;

  private:
    int n_attrs_;
    struct Exp {
        int occasion;
        Eigen::VectorXd attrs;
    };
    std::vector<Exp> exps_[2];
};

// Expectation of the full attribute vector for `route` at occasion t, built
// from the rider's most recent `memory` experiences of that route before t.
Eigen::VectorXd expected_attributes(const RiderRecord& rider, int route, int t,
                                    const ExpectationConfig& config);

struct SplitOptions {
    std::string mode = "auto";  // "auto" or "fixed"
    int t_init_fixed = 10;
};

// Precomputes everything the likelihood needs for one rider.
ProcessedRider build_design(const RiderRecord& rider,
                            const std::vector<std::string>& attribute_names,
                            const CovariateSpec& spec, const ExpectationConfig& config,
                            const SplitOptions& split);

std::vector<ProcessedRider> build_designs(const PanelDataset& data, const CovariateSpec& spec,
                                          const ExpectationConfig& config,
                                          const SplitOptions& split);

// Parameter names in packed order (used by reports and standard errors).
std::vector<std::string> parameter_names(const CovariateSpec& spec);

// Debug dump of one ProcessedRider as tab-separated text.
std::string dump_design(const ProcessedRider& pr);

}  // namespace dlcm
