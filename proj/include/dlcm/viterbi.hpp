#pragma once

#include <vector>

#include "dlcm/draws.hpp"
#include "dlcm/model.hpp"
#include "dlcm/types.hpp"

namespace dlcm {

// Most probable latent-class sequence for one rider under the fitted model.
// Log-space dynamic program over the two classes; emissions are the same
// per-period marginal kernels used in estimation. Ties break toward class 1
// (the lexicographically smallest sequence).
DecodedSequence viterbi_decode(const ProcessedRider& rider, const Theta& theta,
                               const Eigen::MatrixXd& rider_draws);

std::vector<DecodedSequence> viterbi_decode_all(const std::vector<ProcessedRider>& data,
                                                const Theta& theta, const DrawSet& draws);

// Fraction of (rider, t) cells where the decoded class equals the true class.
// `truth` must be aligned with `decoded` (same riders, same horizons).
double decode_accuracy(const std::vector<DecodedSequence>& decoded,
                       const std::vector<std::vector<int>>& truth);

// Share of occasions decoded as class 1, overall and by total panel length
// (t_init + t_model): short < 10, medium 10..20, long > 20.
ClassShareReport class_share(const std::vector<DecodedSequence>& decoded,
                             const std::vector<ProcessedRider>& data);

}  // namespace dlcm
