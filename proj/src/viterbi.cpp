#include "dlcm/viterbi.hpp"

#include <cmath>

#include "dlcm/em.hpp"
#include "dlcm/util.hpp"

namespace dlcm {

DecodedSequence viterbi_decode(const ProcessedRider& rider, const Theta& theta,
                               const Eigen::MatrixXd& rider_draws) {
    const RiderKernels k = rider_kernels(rider, theta, rider_draws);
    const long T = k.emis.rows();

    Eigen::MatrixXd delta(T, 2);
    Eigen::MatrixXi argprev(T, 2);
    delta(0, 0) = safe_log(k.init1) + safe_log(k.emis(0, 0));
    delta(0, 1) = safe_log(1.0 - k.init1) + safe_log(k.emis(0, 1));
    argprev.row(0).setZero();

    for (long t = 1; t < T; ++t) {
        const double p11 = k.ptrans1(t - 1, 0);
        const double p21 = k.ptrans1(t - 1, 1);
        // candidate scores into class s from r = 1, 2; ties keep r = 1
        const double to1_from1 = delta(t - 1, 0) + safe_log(p11);
        const double to1_from2 = delta(t - 1, 1) + safe_log(p21);
        const double to2_from1 = delta(t - 1, 0) + safe_log(1.0 - p11);
        const double to2_from2 = delta(t - 1, 1) + safe_log(1.0 - p21);
        argprev(t, 0) = to1_from2 > to1_from1 ? 1 : 0;
        argprev(t, 1) = to2_from2 > to2_from1 ? 1 : 0;
        delta(t, 0) = std::max(to1_from1, to1_from2) + safe_log(k.emis(t, 0));
        delta(t, 1) = std::max(to2_from1, to2_from2) + safe_log(k.emis(t, 1));
    }
    if (!delta.allFinite())
        throw NumericError("viterbi_decode: non-finite score for rider " + rider.rider_id);

    DecodedSequence out;
    out.rider_id = rider.rider_id;
    out.classes.resize(T);
    int cur = delta(T - 1, 1) > delta(T - 1, 0) ? 1 : 0;
    out.log_joint = delta(T - 1, cur);
    for (long t = T - 1; t >= 0; --t) {
        out.classes[t] = cur + 1;
        cur = argprev(t, cur);
    }

    // diagnostic column: per-occasion argmax of the smoothed marginals
    const ForwardOut fw = forward(k);
    const Eigen::MatrixXd bw = backward(k, fw.scale);
    out.marginal_classes.resize(T);
    for (long t = 0; t < T; ++t)
        out.marginal_classes[t] =
            fw.alpha(t, 1) * bw(t, 1) > fw.alpha(t, 0) * bw(t, 0) ? 2 : 1;
    return out;
}

std::vector<DecodedSequence> viterbi_decode_all(const std::vector<ProcessedRider>& data,
                                                const Theta& theta, const DrawSet& draws) {
    std::vector<DecodedSequence> out(data.size());
    parallel_for(data.size(), worker_threads(), [&](std::size_t i) {
        out[i] = viterbi_decode(data[i], theta, draws.rider(i));
    });
    return out;
}

double decode_accuracy(const std::vector<DecodedSequence>& decoded,
                       const std::vector<std::vector<int>>& truth) {
    if (decoded.size() != truth.size())
        throw DataError("decode_accuracy: decoded and truth rider counts differ");
    long hits = 0, total = 0;
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        if (decoded[i].classes.size() != truth[i].size())
            throw DataError("decode_accuracy: horizon mismatch for rider " +
                            decoded[i].rider_id);
        for (std::size_t t = 0; t < truth[i].size(); ++t) {
            hits += decoded[i].classes[t] == truth[i][t] ? 1 : 0;
            ++total;
        }
    }
    if (total == 0) throw DataError("decode_accuracy: no occasions to compare");
    return static_cast<double>(hits) / static_cast<double>(total);
}

ClassShareReport class_share(const std::vector<DecodedSequence>& decoded,
                             const std::vector<ProcessedRider>& data) {
    ClassShareReport rep;
    if (decoded.empty()) {
        rep.empty = true;
        return rep;
    }
    if (decoded.size() != data.size())
        throw DataError("class_share: decoded and rider counts differ");
    rep.empty = false;

    long n1_all = 0, n_all = 0;
    long n1_band[3] = {0, 0, 0};
    long n_band[3] = {0, 0, 0};
    int riders_band[3] = {0, 0, 0};
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        const int total_occ = data[i].t_init + data[i].t_model;
        const int band = total_occ < 10 ? 0 : (total_occ <= 20 ? 1 : 2);
        ++riders_band[band];
        for (int c : decoded[i].classes) {
            ++n_all;
            ++n_band[band];
            if (c == 1) {
                ++n1_all;
                ++n1_band[band];
            }
        }
    }
    rep.overall_class1 = static_cast<double>(n1_all) / static_cast<double>(n_all);
    auto share = [](long a, long b) {
        return b > 0 ? static_cast<double>(a) / static_cast<double>(b)
                     : std::numeric_limits<double>::quiet_NaN();
    };
    rep.band_low = share(n1_band[0], n_band[0]);
    rep.band_mid = share(n1_band[1], n_band[1]);
    rep.band_high = share(n1_band[2], n_band[2]);
    rep.n_low = riders_band[0];
    rep.n_mid = riders_band[1];
    rep.n_high = riders_band[2];
    rep.n_occasions = n_all;
    return rep;
}

}  // namespace dlcm
