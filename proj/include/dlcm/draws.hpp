#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace dlcm {

// Fixed per-rider standard-normal draws for the simulated mixed logit.
//
// The factory uses Halton sequences (one prime base per coefficient
// dimension, consecutive index blocks per rider, per-rider random rotation
// keyed by the seed) mapped through the normal quantile. Draws come in
// antithetic pairs: row r and row R/2 + r are mirror images, which makes the
// simulated likelihood an even function of each standard deviation.
struct DrawSet {
    int n_draws = 0;        // R
    std::uint64_t seed = 0;
    std::vector<Eigen::MatrixXd> draws;  // per rider: R x n_dims

    static DrawSet halton(int n_riders, int n_draws, int n_dims, std::uint64_t seed);

    const Eigen::MatrixXd& rider(std::size_t i) const { return draws[i]; }
};

}  // namespace dlcm
