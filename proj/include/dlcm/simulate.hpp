#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dlcm/config.hpp"
#include "dlcm/types.hpp"

namespace dlcm {

// Synthetic panel drawn from the exact model, with ground truth attached.
struct SimulatedPanel {
    PanelDataset panel;  // occasions 1 .. t_init + t_model per rider
    std::vector<std::vector<int>> true_classes;  // per rider, length t_model
    Eigen::MatrixXd chi;                         // N x nG rider taste draws
    Theta theta;                                 // generating values (echo)
    std::uint64_t seed = 0;
    int t_init = 0;
    int t_model = 0;
};

// Generates the panel: per-rider attribute draws for both routes at all
// occasions, rider tastes chi_i ~ Normal(varrho, Psi), initialisation-phase
// choices from the inertia kernel seeded by a fair first choice (optionally
// all-fair), the latent class path from the initialisation/transition
// kernels, and modelling-phase choices from the class-conditional kernels.
// Initialisation sequences are redrawn until both routes appear in the first
// t_init occasions and the route chosen at t_init was experienced earlier,
// so the fixed-split validity condition holds for every rider.
// Reproducible: per-rider random streams keyed by (seed, rider, stream).
SimulatedPanel simulate_panel(const DGPConfig& config, const CovariateSpec& spec);

}  // namespace dlcm
