#include "dlcm/draws.hpp"

#include <algorithm>
#include <cmath>

#include "dlcm/util.hpp"

namespace dlcm {

namespace {
constexpr std::uint32_t kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                     31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
constexpr int kMaxDims = static_cast<int>(sizeof(kPrimes) / sizeof(kPrimes[0]));
constexpr std::uint64_t kSkip = 64;  // burn-in of the raw sequence
}  // namespace

DrawSet DrawSet::halton(int n_riders, int n_draws, int n_dims, std::uint64_t seed) {
    if (n_draws < 2 || n_draws % 2 != 0)
        throw ConfigError("draw count must be an even number >= 2, got " +
                          std::to_string(n_draws));
    if (n_dims < 0 || n_dims > kMaxDims)
        throw ConfigError("draw dimensions must lie in 0.." + std::to_string(kMaxDims));
    DrawSet ds;
    ds.n_draws = n_draws;
    ds.seed = seed;
    ds.draws.resize(static_cast<std::size_t>(std::max(0, n_riders)));
    const int half = n_draws / 2;
    for (int i = 0; i < n_riders; ++i) {
        Eigen::MatrixXd m(n_draws, n_dims);
        auto rng = make_rng(seed, static_cast<std::uint64_t>(i), Stream::Chi);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int g = 0; g < n_dims; ++g) {
            const double shift = unif(rng);  // per-(rider, dim) rotation
            const std::uint64_t start =
                kSkip + static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(half);
            for (int r = 0; r < half; ++r) {
                double u = radical_inverse(start + static_cast<std::uint64_t>(r), kPrimes[g]) +
                           shift;
                u -= std::floor(u);
                u = std::clamp(u, 1e-12, 1.0 - 1e-12);
                const double d = inv_normal_cdf(u);
                m(r, g) = d;
                m(half + r, g) = -d;
            }
        }
        ds.draws[static_cast<std::size_t>(i)] = std::move(m);
    }
    return ds;
}

}  // namespace dlcm
