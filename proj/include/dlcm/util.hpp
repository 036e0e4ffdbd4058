#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlcm {

// Error taxonomy mapped to process exit codes by the CLI:
//   ConfigError -> 2, DataError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// ---------------------------------------------------------------------------
// Random streams
//
// All randomness derives from one master seed. Independent purposes (attribute
// draws, class draws, choice draws, coefficient draws, optimizer starts, ...)
// get their own stream per rider, keyed by (seed, unit, tag), so consuming
// more numbers in one stream never shifts another.
// ---------------------------------------------------------------------------
enum class Stream : std::uint64_t {
    Attributes = 1,
    Classes = 2,
    Choices = 3,
    Chi = 4,
    Starts = 5,
    Shuffle = 6,
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t unit, Stream tag);
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t unit, Stream tag);

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

// Standard-normal quantile (Wichura's PPND16 rational approximation,
// accurate to ~1e-15 over (0,1)).
double inv_normal_cdf(double p);

// Radical-inverse (Halton) value of index n in the given base.
double radical_inverse(std::uint64_t n, std::uint32_t base);

inline double logistic(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Probability floor applied before taking logs (underflow protection).
inline constexpr double kProbFloor = 1e-300;

inline double safe_log(double p) { return std::log(p < kProbFloor ? kProbFloor : p); }

// ---------------------------------------------------------------------------
// Parallel helper
//
// Runs fn(i) for i in [0, n). Results must be written to per-index slots by
// the caller; chunking never affects output. nthreads <= 1 runs inline.
// ---------------------------------------------------------------------------
void parallel_for(std::size_t n, int nthreads, const std::function<void(std::size_t)>& fn);

// Global worker cap set by the CLI --threads flag (default 1).
int worker_threads();
void set_worker_threads(int n);

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------
std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
std::string lower(std::string s);
bool parse_bool(const std::string& s, const std::string& what);
double parse_real(const std::string& s, const std::string& what);
long long parse_int(const std::string& s, const std::string& what);

std::string format_real(double x, int precision = 10);

}  // namespace dlcm
