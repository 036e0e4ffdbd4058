#include "dlcm/util.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace dlcm {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer; good avalanche for seeding independent engines.
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t unit, Stream tag) {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ (0x517cc1b727220a95ULL + unit));
    k = mix64(k ^ (0x2545f4914f6cdd1dULL * static_cast<std::uint64_t>(tag)));
    return k;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t unit, Stream tag) {
    return std::mt19937_64(stream_key(seed, unit, tag));
}

double inv_normal_cdf(double p) {
    // Wichura (1988), algorithm PPND16.
    if (!(p > 0.0 && p < 1.0)) throw NumericError("inv_normal_cdf: p outside (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) *
                        r +
                    4.5921953931549871457e4) *
                       r +
                   1.3731693765509461125e4) *
                      r +
                  1.9715909503065514427e3) *
                     r +
                 1.3314166789178437745e2) *
                    r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) *
                        r +
                    2.1213794301586595867e4) *
                       r +
                   5.3941960214247511077e3) *
                      r +
                  6.8718700749205790830e2) *
                     r +
                 4.2313330701600911252e1) *
                    r +
                1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) *
                     r +
                 1.27045825245236838258e0) *
                    r +
                3.64784832476320460504e0) *
                   r +
               5.76949722146069140550e0) *
                  r +
              4.63033784615654529590e0) *
                 r +
             1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) *
                     r +
                 1.48103976427480074590e-1) *
                    r +
                6.89767334985100004550e-1) *
                   r +
               1.67638483018380384940e0) *
                  r +
              2.05319162663775882187e0) *
                 r +
             1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) *
                     r +
                 2.65321895265761230930e-2) *
                    r +
                2.96560571828504891230e-1) *
                   r +
               1.78482653991729133580e0) *
                  r +
              5.46378491116411436990e0) *
                 r +
             6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) *
                     r +
                 7.86869131145613259100e-4) *
                    r +
                1.48753612908506148525e-2) *
                   r +
               1.36929880922735805310e-1) *
                  r +
              5.99832206555887937690e-1) *
                 r +
             1.0);
    }
    return q < 0.0 ? -x : x;
}

double radical_inverse(std::uint64_t n, std::uint32_t base) {
    double inv = 1.0 / static_cast<double>(base);
    double f = inv;
    double val = 0.0;
    while (n > 0) {
        val += f * static_cast<double>(n % base);
        n /= base;
        f *= inv;
    }
    return val;
}

namespace {
std::atomic<int> g_workers(1);
}

int worker_threads() { return g_workers.load(); }

void set_worker_threads(int n) {
    if (n < 1) n = 1;
    g_workers.store(n);
}

void parallel_for(std::size_t n, int nthreads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t hw = static_cast<std::size_t>(std::max(1, nthreads));
    if (hw <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nt = std::min(hw, n);
    std::atomic<std::size_t> next(0);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::atomic<bool> failed(false);
    std::string first_error;
    std::mutex err_mu;
    for (std::size_t w = 0; w < nt; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!failed.exchange(true)) first_error = e.what();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed.load()) throw NumericError(first_error);
}

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_bool(const std::string& s, const std::string& what) {
    const std::string v = lower(trim(s));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(what + ": cannot parse boolean from '" + s + "'");
}

double parse_real(const std::string& s, const std::string& what) {
    const std::string v = trim(s);
    if (v.empty()) throw ConfigError(what + ": empty numeric value");
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size())
        throw ConfigError(what + ": cannot parse real from '" + s + "'");
    return x;
}

long long parse_int(const std::string& s, const std::string& what) {
    const std::string v = trim(s);
    long long x = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(what + ": cannot parse integer from '" + s + "'");
    return x;
}

std::string format_real(double x, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
    return std::string(buf);
}

}  // namespace dlcm
