#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <vector>

#include "dlcm/util.hpp"

using namespace dlcm;

namespace {

// Reference normal CDF for round-trip checks against the quantile function.
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("mix64 avalanches and is deterministic") {
    CHECK(mix64(0) == mix64(0));
    CHECK(mix64(0) != mix64(1));
    // flipping one input bit flips roughly half the output bits
    const std::uint64_t a = mix64(12345);
    const std::uint64_t b = mix64(12345 ^ 1ULL);
    const int pop = __builtin_popcountll(a ^ b);
    CHECK(pop > 16);
    CHECK(pop < 48);
}

TEST_CASE("stream keys separate units and purposes") {
    std::set<std::uint64_t> keys;
    for (std::uint64_t unit = 0; unit < 50; ++unit) {
        keys.insert(stream_key(1, unit, Stream::Attributes));
        keys.insert(stream_key(1, unit, Stream::Choices));
        keys.insert(stream_key(2, unit, Stream::Attributes));
    }
    CHECK(keys.size() == 150);  // no collisions across units/tags/seeds
    // same triple -> same engine output
    auto r1 = make_rng(7, 3, Stream::Chi);
    auto r2 = make_rng(7, 3, Stream::Chi);
    for (int i = 0; i < 5; ++i) CHECK(r1() == r2());
}

TEST_CASE("normal quantile matches reference values and round-trips") {
    CHECK(inv_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(inv_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(inv_normal_cdf(0.995) == doctest::Approx(2.5758293035489004).epsilon(1e-12));
    CHECK(inv_normal_cdf(0.1) == doctest::Approx(-1.2815515655446004).epsilon(1e-12));
    // symmetry
    for (double p : {0.01, 0.2, 0.37, 0.49}) {
        CHECK(inv_normal_cdf(p) == doctest::Approx(-inv_normal_cdf(1.0 - p)).epsilon(1e-12));
    }
    // round trip through the reference CDF
    for (double p = 0.001; p < 1.0; p += 0.037) {
        CHECK(normal_cdf(inv_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-12));
    }
    CHECK_THROWS_AS((void)inv_normal_cdf(0.0), NumericError);
    CHECK_THROWS_AS((void)inv_normal_cdf(1.0), NumericError);
    CHECK_THROWS_AS((void)inv_normal_cdf(-0.5), NumericError);
}

TEST_CASE("radical inverse enumerates van der Corput points") {
    CHECK(radical_inverse(1, 2) == doctest::Approx(0.5));
    CHECK(radical_inverse(2, 2) == doctest::Approx(0.25));
    CHECK(radical_inverse(3, 2) == doctest::Approx(0.75));
    CHECK(radical_inverse(4, 2) == doctest::Approx(0.125));
    CHECK(radical_inverse(1, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(radical_inverse(2, 3) == doctest::Approx(2.0 / 3.0));
    CHECK(radical_inverse(3, 3) == doctest::Approx(1.0 / 9.0));
    CHECK(radical_inverse(0, 2) == doctest::Approx(0.0));
    // all values stay in [0, 1)
    for (std::uint64_t n = 0; n < 200; ++n) {
        const double v = radical_inverse(n, 5);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("logistic is exact at references, symmetric, and overflow-safe") {
    CHECK(logistic(0.0) == doctest::Approx(0.5));
    CHECK(logistic(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
    CHECK(logistic(-2.0) == doctest::Approx(0.11920292202211755).epsilon(1e-14));
    for (double x : {0.3, 1.7, 5.0, 40.0}) {
        CHECK(logistic(-x) == doctest::Approx(1.0 - logistic(x)).epsilon(1e-14));
    }
    CHECK(logistic(1000.0) == doctest::Approx(1.0));
    CHECK(logistic(-1000.0) == doctest::Approx(0.0));
    CHECK(std::isfinite(logistic(1e308)));
    CHECK(std::isfinite(logistic(-1e308)));
}

TEST_CASE("safe_log floors instead of returning -inf") {
    CHECK(std::isfinite(safe_log(0.0)));
    CHECK(safe_log(0.0) == doctest::Approx(std::log(1e-300)));
    CHECK(safe_log(0.25) == doctest::Approx(std::log(0.25)));
}

TEST_CASE("parallel_for fills every slot once under any thread count") {
    const std::size_t n = 257;
    for (int nt : {1, 4}) {
        std::vector<int> hits(n, 0);
        parallel_for(n, nt, [&](std::size_t i) { hits[i] += 1; });
        for (std::size_t i = 0; i < n; ++i) CHECK(hits[i] == 1);
    }
    // exceptions inside workers surface as NumericError
    CHECK_THROWS_AS(parallel_for(8, 2,
                                 [](std::size_t i) {
                                     if (i == 3) throw std::runtime_error("boom");
                                 }),
                    NumericError);
    // n == 0 is a no-op
    parallel_for(0, 4, [](std::size_t) { FAIL("must not be called"); });
}

TEST_CASE("worker thread cap clamps to at least one") {
    const int before = worker_threads();
    set_worker_threads(0);
    CHECK(worker_threads() == 1);
    set_worker_threads(3);
    CHECK(worker_threads() == 3);
    set_worker_threads(before);
}

TEST_CASE("string helpers") {
    CHECK(trim("  a b \t") == "a b");
    CHECK(trim("") == "");
    CHECK(trim(" \n ") == "");
    CHECK(lower("AbC1") == "abc1");
    const auto parts = split("a,b,,c", ',');
    REQUIRE(parts.size() == 4);
    CHECK(parts[0] == "a");
    CHECK(parts[2] == "");
    CHECK(split("x", ',').size() == 1);
    CHECK(split("", ',').size() == 1);  // one empty field
}

TEST_CASE("boolean parsing accepts common spellings") {
    CHECK(parse_bool("true", "k"));
    CHECK(parse_bool(" Yes ", "k"));
    CHECK(parse_bool("1", "k"));
    CHECK_FALSE(parse_bool("off", "k"));
    CHECK_FALSE(parse_bool("0", "k"));
    CHECK_THROWS_AS((void)parse_bool("maybe", "k"), ConfigError);
}

TEST_CASE("numeric parsing is strict") {
    CHECK(parse_real("1.5e-3", "k") == doctest::Approx(0.0015));
    CHECK(parse_real(" -2 ", "k") == doctest::Approx(-2.0));
    CHECK_THROWS_AS((void)parse_real("1.5x", "k"), ConfigError);
    CHECK_THROWS_AS((void)parse_real("", "k"), ConfigError);
    CHECK(parse_int("42", "k") == 42);
    CHECK(parse_int("-7", "k") == -7);
    CHECK_THROWS_AS((void)parse_int("4.2", "k"), ConfigError);
    CHECK_THROWS_AS((void)parse_int("forty", "k"), ConfigError);
}

TEST_CASE("format_real round-trips through parse_real") {
    for (double x : {0.0, 1.0, -3.25, 1e-9, 123456.789, -2.718281828459045}) {
        CHECK(parse_real(format_real(x, 17), "k") == doctest::Approx(x).epsilon(1e-15));
    }
}
