#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polis {

using Vec = std::vector<double>;

// Configuration problems: bad files, unknown keys, shape mismatches.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// The mixture denominator of the MIS estimator underflowed for one sample.
// Carries the time of the offending history record.
class DegeneracyError : public std::runtime_error {
public:
    DegeneracyError(const std::string& msg, long t) : std::runtime_error(msg), time(t) {}
    long time;
};

// Log-denominators below this are treated as degenerate rather than 0/0.
inline constexpr double kLogDenomFloor = -700.0;
// Pairwise exponentiated divergences are capped at exp(700) with a sticky flag.
inline constexpr double kLogDivergenceCap = 700.0;
// Penalty gradients touching saturated divergence pairs are clipped to this norm.
inline constexpr double kGradClipNorm = 1e6;

inline double inf() { return std::numeric_limits<double>::infinity(); }

// log(base^n) with the 0^0 = 1 convention, safe for base = 0.
inline double log_pow(double base, long n) {
    if (n == 0) return 0.0;
    if (base <= 0.0) return -std::numeric_limits<double>::infinity();
    return static_cast<double>(n) * std::log(base);
}

double log_sum_exp(std::span<const double> xs);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double mean_of(std::span<const double> v);
double stddev_of(std::span<const double> v);

bool all_finite(std::span<const double> v);

// FNV-1a content hash; stamped into every CSV artifact.
std::uint64_t fnv1a64(std::string_view s);
std::string hash_hex(std::uint64_t h);

// Shortest-round-trip formatting so CSV rows are byte-stable and re-parse exactly.
std::string fmt_double(double x);

}  // namespace polis
