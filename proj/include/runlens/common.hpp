#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace runlens {

using json = nlohmann::json;

/// Row-major dense matrix; one row per record.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
    load,
    validation,
    not_found,
    contract,
    merge,
    unsupported_primitive,
    unevaluable,
    insufficient_data,
    degenerate,
    capability,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::load: return "load-error";
        case ErrorKind::validation: return "validation-error";
        case ErrorKind::not_found: return "not-found";
        case ErrorKind::contract: return "contract-error";
        case ErrorKind::merge: return "merge-error";
        case ErrorKind::unsupported_primitive: return "unsupported-primitive";
        case ErrorKind::unevaluable: return "unevaluable";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::capability: return "capability-disabled";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// A hyperparameter value: numeric kinds hold a double, categorical kinds a string.
using Value = std::variant<double, std::string>;

inline bool is_numeric(const Value& v) { return std::holds_alternative<double>(v); }
inline double as_number(const Value& v) { return std::get<double>(v); }
inline const std::string& as_string(const Value& v) { return std::get<std::string>(v); }

/// Whole numbers are written as JSON integers, so integer hyperparameters round-trip as written.
inline json to_json(const Value& v) {
    if (!is_numeric(v)) return as_string(v);
    const double x = as_number(v);
    if (x == std::floor(x) && std::abs(x) < 9.007199254740992e15) return static_cast<std::int64_t>(x);
    return x;
}

inline Value value_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw Error(ErrorKind::load, "value must be a number or a string, got " + j.dump());
}

inline std::string value_to_string(const Value& v) {
    if (!is_numeric(v)) return as_string(v);
    return to_json(v).dump();
}

constexpr double missing_value = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double x) { return std::isnan(x); }

/// Seeded generator used everywhere randomness appears; 64-bit Mersenne twister.
using Rng = std::mt19937_64;

/// Derives an independent stream from a base seed and a tag (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Uniform double in [0,1) built from the raw engine output, identical on every platform.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

/// Standard normal via Box-Muller on uniform01, so streams are portable across standard libraries.
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace runlens
