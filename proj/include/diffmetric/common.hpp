#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffmetric {

/// Invalid or inconsistent configuration (bad file, schema violation,
/// out-of-range hyperparameter). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Runtime numerical failure (non-finite values, singular systems,
/// violated metric bounds). Maps to CLI exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline void require_finite(const Vec& v, const char* what) {
    if (!all_finite(v)) throw NumericError(std::string("non-finite entries in ") + what);
}

inline void require_dim(const Vec& v, std::size_t d, const char* what) {
    if (v.size() != d) {
        throw NumericError(std::string("dimension mismatch in ") + what + ": got " +
                           std::to_string(v.size()) + ", expected " + std::to_string(d));
    }
}

}  // namespace diffmetric
