#pragma once

// Dataset container and its CSV interchange format:
//   header  feat_0,...,feat_{m-1},target
//   one sample per row, '.' decimal, UTF-8.
// Sample order is fixed at load time; index i identifies sample i for good.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "diffmetric/common.hpp"

namespace diffmetric {

class Dataset {
public:
    Dataset(std::size_t feature_dim, std::vector<double> features, std::vector<double> targets)
        : m_(feature_dim), features_(std::move(features)), targets_(std::move(targets)) {
        if (targets_.empty()) throw ConfigError("dataset: N >= 1 required");
        if (m_ == 0) throw ConfigError("dataset: feature dimension must be >= 1");
        if (features_.size() != targets_.size() * m_) {
            throw ConfigError("dataset: features/targets size mismatch");
        }
        if (!all_finite(features_) || !all_finite(targets_)) {
            throw ConfigError("dataset: non-finite values");
        }
    }

    std::size_t size() const { return targets_.size(); }
    std::size_t feature_dim() const { return m_; }

    /// Feature vector of sample i (pointer to m contiguous doubles).
    const double* feature(std::size_t i) const { return features_.data() + i * m_; }
    double target(std::size_t i) const { return targets_[i]; }

    Vec feature_vec(std::size_t i) const {
        return Vec(feature(i), feature(i) + m_);
    }

private:
    std::size_t m_;
    std::vector<double> features_;  // N x m row-major
    std::vector<double> targets_;
};

namespace detail {

inline double parse_double(const std::string& field, std::size_t row, std::size_t col) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw ConfigError("csv row " + std::to_string(row) + ", column " + std::to_string(col) +
                          ": cannot parse '" + field + "' as a number");
    }
    if (!std::isfinite(value)) {
        throw ConfigError("csv row " + std::to_string(row) + ", column " + std::to_string(col) +
                          ": non-finite value");
    }
    return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline Dataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": N >= 1 required (empty file)");

    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header.back() != "target") {
        throw ConfigError(path + ": header must be feat_0,...,feat_{m-1},target");
    }
    const std::size_t m = header.size() - 1;
    for (std::size_t j = 0; j < m; ++j) {
        if (header[j] != "feat_" + std::to_string(j)) {
            throw ConfigError(path + ": unexpected header column '" + header[j] + "'");
        }
    }

    std::vector<double> features;
    std::vector<double> targets;
    std::size_t row = 1;  // header was row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != m + 1) {
            throw ConfigError(path + ": csv row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(m + 1));
        }
        for (std::size_t j = 0; j < m; ++j) {
            features.push_back(detail::parse_double(fields[j], row, j));
        }
        targets.push_back(detail::parse_double(fields[m], row, m));
    }
    if (targets.empty()) throw ConfigError(path + ": N >= 1 required (no data rows)");
    return Dataset(m, std::move(features), std::move(targets));
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset file: " + path);
    for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
        out << "feat_" << j << ",";
    }
    out << "target\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.feature(i)[j]);
            out << buf << ",";
        }
        std::snprintf(buf, sizeof(buf), "%.17g", ds.target(i));
        out << buf << "\n";
    }
    if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace diffmetric
