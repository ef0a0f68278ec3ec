#pragma once

// Synthetic dataset generators. Everything is a pure function of the spec
// and the seed, so a dataset can always be regenerated from its config.

#include <string>

#include "diffmetric/common.hpp"
#include "diffmetric/dataset.hpp"
#include "diffmetric/rng.hpp"

namespace diffmetric {

struct SyntheticSpec {
    std::string kind = "linear";  // linear | two_cluster
    std::size_t num_samples = 8;
    std::size_t dim = 2;
    double noise_sigma = 0.1;
    bool shared_feature = false;  // linear: one feature vector for all rows
    double separation = 2.0;      // two_cluster: distance between centers
};

/// linear: y = <w*, v> + noise with w* drawn from the seed.
/// two_cluster: gaussian blobs around +-separation/2 on axis 0, targets +-1.
inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.num_samples < 1) throw ConfigError("synthetic: num_samples must be >= 1");
    if (spec.dim < 1) throw ConfigError("synthetic: dim must be >= 1");
    if (spec.noise_sigma < 0.0) throw ConfigError("synthetic: noise_sigma must be >= 0");
    const std::size_t n = spec.num_samples;
    const std::size_t m = spec.dim;

    std::vector<double> feats(n * m);
    std::vector<double> targets(n);

    if (spec.kind == "linear") {
        Rng rng(derive_seed(seed, 0xda7aull));
        Vec w(m);
        for (auto& v : w) v = rng.normal();
        Vec shared(m);
        if (spec.shared_feature) {
            for (auto& v : shared) v = rng.normal();
        }
        for (std::size_t i = 0; i < n; ++i) {
            double dotwx = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double f = spec.shared_feature ? shared[j] : rng.normal();
                feats[i * m + j] = f;
                dotwx += w[j] * f;
            }
            targets[i] = dotwx + spec.noise_sigma * rng.normal();
        }
    } else if (spec.kind == "two_cluster") {
        Rng rng(derive_seed(seed, 0xc157ull));
        const double half = spec.separation / 2.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool first = i < (n + 1) / 2;
            feats[i * m] = (first ? half : -half) + spec.noise_sigma * rng.normal();
            for (std::size_t j = 1; j < m; ++j) {
                feats[i * m + j] = spec.noise_sigma * rng.normal();
            }
            targets[i] = first ? 1.0 : -1.0;
        }
    } else {
        throw ConfigError("synthetic: unknown kind '" + spec.kind + "'");
    }
    return Dataset(m, std::move(feats), std::move(targets));
}

}  // namespace diffmetric
