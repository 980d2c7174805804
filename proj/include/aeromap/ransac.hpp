#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace aeromap {

/// Shared RANSAC parameters. inlier_threshold is in pixels for image-space
/// models and in scene units for 3D models.
struct RansacConfig {
    int max_iterations = 1000;
    double inlier_threshold = 2.0;
    int min_inliers = 12;
    std::uint64_t seed = 0;
    double confidence = 0.999;  ///< for the adaptive early exit

    bool is_valid() const {
        return max_iterations >= 1 && inlier_threshold > 0.0 && min_inliers >= 0 &&
               confidence > 0.0 && confidence < 1.0;
    }
};

namespace ransac_detail {

/// Iterations needed to draw one all-inlier sample with the given confidence.
inline int required_iterations(double inlier_ratio, int sample_size, double confidence,
                               int max_iterations) {
    if (inlier_ratio <= 0.0) return max_iterations;
    if (inlier_ratio >= 1.0) return 1;
    double p = 1.0;
    for (int i = 0; i < sample_size; ++i) p *= inlier_ratio;
    if (p <= 1e-12) return max_iterations;
    const double n = std::log(1.0 - confidence) / std::log(1.0 - p);
    if (!(n < static_cast<double>(max_iterations))) return max_iterations;
    return std::max(1, static_cast<int>(std::ceil(n)));
}

/// Draws k distinct indices in [0, n) with partial Fisher-Yates over a scratch buffer.
inline void draw_sample(std::mt19937_64& rng, int n, int k, std::vector<int>& scratch,
                        std::vector<int>& out) {
    if (static_cast<int>(scratch.size()) != n) {
        scratch.resize(n);
        for (int i = 0; i < n; ++i) scratch[i] = i;
    }
    out.resize(k);
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        const int j = pick(rng);
        std::swap(scratch[i], scratch[j]);
        out[i] = scratch[i];
    }
}

}  // namespace ransac_detail

}  // namespace aeromap
