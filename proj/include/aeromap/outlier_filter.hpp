#pragma once

#include "aeromap/common.hpp"

#include <span>
#include <vector>

namespace aeromap {

/// Mean distance from each point to its k nearest other points (sorted
/// ascending before summation). Requires points.size() > k.
std::vector<double> knn_mean_distances(std::span<const Vec3> points, int k);

/// Statistical outlier test: a point is flagged when its mean k-NN distance
/// exceeds mean + sigma_multiplier * stddev of that statistic over all points.
/// Returns an all-false mask when there are at most k points.
std::vector<bool> knn_outlier_mask(std::span<const Vec3> points, int k, double sigma_multiplier);

}  // namespace aeromap
