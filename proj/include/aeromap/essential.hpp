#pragma once

#include "aeromap/camera.hpp"
#include "aeromap/ransac.hpp"

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace aeromap {

using PixelMatch = std::pair<Vec2, Vec2>;

/// Minimal five-point essential matrix solver. Inputs are normalized image
/// coordinates (x, y, 1) with the constraint q2^T E q1 = 0. Returns every real
/// solution (up to ten).
std::vector<Mat3> solve_essential_five_point(const std::array<Vec3, 5>& q1,
                                             const std::array<Vec3, 5>& q2);

/// Symmetric epipolar distance in normalized units: the RMS of the distances
/// of q2 to the line E q1 and of q1 to the line E^T q2.
double symmetric_epipolar_distance(const Mat3& E, const Vec3& q1, const Vec3& q2);

/// The four (R, t) factorizations of E are tested for cheirality on the given
/// correspondences; the one with the most points in front of both cameras wins.
/// The returned pose maps view-1 coordinates to view-2 coordinates with |t| = 1.
SE3Pose decompose_essential(const Mat3& E, std::span<const Vec3> q1, std::span<const Vec3> q2,
                            int* num_in_front = nullptr);

struct RelativePoseResult {
    SE3Pose pose;             ///< second camera from first camera, |t| = 1
    Mat3 essential;
    std::vector<bool> inliers;
    int num_inliers = 0;
};

/// RANSAC over the five-point solver; inliers by symmetric epipolar distance in
/// pixels under cfg.inlier_threshold. Returns nullopt when fewer than
/// cfg.min_inliers survive. Throws PreconditionError for fewer than 5 matches.
std::optional<RelativePoseResult> estimate_relative_pose(std::span<const PixelMatch> matches,
                                                         const CameraIntrinsics& K,
                                                         const RansacConfig& cfg);

}  // namespace aeromap
