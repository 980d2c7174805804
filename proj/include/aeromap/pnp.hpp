#pragma once

#include "aeromap/camera.hpp"
#include "aeromap/ransac.hpp"

#include <optional>
#include <span>
#include <vector>

namespace aeromap {

struct Correspondence2D3D {
    std::uint32_t landmark_id = 0;
    Vec3 world_point = Vec3::Zero();
    Vec2 pixel = Vec2::Zero();
};

/// Perspective-three-point: camera-from-world poses consistent with three unit
/// bearings (camera frame) and their world points. Up to four solutions.
std::vector<SE3Pose> solve_p3p(const std::array<Vec3, 3>& bearings,
                               const std::array<Vec3, 3>& points);

/// Reprojection error in pixels; +inf when the point is behind the camera.
double reprojection_error(const CameraIntrinsics& K, const SE3Pose& pose, const Vec3& X,
                          const Vec2& pixel);

/// Levenberg-Marquardt refinement of a pose on the correspondences selected by
/// mask (all when mask is empty).
SE3Pose refine_pose(std::span<const Correspondence2D3D> corrs, const CameraIntrinsics& K,
                    const SE3Pose& initial, const std::vector<bool>& mask = {},
                    int max_iterations = 20);

struct PnpResult {
    SE3Pose pose;
    std::vector<bool> inliers;
    int num_inliers = 0;
};

/// RANSAC over four-point samples (P3P + fourth-point disambiguation), followed
/// by refinement on all inliers. Deterministic for a fixed cfg.seed. Returns
/// nullopt when fewer than cfg.min_inliers inliers remain. Throws
/// PreconditionError for fewer than 4 correspondences.
std::optional<PnpResult> pnp_ransac(std::span<const Correspondence2D3D> corrs,
                                    const CameraIntrinsics& K, const RansacConfig& cfg);

}  // namespace aeromap
