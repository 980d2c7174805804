#pragma once

#include "aeromap/camera.hpp"

namespace aeromap {

/// Rays closer to parallel than this are rejected by triangulate().
constexpr double kMinTriangulationAngleDeg = 1.0;

/// Two-view triangulation: linear DLT estimate refined by Gauss-Newton on the
/// two reprojection residuals. Throws DegenerateError when the viewing rays
/// are within min_angle_deg of parallel (including zero baseline).
Vec3 triangulate(const SE3Pose& pose_a, const CameraIntrinsics& K_a, const Vec2& pix_a,
                 const SE3Pose& pose_b, const CameraIntrinsics& K_b, const Vec2& pix_b,
                 double min_angle_deg = kMinTriangulationAngleDeg);

inline Vec3 triangulate(const SE3Pose& pose_a, const SE3Pose& pose_b, const CameraIntrinsics& K,
                        const Vec2& pix_a, const Vec2& pix_b,
                        double min_angle_deg = kMinTriangulationAngleDeg) {
    return triangulate(pose_a, K, pix_a, pose_b, K, pix_b, min_angle_deg);
}

/// Angle in degrees between the rays from the two camera centres to X.
/// Throws PreconditionError if X coincides with either centre.
double triangulation_angle(const SE3Pose& pose_a, const SE3Pose& pose_b, const Vec3& X);

}  // namespace aeromap
