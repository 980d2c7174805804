#pragma once

#include "aeromap/common.hpp"
#include "aeromap/lie.hpp"

#include <optional>

namespace aeromap {

/// Pinhole camera with a single focal length and no distortion.
struct CameraIntrinsics {
    double focal = 1.0;
    Vec2 principal_point = Vec2::Zero();
    int width = 0;   ///< image size in pixels; 0 disables bounds checks
    int height = 0;

    CameraIntrinsics with_focal(double f) const {
        CameraIntrinsics k = *this;
        k.focal = f;
        return k;
    }
    bool contains(const Vec2& pixel, double margin = 0.0) const;
    bool is_valid() const;
    /// Normalized image coordinates (x/z, y/z, 1) of a pixel.
    Vec3 normalized(const Vec2& pixel) const;
    /// Unit viewing ray in the camera frame.
    Vec3 bearing(const Vec2& pixel) const { return normalized(pixel).normalized(); }
};

/// Projects a world point through a camera-from-world pose. Returns nullopt
/// when the point is on or behind the image plane (z <= 0).
std::optional<Vec2> project(const CameraIntrinsics& K, const SE3Pose& pose, const Vec3& X);

/// Camera-from-world pose at centre looking at target. Camera frame is z
/// forward, x right, y down; up fixes the roll.
SE3Pose look_at(const Vec3& center, const Vec3& target, const Vec3& up = Vec3(0, 0, 1));

}  // namespace aeromap
