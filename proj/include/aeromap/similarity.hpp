#pragma once

#include "aeromap/lie.hpp"
#include "aeromap/ransac.hpp"

#include <optional>
#include <span>
#include <vector>

namespace aeromap {

/// A pair of local positions of the same physical point in two maps.
struct Correspondence3D3D {
    Vec3 point_a = Vec3::Zero();
    Vec3 point_b = Vec3::Zero();
    std::uint32_t landmark_a = 0;
    std::uint32_t landmark_b = 0;
};

/// Closed-form least-squares similarity (Umeyama) with
///   (R, s, t) = argmin sum |s R a_i + t - b_i|^2.
/// With with_scale = false the scale is fixed to 1 (Kabsch). Throws
/// PreconditionError for fewer than 3 points and DegenerateError when the
/// source points are collinear or coincident.
Sim3Transform umeyama_alignment(std::span<const Vec3> a, std::span<const Vec3> b,
                                bool with_scale = true);

Sim3Transform umeyama_sim3(std::span<const Correspondence3D3D> corrs);

struct Sim3RansacResult {
    Sim3Transform transform;
    std::vector<bool> inliers;
    int num_inliers = 0;
};

/// Minimal three-point Umeyama hypotheses, inliers by |s R a + t - b| below
/// cfg.inlier_threshold, and a final refit on the consensus set. Returns nullopt
/// (link rejected) when fewer than cfg.min_inliers inliers remain.
std::optional<Sim3RansacResult> sim3_ransac(std::span<const Correspondence3D3D> corrs,
                                            const RansacConfig& cfg);

}  // namespace aeromap
