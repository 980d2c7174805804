#pragma once

#include "aeromap/camera.hpp"
#include "aeromap/features.hpp"

#include <map>
#include <string>
#include <vector>

namespace aeromap {

struct LandmarkObservation {
    std::uint32_t frame_id = 0;
    Vec2 pixel = Vec2::Zero();
};

struct Landmark {
    std::uint32_t id = 0;
    Vec3 position = Vec3::Zero();
    Descriptor descriptor{};
    Vec3 source_view_direction = Vec3::UnitZ();  ///< unit ray from the creating camera
    std::vector<LandmarkObservation> observations;
    std::uint32_t truth_id = kNoTruthId;  ///< carried from the creating observation
};

enum class KeyframeKind { BootstrapFirst, BootstrapSecond, Middle, Current };

struct Keyframe {
    std::uint32_t frame_id = 0;
    SE3Pose pose;
    KeyframeKind kind = KeyframeKind::Current;
    double focal = 0.0;
};

enum class SubmapStatus { Building, Completed, Failed };

struct FramePose {
    std::uint32_t frame_id = 0;
    SE3Pose pose;
    bool relocalized = false;  ///< false: relocalization failed, pose is the tracking estimate
    int inliers = 0;
};

struct Submap {
    std::uint32_t id = 0;
    Vec2 principal_point = Vec2::Zero();
    std::vector<Keyframe> keyframes;
    std::map<std::uint32_t, Landmark> landmarks;
    std::vector<FramePose> frame_poses;
    std::uint32_t first_frame = 0;
    std::uint32_t last_frame = 0;
    SubmapStatus status = SubmapStatus::Building;
    std::string failure_reason;
    double final_rms = 0.0;      ///< pixels, over all keyframe observations
    double build_seconds = 0.0;

    double median_focal() const;
    /// Mean reprojection error over all keyframe observations, pixels.
    double mean_reprojection_error() const;
    /// Median camera-frame depth of landmarks in their first observing keyframe.
    double median_landmark_depth() const;
    /// Scales the local frame by k (landmarks and pose translations); projections are unchanged.
    void rescale(double k);
};

std::string to_string(SubmapStatus s);
std::string to_string(KeyframeKind k);

}  // namespace aeromap
