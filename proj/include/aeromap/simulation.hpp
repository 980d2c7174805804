#pragma once

#include "aeromap/features.hpp"

#include <memory>
#include <string>
#include <vector>

namespace aeromap {

enum class SceneType { GridCity, Heightfield };
enum class TrajectoryType { Orbit, Raster, RingLoop, FigureEight };

struct ScenarioConfig {
    // Scene, centred on the origin, z up. Units are metres.
    SceneType scene = SceneType::Heightfield;
    double extent = 1000.0;           ///< side length of the square scene
    double density = 0.02;            ///< landmarks per square metre
    double relief = 20.0;             ///< heightfield amplitude / max building height

    // Trajectory.
    TrajectoryType trajectory = TrajectoryType::Orbit;
    double altitude = 150.0;
    double radius = 300.0;            ///< orbit radius / half-size of raster and figure-eight
    int frames_per_revolution = 300;  ///< frames per lap (orbit, ring, figure-eight) or per pass (raster)
    double look_ahead = 0.3;          ///< view direction lead along the path, as a fraction of look-in
    double tilt_deg = 45.0;           ///< depression angle of the view below the horizon
    int frame_count = 1100;
    std::vector<int> cuts;            ///< frames at which the path jumps ahead by a quarter lap

    CameraIntrinsics intrinsics{1800.0, Vec2(960.0, 540.0), 1920, 1080};

    // Observation noise.
    double pixel_sigma = 0.25;
    double descriptor_sigma = 0.01;   ///< per component
    double outlier_rate = 0.0;        ///< injected observations per true observation
    bool occlusion = false;           ///< coarse depth buffer
    double max_range = 0.0;           ///< 0 = unlimited

    std::uint64_t seed = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

struct Scene {
    AlignedVector<Vec3> positions;
    std::vector<Descriptor> descriptors;  ///< unit-norm base descriptor per landmark
};

struct GroundTruth {
    CameraIntrinsics intrinsics;
    std::vector<SE3Pose> poses;     ///< per frame, camera-from-world
    AlignedVector<Vec3> landmarks;  ///< indexed by truth id
};

Scene generate_scene(const ScenarioConfig& cfg);
std::vector<SE3Pose> generate_trajectory(const ScenarioConfig& cfg);

/// Renders one frame: visible landmarks (in front, inside the image, within
/// range, optionally unoccluded) with pixel and descriptor noise, plus injected
/// outliers, in a per-frame shuffled order. Deterministic in (cfg.seed, index).
Frame render_frame(const ScenarioConfig& cfg, const Scene& scene, const SE3Pose& pose,
                   std::uint32_t index);

/// Frames generated on demand; nothing is cached.
class SimulatedFrameSource : public FrameSource {
public:
    explicit SimulatedFrameSource(ScenarioConfig cfg);
    SimulatedFrameSource(ScenarioConfig cfg, std::shared_ptr<const Scene> scene,
                         std::vector<SE3Pose> poses);

    std::size_t size() const override { return poses_.size(); }
    Frame frame(std::size_t index) const override;
    CameraIntrinsics intrinsics() const override { return cfg_.intrinsics; }

    const ScenarioConfig& config() const { return cfg_; }
    const Scene& scene() const { return *scene_; }
    const std::vector<SE3Pose>& poses() const { return poses_; }
    GroundTruth ground_truth() const;

private:
    ScenarioConfig cfg_;
    std::shared_ptr<const Scene> scene_;
    std::vector<SE3Pose> poses_;
};

std::string to_string(SceneType t);
std::string to_string(TrajectoryType t);
SceneType scene_type_from_string(const std::string& s);
TrajectoryType trajectory_type_from_string(const std::string& s);

}  // namespace aeromap
