#pragma once

#include "aeromap/bundle_adjust.hpp"
#include "aeromap/features.hpp"
#include "aeromap/ransac.hpp"
#include "aeromap/submap.hpp"

#include "json.hpp"

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>

namespace aeromap {

struct BuilderConfig {
    /// Absolute resection threshold; 0 selects the relative rule
    /// max(tau_resection_floor, tau_resection_fraction * count at the last keyframe event).
    int tau_resection = 0;
    double tau_resection_fraction = 0.6;
    int tau_resection_floor = 100;
    int tau_stereo = 1000;
    double alpha_stereo = 30.0;          ///< degrees
    int keyframes_per_submap = 20;
    double overlap_fraction = 0.10;
    double view_angle_limit = 45.0;      ///< degrees
    double reprojection_threshold = 2.0; ///< pixels
    int knn_k = 30;
    double knn_sigma = 2.0;
    bool estimate_focal = false;

    /// Descriptor match threshold; 0 selects 0.7 x median intra-frame NN
    /// distance of the first frame.
    double match_threshold = 0.0;
    double match_window = 40.0;          ///< pixels, tracking search radius
    double min_triangulation_angle = 1.0;///< degrees
    int min_bootstrap_landmarks = 50;
    /// Landmarks seen by fewer keyframes are dropped when the submap completes.
    int min_track_length = 3;
    /// Completed submaps are rescaled so their median landmark depth equals this.
    double submap_depth_units = 100.0;
    RansacConfig pnp{500, 2.0, 20, 0, 0.999};
    RansacConfig essential{500, 2.0, 20, 0, 0.999};
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// True iff count < tau.
inline bool should_add_keyframe(int pnp_inlier_count, int tau_resection) {
    return pnp_inlier_count < tau_resection;
}

/// Index of the middle keyframe between two frame indices (floor of the mean).
inline std::uint32_t middle_frame(std::uint32_t previous_keyframe, std::uint32_t current) {
    return static_cast<std::uint32_t>((static_cast<std::uint64_t>(previous_keyframe) + current) / 2);
}

/// First frame of the next submap for a completed range [first, last].
std::uint32_t next_submap_start(std::uint32_t first, std::uint32_t last, double overlap_fraction);

using EventSink = std::function<void(const nlohmann::json&)>;

/// Sequential submap creation over a frame source. Each call to next() runs
/// the bootstrap / track / keyframe / bundle-adjust loop until one submap is
/// completed or fails, and returns it; nullopt once the stream is exhausted.
class SubmapBuilder {
public:
    SubmapBuilder(const FrameSource& source, BuilderConfig cfg, BAOptions ba, EventSink sink = {});

    std::optional<Submap> next();

    double match_threshold() const { return match_threshold_; }
    double current_focal() const { return focal_; }

    // Exposed for tests.
    struct TrackResult {
        SE3Pose pose;
        int inliers = 0;
        std::vector<std::pair<int, std::uint32_t>> matches;  ///< (feature index, landmark id) inliers
        int candidates = 0;
    };
    /// Windowed descriptor matching of the submap's landmarks against a frame,
    /// then PnP. nullopt on tracking loss.
    std::optional<TrackResult> track_frame(const Submap& submap, const Frame& frame,
                                           const SE3Pose& prior, double focal) const;

private:
    struct TrackedFrame {
        SE3Pose pose;
        std::vector<std::pair<int, std::uint32_t>> matches;
    };

    const Frame& frame(std::uint32_t index);
    void evict_before(std::uint32_t index);
    void emit(const nlohmann::json& event) const;

    bool bootstrap(Submap& submap, std::uint32_t& cursor);
    bool insert_keyframes(Submap& submap, std::uint32_t current, const TrackResult& tracked);
    int triangulate_pair(Submap& submap, std::uint32_t frame_a, const SE3Pose& pose_a,
                         std::uint32_t frame_b, const SE3Pose& pose_b,
                         const std::vector<std::pair<int, std::uint32_t>>& used_a,
                         const std::vector<std::pair<int, std::uint32_t>>& used_b);
    void run_ba(Submap& submap);
    int filter_post_ba(Submap& submap);
    int filter_knn(Submap& submap);
    int filter_completion(Submap& submap);
    void complete(Submap& submap);
    std::uint32_t allocate_landmark_id(const Submap& submap, std::uint32_t frame_a, int feature_a,
                                       std::uint32_t frame_b, int feature_b);
    Submap fail(Submap submap, std::uint32_t last, const std::string& reason);

    const FrameSource& source_;
    BuilderConfig cfg_;
    BAOptions ba_;
    EventSink sink_;
    CameraIntrinsics K_;
    double focal_;
    double match_threshold_ = 0.0;

    std::uint32_t next_start_ = 0;
    std::uint32_t next_submap_id_ = 0;
    std::uint32_t next_landmark_id_ = 0;
    std::map<std::uint32_t, Frame> cache_;
    std::map<std::uint32_t, TrackedFrame> tracked_;
    /// (frame << 32 | feature) -> landmark id of the previous submap, for overlap frames.
    std::unordered_map<std::uint64_t, std::uint32_t> carryover_;
    int reference_count_ = 0;  ///< landmark count at the last keyframe event
};

/// Runs the builder over the whole source.
std::vector<Submap> build_submaps(const FrameSource& source, const BuilderConfig& cfg,
                                  const BAOptions& ba, EventSink sink = {});

}  // namespace aeromap
