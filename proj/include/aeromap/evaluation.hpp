#pragma once

#include "aeromap/lie.hpp"
#include "aeromap/simulation.hpp"

#include <span>
#include <vector>

namespace aeromap {

struct EstimatedPose {
    std::uint32_t frame_id = 0;
    SE3Pose pose;  ///< camera-from-map
};

struct MapEvaluation {
    double rmse = 0.0;                 ///< landmark RMSE after gauge alignment, scene units
    int matched = 0;                   ///< estimated landmarks carrying a resolvable truth id
    int distinct_truth = 0;            ///< distinct truth landmarks among them
    double matched_fraction = 0.0;     ///< distinct_truth / truth landmark count
    Sim3Transform gauge;               ///< maps the estimate onto the truth frame
    int poses = 0;
    double position_rmse = 0.0;        ///< camera centres
    double position_max = 0.0;
    double rotation_median_deg = 0.0;
    double rotation_max_deg = 0.0;
};

/// Aligns the estimate to the truth with Umeyama over truth-id correspondences
/// and reports landmark and pose errors. Landmarks without a real truth id are
/// ignored. Throws PreconditionError with fewer than 3 matches.
MapEvaluation evaluate_map(std::span<const Vec3> landmarks, std::span<const std::uint32_t> truth_ids,
                           std::span<const EstimatedPose> trajectory, const GroundTruth& truth);

}  // namespace aeromap
