#include "aeromap/evaluation.hpp"

#include "aeromap/similarity.hpp"

#include <algorithm>
#include <set>

namespace aeromap {

MapEvaluation evaluate_map(std::span<const Vec3> landmarks, std::span<const std::uint32_t> truth_ids,
                           std::span<const EstimatedPose> trajectory, const GroundTruth& truth) {
    if (landmarks.size() != truth_ids.size()) {
        throw PreconditionError("evaluate_map: landmark and truth id counts differ");
    }
    std::vector<Vec3> est, ref;
    std::set<std::uint32_t> distinct;
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        const std::uint32_t id = truth_ids[i];
        if (!is_real_truth_id(id) || id >= truth.landmarks.size()) continue;
        est.push_back(landmarks[i]);
        ref.push_back(truth.landmarks[id]);
        distinct.insert(id);
    }
    if (est.size() < 3) {
        throw PreconditionError("evaluate_map: " + std::to_string(est.size()) +
                                " landmarks with truth ids, at least 3 are needed");
    }
    MapEvaluation e;
    e.gauge = umeyama_alignment(est, ref, true);
    double sq = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) sq += (e.gauge.apply(est[i]) - ref[i]).squaredNorm();
    e.rmse = std::sqrt(sq / static_cast<double>(est.size()));
    e.matched = static_cast<int>(est.size());
    e.distinct_truth = static_cast<int>(distinct.size());
    e.matched_fraction = truth.landmarks.empty() ? 0.0 : double(distinct.size()) / truth.landmarks.size();

    std::vector<double> angles;
    double psq = 0.0;
    for (const auto& p : trajectory) {
        if (p.frame_id >= truth.poses.size()) continue;
        const SE3Pose& t = truth.poses[p.frame_id];
        const double d = (e.gauge.apply(p.pose.center()) - t.center()).norm();
        psq += d * d;
        e.position_max = std::max(e.position_max, d);
        // camera-from-truth = camera-from-map * map-from-truth
        angles.push_back(rad_to_deg(
            rotation_angle_between(p.pose.rotation * e.gauge.rotation.transpose(), t.rotation)));
    }
    e.poses = static_cast<int>(angles.size());
    if (!angles.empty()) {
        e.position_rmse = std::sqrt(psq / angles.size());
        e.rotation_max_deg = *std::max_element(angles.begin(), angles.end());
        std::nth_element(angles.begin(), angles.begin() + angles.size() / 2, angles.end());
        e.rotation_median_deg = angles[angles.size() / 2];
    }
    return e;
}

}  // namespace aeromap
