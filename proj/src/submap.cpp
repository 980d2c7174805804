#include "aeromap/submap.hpp"

#include <algorithm>

namespace aeromap {

double Submap::median_focal() const {
    if (keyframes.empty()) return 0.0;
    std::vector<double> f;
    f.reserve(keyframes.size());
    for (const auto& k : keyframes) f.push_back(k.focal);
    std::sort(f.begin(), f.end());
    const std::size_t n = f.size();
    return n % 2 == 1 ? f[n / 2] : 0.5 * (f[n / 2 - 1] + f[n / 2]);
}

double Submap::mean_reprojection_error() const {
    std::map<std::uint32_t, const Keyframe*> by_frame;
    for (const auto& k : keyframes) by_frame[k.frame_id] = &k;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [id, lm] : landmarks) {
        for (const auto& o : lm.observations) {
            const auto it = by_frame.find(o.frame_id);
            if (it == by_frame.end()) continue;
            CameraIntrinsics K;
            K.focal = it->second->focal;
            K.principal_point = principal_point;
            const auto p = project(K, it->second->pose, lm.position);
            if (!p) continue;
            sum += (*p - o.pixel).norm();
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

double Submap::median_landmark_depth() const {
    std::map<std::uint32_t, const Keyframe*> by_frame;
    for (const auto& k : keyframes) by_frame[k.frame_id] = &k;
    std::vector<double> depth;
    for (const auto& [id, lm] : landmarks) {
        if (lm.observations.empty()) continue;
        const auto it = by_frame.find(lm.observations.front().frame_id);
        if (it != by_frame.end()) depth.push_back(it->second->pose.apply(lm.position).z());
    }
    if (depth.empty()) return 0.0;
    std::nth_element(depth.begin(), depth.begin() + depth.size() / 2, depth.end());
    return depth[depth.size() / 2];
}

void Submap::rescale(double k) {
    for (auto& [id, lm] : landmarks) lm.position *= k;
    for (auto& kf : keyframes) kf.pose.translation *= k;
    for (auto& f : frame_poses) f.pose.translation *= k;
}

std::string to_string(SubmapStatus s) {
    switch (s) {
        case SubmapStatus::Building: return "building";
        case SubmapStatus::Completed: return "completed";
        case SubmapStatus::Failed: return "failed";
    }
    return "failed";
}

std::string to_string(KeyframeKind k) {
    switch (k) {
        case KeyframeKind::BootstrapFirst: return "bootstrap-first";
        case KeyframeKind::BootstrapSecond: return "bootstrap-second";
        case KeyframeKind::Middle: return "middle";
        case KeyframeKind::Current: return "current";
    }
    return "current";
}

}  // namespace aeromap
