#include "aeromap/submap_builder.hpp"

#include "aeromap/essential.hpp"
#include "aeromap/outlier_filter.hpp"
#include "aeromap/pnp.hpp"
#include "aeromap/triangulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace aeromap {

void BuilderConfig::validate() const {
    const auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("builder." + field + ": " + why);
    };
    if (tau_resection < 0) fail("tau_resection", "must be non-negative (0 = relative)");
    if (!(tau_resection_fraction > 0.0 && tau_resection_fraction < 1.0)) {
        fail("tau_resection_fraction", "must be in (0, 1)");
    }
    if (tau_resection_floor < 1) fail("tau_resection_floor", "must be positive");
    if (tau_stereo < 1) fail("tau_stereo", "must be positive");
    if (!(alpha_stereo > 0.0)) fail("alpha_stereo", "must be positive");
    if (keyframes_per_submap < 2) fail("keyframes_per_submap", "must be at least 2");
    if (!(overlap_fraction > 0.0 && overlap_fraction < 0.5)) fail("overlap_fraction", "must be in (0, 0.5)");
    if (!(view_angle_limit > 0.0)) fail("view_angle_limit", "must be positive");
    if (!(reprojection_threshold > 0.0)) fail("reprojection_threshold", "must be positive");
    if (knn_k < 1) fail("knn_k", "must be positive");
    if (!(knn_sigma > 0.0)) fail("knn_sigma", "must be positive");
    if (!(match_threshold >= 0.0)) fail("match_threshold", "must be non-negative (0 = automatic)");
    if (!(match_window > 0.0)) fail("match_window", "must be positive");
    if (!(min_triangulation_angle >= 0.0)) fail("min_triangulation_angle", "must be non-negative");
    if (min_bootstrap_landmarks < 1) fail("min_bootstrap_landmarks", "must be positive");
    if (min_track_length < 0) fail("min_track_length", "must be non-negative");
    if (!(submap_depth_units > 0.0)) fail("submap_depth_units", "must be positive");
    if (!pnp.is_valid()) fail("pnp", "invalid RANSAC settings");
    if (!essential.is_valid()) fail("essential", "invalid RANSAC settings");
}

std::uint32_t next_submap_start(std::uint32_t first, std::uint32_t last, double overlap_fraction) {
    const std::uint32_t n = last - first + 1;
    const auto overlap = static_cast<std::uint32_t>(std::ceil(overlap_fraction * n));
    return std::max(first + 1, last - overlap + 1);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t feature_key(std::uint32_t frame, int feature) {
    return (static_cast<std::uint64_t>(frame) << 32) | static_cast<std::uint32_t>(feature);
}

// Per-frame motion for a pose change spread over n frames: (b * a^-1)^(1/n).
SE3Pose motion_per_frame(const SE3Pose& a, const SE3Pose& b, double n) {
    const SE3Pose delta = b * a.inverse();
    try {
        Sim3Tangent v = sim3_log(Sim3Transform::from_se3(delta));
        v.omega /= n;
        v.sigma /= n;
        v.mu = 0.0;
        const Sim3Transform step = sim3_exp(v);
        return {step.rotation, step.translation};
    } catch (const DegenerateError&) {
        return SE3Pose::identity();
    }
}

std::vector<Descriptor> descriptors_of(const Frame& f, const std::vector<int>& idx) {
    std::vector<Descriptor> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(f.observations[i].descriptor);
    return out;
}

}  // namespace

SubmapBuilder::SubmapBuilder(const FrameSource& source, BuilderConfig cfg, BAOptions ba, EventSink sink)
    : source_(source), cfg_(std::move(cfg)), ba_(ba), sink_(std::move(sink)), K_(source.intrinsics()),
      focal_(K_.focal) {
    cfg_.validate();
    if (!ba_.is_valid()) throw ConfigError("ba: invalid options");
    ba_.estimate_focal = cfg_.estimate_focal;
    match_threshold_ = cfg_.match_threshold;
    if (match_threshold_ <= 0.0 && source_.size() > 0) {
        std::vector<Descriptor> d;
        for (const auto& o : frame(0).observations) d.push_back(o.descriptor);
        match_threshold_ = 0.7 * median_nn_distance(d);
    }
}

const Frame& SubmapBuilder::frame(std::uint32_t index) {
    auto it = cache_.find(index);
    if (it == cache_.end()) it = cache_.emplace(index, source_.frame(index)).first;
    return it->second;
}

void SubmapBuilder::evict_before(std::uint32_t index) {
    cache_.erase(cache_.begin(), cache_.lower_bound(index));
}

void SubmapBuilder::emit(const nlohmann::json& event) const {
    if (sink_) sink_(event);
}

std::optional<SubmapBuilder::TrackResult> SubmapBuilder::track_frame(const Submap& submap,
                                                                     const Frame& frame,
                                                                     const SE3Pose& prior,
                                                                     double focal) const {
    const CameraIntrinsics K = K_.with_focal(focal);
    const Vec3 centre = prior.center();
    const double cos_limit = std::cos(deg_to_rad(cfg_.view_angle_limit));
    const PixelGrid grid(frame.observations, cfg_.match_window);

    struct Candidate {
        std::uint32_t id;
        const Landmark* lm;
        Vec2 pixel;
    };
    std::vector<Candidate> candidates;
    for (const auto& [id, lm] : submap.landmarks) {
        const auto p = project(K, prior, lm.position);
        if (!p || !K.contains(*p, -cfg_.match_window)) continue;
        const Vec3 ray = (lm.position - centre).normalized();
        if (ray.dot(lm.source_view_direction) < cos_limit) continue;
        candidates.push_back({id, &lm, *p});
    }

    for (const double scale : {1.0, 4.0}) {
        // Best landmark per feature, by descriptor distance within the window.
        std::map<int, std::pair<float, std::uint32_t>> best;
        std::map<std::uint32_t, const Landmark*> by_id;
        std::vector<int> hits;
        const auto thr = static_cast<float>(match_threshold_);
        for (const auto& c : candidates) {
            grid.query(c.pixel, scale * cfg_.match_window, hits);
            int best_f = -1;
            float best_d = thr;
            for (int f : hits) {
                const float d = descriptor_distance(c.lm->descriptor, frame.observations[f].descriptor);
                if (d <= best_d && (best_f < 0 || d < best_d || f < best_f)) {
                    best_d = d;
                    best_f = f;
                }
            }
            if (best_f < 0) continue;
            auto it = best.find(best_f);
            if (it == best.end() || best_d < it->second.first) best[best_f] = {best_d, c.id};
            by_id[c.id] = c.lm;
        }
        const int min_needed = std::max(4, cfg_.pnp.min_inliers);
        if (static_cast<int>(best.size()) < min_needed) continue;

        std::vector<Correspondence2D3D> corrs;
        std::vector<int> feature_of;
        for (const auto& [f, v] : best) {
            corrs.push_back({v.second, by_id[v.second]->position, frame.observations[f].pixel});
            feature_of.push_back(f);
        }
        RansacConfig rc = cfg_.pnp;
        rc.seed = cfg_.seed + frame.id;
        const auto pnp = pnp_ransac(corrs, K, rc);
        if (!pnp) continue;
        TrackResult r;
        r.pose = pnp->pose;
        r.inliers = pnp->num_inliers;
        r.candidates = static_cast<int>(candidates.size());
        for (std::size_t i = 0; i < corrs.size(); ++i) {
            if (pnp->inliers[i]) r.matches.emplace_back(feature_of[i], corrs[i].landmark_id);
        }
        return r;
    }
    return std::nullopt;
}

std::uint32_t SubmapBuilder::allocate_landmark_id(const Submap& submap, std::uint32_t frame_a, int feature_a,
                                                  std::uint32_t frame_b, int feature_b) {
    for (const auto key : {feature_key(frame_a, feature_a), feature_key(frame_b, feature_b)}) {
        const auto it = carryover_.find(key);
        if (it != carryover_.end() && !submap.landmarks.count(it->second)) return it->second;
    }
    return next_landmark_id_++;
}

int SubmapBuilder::triangulate_pair(Submap& submap, std::uint32_t frame_a, const SE3Pose& pose_a,
                                    std::uint32_t frame_b, const SE3Pose& pose_b,
                                    const std::vector<std::pair<int, std::uint32_t>>& used_a,
                                    const std::vector<std::pair<int, std::uint32_t>>& used_b) {
    const Frame& Fa = frame(frame_a);
    const Frame& Fb = frame(frame_b);
    const auto unused = [](const Frame& f, const std::vector<std::pair<int, std::uint32_t>>& used) {
        std::vector<bool> taken(f.observations.size(), false);
        for (const auto& u : used) taken[u.first] = true;
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(taken.size()); ++i) {
            if (!taken[i]) out.push_back(i);
        }
        return out;
    };
    const std::vector<int> ia = unused(Fa, used_a), ib = unused(Fb, used_b);
    const auto da = descriptors_of(Fa, ia), db = descriptors_of(Fb, ib);
    const auto matches = match_mutual_nn(da, db, static_cast<float>(match_threshold_));
    if (static_cast<int>(matches.size()) < std::max(5, cfg_.essential.min_inliers)) return -1;

    const CameraIntrinsics K = K_.with_focal(focal_);
    std::vector<PixelMatch> px;
    for (const auto& m : matches) px.emplace_back(Fa.observations[ia[m.a]].pixel, Fb.observations[ib[m.b]].pixel);
    RansacConfig rc = cfg_.essential;
    rc.seed = cfg_.seed ^ (static_cast<std::uint64_t>(frame_b) * 0x9E3779B97F4A7C15ull);
    const auto rel = estimate_relative_pose(px, K, rc);
    if (!rel) return -1;

    // Duplicate test against the existing landmark descriptors.
    std::vector<Descriptor> existing;
    existing.reserve(submap.landmarks.size());
    for (const auto& [id, lm] : submap.landmarks) existing.push_back(lm.descriptor);
    std::vector<Descriptor> fresh;
    std::vector<std::size_t> fresh_match;
    for (std::size_t k = 0; k < matches.size(); ++k) {
        if (!rel->inliers[k]) continue;
        fresh.push_back(da[matches[k].a]);
        fresh_match.push_back(k);
    }
    const auto nn = nearest_neighbors(fresh, existing);

    auto& track_a = tracked_[frame_a].matches;
    auto& track_b = tracked_[frame_b].matches;
    int added = 0;
    for (std::size_t q = 0; q < fresh.size(); ++q) {
        if (nn[q].b >= 0 && nn[q].distance <= match_threshold_) continue;
        const auto& m = matches[fresh_match[q]];
        const int fa = ia[m.a], fb = ib[m.b];
        const Vec2& pa = Fa.observations[fa].pixel;
        const Vec2& pb = Fb.observations[fb].pixel;
        Vec3 X;
        try {
            X = triangulate(pose_a, K, pa, pose_b, K, pb, cfg_.min_triangulation_angle);
        } catch (const DegenerateError&) {
            continue;
        }
        const auto ra = project(K, pose_a, X), rb = project(K, pose_b, X);
        if (!ra || !rb || (*ra - pa).norm() > cfg_.reprojection_threshold ||
            (*rb - pb).norm() > cfg_.reprojection_threshold) {
            continue;
        }
        Landmark lm;
        lm.id = allocate_landmark_id(submap, frame_a, fa, frame_b, fb);
        lm.position = X;
        lm.descriptor = Fa.observations[fa].descriptor;
        lm.source_view_direction = (X - pose_a.center()).normalized();
        lm.observations = {{frame_a, pa}, {frame_b, pb}};
        lm.truth_id = Fa.observations[fa].truth_id;
        track_a.emplace_back(fa, lm.id);
        track_b.emplace_back(fb, lm.id);
        submap.landmarks.emplace(lm.id, std::move(lm));
        ++added;
    }
    return added;
}

void SubmapBuilder::run_ba(Submap& submap) {
    BAProblem problem;
    problem.principal_point = K_.principal_point;
    std::map<std::uint32_t, int> camera_of;
    for (std::size_t k = 0; k < submap.keyframes.size(); ++k) {
        const auto& kf = submap.keyframes[k];
        camera_of[kf.frame_id] = static_cast<int>(k);
        problem.cameras.push_back({kf.pose, kf.focal, k == 0});
    }
    std::vector<Landmark*> order;
    for (auto& [id, lm] : submap.landmarks) {
        if (lm.observations.size() < 2) continue;
        const int p = static_cast<int>(problem.points.size());
        problem.points.push_back(lm.position);
        order.push_back(&lm);
        for (const auto& o : lm.observations) {
            const auto it = camera_of.find(o.frame_id);
            if (it != camera_of.end()) problem.observations.push_back({it->second, p, o.pixel});
        }
    }
    const BASummary s = solve_ba(problem, ba_);
    for (std::size_t k = 0; k < submap.keyframes.size(); ++k) {
        submap.keyframes[k].pose = problem.cameras[k].pose;
        submap.keyframes[k].focal = problem.cameras[k].focal;
        tracked_[submap.keyframes[k].frame_id].pose = problem.cameras[k].pose;
    }
    for (std::size_t p = 0; p < order.size(); ++p) order[p]->position = problem.points[p];
    if (cfg_.estimate_focal) focal_ = submap.median_focal();
    submap.final_rms = s.final_rms;
    emit({{"event", "bundle_adjust"},
          {"submap", submap.id},
          {"keyframes", submap.keyframes.size()},
          {"landmarks", order.size()},
          {"observations", problem.observations.size()},
          {"initial_rms", s.initial_rms},
          {"final_rms", s.final_rms},
          {"accepted_steps", s.accepted_steps},
          {"converged", s.converged}});
}

namespace {

// Reprojection errors of a landmark over its keyframe observations.
template <typename F>
void for_each_error(const Submap& submap, const std::map<std::uint32_t, const Keyframe*>& kfs,
                    const Landmark& lm, F&& fn) {
    for (const auto& o : lm.observations) {
        const auto it = kfs.find(o.frame_id);
        if (it == kfs.end()) continue;
        CameraIntrinsics K;
        K.focal = it->second->focal;
        K.principal_point = submap.principal_point;
        const auto p = project(K, it->second->pose, lm.position);
        fn(p ? (*p - o.pixel).norm() : std::numeric_limits<double>::infinity());
    }
}

std::map<std::uint32_t, const Keyframe*> keyframe_index(const Submap& submap) {
    std::map<std::uint32_t, const Keyframe*> m;
    for (const auto& k : submap.keyframes) m[k.frame_id] = &k;
    return m;
}

}  // namespace

int SubmapBuilder::filter_post_ba(Submap& submap) {
    const auto kfs = keyframe_index(submap);
    int removed = 0;
    for (auto it = submap.landmarks.begin(); it != submap.landmarks.end();) {
        double worst = 0.0;
        for_each_error(submap, kfs, it->second, [&](double e) { worst = std::max(worst, e); });
        if (worst > cfg_.reprojection_threshold) {
            it = submap.landmarks.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    return removed;
}

int SubmapBuilder::filter_knn(Submap& submap) {
    std::vector<Vec3> pts;
    std::vector<std::uint32_t> ids;
    for (const auto& [id, lm] : submap.landmarks) {
        pts.push_back(lm.position);
        ids.push_back(id);
    }
    const auto mask = knn_outlier_mask(pts, cfg_.knn_k, cfg_.knn_sigma);
    int removed = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        submap.landmarks.erase(ids[i]);
        ++removed;
    }
    return removed;
}

int SubmapBuilder::filter_completion(Submap& submap) {
    const auto kfs = keyframe_index(submap);
    int removed = 0;
    for (auto it = submap.landmarks.begin(); it != submap.landmarks.end();) {
        double best = std::numeric_limits<double>::infinity();
        for_each_error(submap, kfs, it->second, [&](double e) { best = std::min(best, e); });
        const bool short_track = static_cast<int>(it->second.observations.size()) < cfg_.min_track_length;
        if (best > cfg_.reprojection_threshold || short_track) {
            it = submap.landmarks.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    return removed;
}

bool SubmapBuilder::bootstrap(Submap& submap, std::uint32_t& cursor) {
    const auto n = static_cast<std::uint32_t>(source_.size());
    std::uint32_t s = cursor;
    const auto thr = static_cast<float>(match_threshold_);
    while (s + 1 < n) {
        const Frame& F0 = frame(s);
        std::vector<Descriptor> d0;
        for (const auto& o : F0.observations) d0.push_back(o.descriptor);
        bool advanced = false;
        for (std::uint32_t f = s + 1; f < n; ++f) {
            const Frame& F1 = frame(f);
            std::vector<Descriptor> d1;
            for (const auto& o : F1.observations) d1.push_back(o.descriptor);
            const auto matches = match_mutual_nn(d0, d1, thr);
            const CameraIntrinsics K = K_.with_focal(focal_);
            std::optional<RelativePoseResult> rel;
            if (static_cast<int>(matches.size()) >= std::max(5, cfg_.essential.min_inliers)) {
                std::vector<PixelMatch> px;
                for (const auto& m : matches) px.emplace_back(F0.observations[m.a].pixel, F1.observations[m.b].pixel);
                RansacConfig rc = cfg_.essential;
                rc.seed = cfg_.seed ^ (static_cast<std::uint64_t>(f) * 0x9E3779B97F4A7C15ull);
                rel = estimate_relative_pose(px, K, rc);
            }
            if (!rel) {
                emit({{"event", "bootstrap_retry"}, {"submap", submap.id}, {"start", s}, {"frame", f}});
                ++s;
                advanced = true;
                break;
            }

            // Triangulate the inliers against the unit-baseline relative pose.
            struct Candidate {
                int a, b;
                Vec3 X;
                double angle;
            };
            std::vector<Candidate> tri;
            double angle_sum = 0.0;
            const SE3Pose origin = SE3Pose::identity();
            for (std::size_t k = 0; k < matches.size(); ++k) {
                if (!rel->inliers[k]) continue;
                const Vec2& pa = F0.observations[matches[k].a].pixel;
                const Vec2& pb = F1.observations[matches[k].b].pixel;
                try {
                    const Vec3 X = triangulate(origin, K, pa, rel->pose, K, pb, 0.0);
                    const double angle = triangulation_angle(origin, rel->pose, X);
                    angle_sum += angle;
                    tri.push_back({matches[k].a, matches[k].b, X, angle});
                } catch (const Error&) {
                }
            }
            const double mean_angle = tri.empty() ? 0.0 : angle_sum / static_cast<double>(tri.size());
            if (!(rel->num_inliers < cfg_.tau_stereo || mean_angle > cfg_.alpha_stereo)) continue;

            submap.landmarks.clear();
            tracked_.clear();
            auto& t0 = tracked_[s];
            auto& t1 = tracked_[f];
            t0.pose = origin;
            t1.pose = rel->pose;
            for (const auto& c : tri) {
                if (c.angle < cfg_.min_triangulation_angle) continue;
                const auto ra = project(K, origin, c.X), rb = project(K, rel->pose, c.X);
                const Vec2& pa = F0.observations[c.a].pixel;
                const Vec2& pb = F1.observations[c.b].pixel;
                if (!ra || !rb || (*ra - pa).norm() > cfg_.reprojection_threshold ||
                    (*rb - pb).norm() > cfg_.reprojection_threshold) {
                    continue;
                }
                Landmark lm;
                lm.id = allocate_landmark_id(submap, s, c.a, f, c.b);
                lm.position = c.X;
                lm.descriptor = F0.observations[c.a].descriptor;
                lm.source_view_direction = c.X.normalized();
                lm.observations = {{s, pa}, {f, pb}};
                lm.truth_id = F0.observations[c.a].truth_id;
                t0.matches.emplace_back(c.a, lm.id);
                t1.matches.emplace_back(c.b, lm.id);
                submap.landmarks.emplace(lm.id, std::move(lm));
            }
            if (static_cast<int>(submap.landmarks.size()) < cfg_.min_bootstrap_landmarks) {
                emit({{"event", "bootstrap_retry"}, {"submap", submap.id}, {"start", s}, {"frame", f},
                      {"landmarks", submap.landmarks.size()}});
                submap.landmarks.clear();
                ++s;
                advanced = true;
                break;
            }
            submap.first_frame = s;
            submap.keyframes = {{s, origin, KeyframeKind::BootstrapFirst, focal_},
                                {f, rel->pose, KeyframeKind::BootstrapSecond, focal_}};
            run_ba(submap);
            filter_post_ba(submap);
            reference_count_ = static_cast<int>(submap.landmarks.size());
            emit({{"event", "bootstrap"}, {"submap", submap.id}, {"first", s}, {"second", f},
                  {"inliers", rel->num_inliers}, {"mean_angle_deg", mean_angle},
                  {"landmarks", submap.landmarks.size()}});
            cursor = f;
            return true;
        }
        if (!advanced) break;
    }
    cursor = n == 0 ? 0 : n - 1;
    return false;
}

bool SubmapBuilder::insert_keyframes(Submap& submap, std::uint32_t current, const TrackResult& tracked) {
    const Keyframe& prev = submap.keyframes.back();
    const std::uint32_t mid = middle_frame(prev.frame_id, current);
    const bool add_mid = mid != prev.frame_id && mid != current &&
                         static_cast<int>(submap.keyframes.size()) + 2 <= cfg_.keyframes_per_submap &&
                         tracked_.count(mid) > 0;
    const std::uint32_t a = add_mid ? mid : prev.frame_id;
    const SE3Pose pose_a = add_mid ? tracked_[mid].pose : prev.pose;
    const auto used_a = tracked_[a].matches;

    const std::size_t before = submap.landmarks.size();
    const int added = triangulate_pair(submap, a, pose_a, current, tracked.pose, used_a, tracked.matches);
    if (added < 0) {
        emit({{"event", "keyframe_aborted"}, {"submap", submap.id}, {"frame", current}, {"middle", a}});
        return false;
    }

    const auto observe = [&](std::uint32_t frame_id, const std::vector<std::pair<int, std::uint32_t>>& m) {
        const Frame& F = frame(frame_id);
        for (const auto& [feature, id] : m) {
            auto it = submap.landmarks.find(id);
            if (it == submap.landmarks.end()) continue;
            auto& obs = it->second.observations;
            if (std::any_of(obs.begin(), obs.end(), [&](const LandmarkObservation& o) { return o.frame_id == frame_id; })) {
                continue;
            }
            obs.push_back({frame_id, F.observations[feature].pixel});
        }
    };
    if (add_mid) {
        submap.keyframes.push_back({mid, pose_a, KeyframeKind::Middle, focal_});
        observe(mid, used_a);
    }
    submap.keyframes.push_back({current, tracked.pose, KeyframeKind::Current, focal_});
    observe(current, tracked.matches);

    run_ba(submap);
    const int removed = filter_post_ba(submap);
    int visible = 0;
    for (const auto& [id, lm] : submap.landmarks) {
        for (const auto& o : lm.observations) visible += o.frame_id == current;
    }
    reference_count_ = visible;
    emit({{"event", "keyframe"}, {"submap", submap.id}, {"frame", current}, {"middle", add_mid ? static_cast<int>(mid) : -1},
          {"pnp_inliers", tracked.inliers}, {"new_landmarks", added},
          {"duplicates_skipped", static_cast<int>(submap.landmarks.size()) - static_cast<int>(before) - added + removed},
          {"removed_post_ba", removed}, {"landmarks", submap.landmarks.size()},
          {"keyframes", submap.keyframes.size()}});
    return true;
}

void SubmapBuilder::complete(Submap& submap) {
    const int knn_removed = filter_knn(submap);
    run_ba(submap);
    const int post_removed = filter_post_ba(submap);
    const int completion_removed = filter_completion(submap);

    const std::uint32_t next = next_submap_start(submap.first_frame, submap.last_frame, cfg_.overlap_fraction);
    std::map<std::uint32_t, const Keyframe*> kfs = keyframe_index(submap);
    std::unordered_map<std::uint64_t, std::uint32_t> carry;
    submap.frame_poses.clear();
    SE3Pose prev_pose = SE3Pose::identity(), prev_prev = SE3Pose::identity();
    int failures = 0;
    for (std::uint32_t f = submap.first_frame; f <= submap.last_frame; ++f) {
        SE3Pose prior;
        const auto kf = kfs.find(f);
        const auto tr = tracked_.find(f);
        if (kf != kfs.end()) {
            prior = kf->second->pose;
        } else if (tr != tracked_.end()) {
            prior = tr->second.pose;
        } else {
            prior = (prev_pose * prev_prev.inverse()) * prev_pose;
        }
        const auto r = track_frame(submap, frame(f), prior, focal_);
        FramePose fp{f, prior, r.has_value(), r ? r->inliers : 0};
        if (kf != kfs.end()) {
            fp.pose = kf->second->pose;
            fp.relocalized = true;
        } else if (r) {
            fp.pose = r->pose;
        } else {
            ++failures;
        }
        if (r && f >= next) {
            for (const auto& [feature, id] : r->matches) carry[feature_key(f, feature)] = id;
        }
        submap.frame_poses.push_back(fp);
        prev_prev = f == submap.first_frame ? fp.pose : prev_pose;
        prev_pose = fp.pose;
    }
    carryover_ = std::move(carry);
    // Fixed median depth: every submap arrives in comparable units, so the
    // alignment's log-scale prior sits near zero instead of pulling on the
    // arbitrary bootstrap baseline, and squared distances outweigh it.
    const double depth = submap.median_landmark_depth();
    if (depth > 0.0) submap.rescale(cfg_.submap_depth_units / depth);
    submap.status = SubmapStatus::Completed;
    next_start_ = next;
    emit({{"event", "submap_completed"}, {"submap", submap.id}, {"first", submap.first_frame},
          {"last", submap.last_frame}, {"keyframes", submap.keyframes.size()},
          {"landmarks", submap.landmarks.size()}, {"removed_knn", knn_removed},
          {"removed_post_ba", post_removed}, {"removed_completion", completion_removed},
          {"relocalization_failures", failures}, {"final_rms", submap.final_rms},
          {"median_focal", submap.median_focal()}, {"carryover", carryover_.size()}});
}

Submap SubmapBuilder::fail(Submap submap, std::uint32_t last, const std::string& reason) {
    submap.status = SubmapStatus::Failed;
    submap.failure_reason = reason;
    submap.last_frame = std::max(submap.first_frame, last);
    emit({{"event", "submap_failed"}, {"submap", submap.id}, {"first", submap.first_frame},
          {"last", submap.last_frame}, {"reason", reason}, {"keyframes", submap.keyframes.size()}});
    return submap;
}

std::optional<Submap> SubmapBuilder::next() {
    const auto n = static_cast<std::uint32_t>(source_.size());
    if (next_start_ >= n) return std::nullopt;
    const auto t0 = std::chrono::steady_clock::now();
    evict_before(next_start_);

    Submap submap;
    submap.id = next_submap_id_++;
    submap.principal_point = K_.principal_point;
    submap.first_frame = next_start_;
    tracked_.clear();

    std::uint32_t cursor = next_start_;
    if (!bootstrap(submap, cursor)) {
        next_start_ = n;
        carryover_.clear();
        Submap s = fail(std::move(submap), n - 1, "stream ended during bootstrap");
        s.build_seconds = seconds_since(t0);
        return s;
    }

    SE3Pose prev = submap.keyframes.back().pose;
    SE3Pose velocity = motion_per_frame(submap.keyframes.front().pose, prev,
                                        static_cast<double>(cursor - submap.first_frame));
    for (std::uint32_t f = cursor + 1; f < n; ++f) {
        const SE3Pose prior = velocity * prev;
        const auto tr = track_frame(submap, frame(f), prior, focal_);
        if (!tr) {
            next_start_ = f;
            carryover_.clear();
            emit({{"event", "tracking_lost"}, {"submap", submap.id}, {"frame", f}});
            Submap s = fail(std::move(submap), f - 1, "tracking lost");
            s.build_seconds = seconds_since(t0);
            return s;
        }
        tracked_[f] = {tr->pose, tr->matches};
        velocity = tr->pose * prev.inverse();
        prev = tr->pose;

        const int tau = cfg_.tau_resection > 0
                            ? cfg_.tau_resection
                            : std::max(cfg_.tau_resection_floor,
                                       static_cast<int>(std::lround(cfg_.tau_resection_fraction * reference_count_)));
        if (!should_add_keyframe(tr->inliers, tau)) continue;
        if (!insert_keyframes(submap, f, *tr)) continue;
        prev = submap.keyframes.back().pose;
        if (static_cast<int>(submap.keyframes.size()) >= cfg_.keyframes_per_submap) {
            submap.last_frame = f;
            complete(submap);
            submap.build_seconds = seconds_since(t0);
            return submap;
        }
    }
    next_start_ = n;
    carryover_.clear();
    Submap s = fail(std::move(submap), n - 1, "stream ended before the keyframe limit");
    s.build_seconds = seconds_since(t0);
    return s;
}

std::vector<Submap> build_submaps(const FrameSource& source, const BuilderConfig& cfg, const BAOptions& ba,
                                  EventSink sink) {
    SubmapBuilder builder(source, cfg, ba, std::move(sink));
    std::vector<Submap> out;
    while (auto s = builder.next()) out.push_back(std::move(*s));
    return out;
}

}  // namespace aeromap
