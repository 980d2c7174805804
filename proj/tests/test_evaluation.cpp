#include "aeromap/evaluation.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace aeromap;
using namespace aeromap::testing;

namespace {

GroundTruth make_truth(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GroundTruth t;
    t.intrinsics = {1800.0, Vec2(960, 540), 1920, 1080};
    for (int i = 0; i < n; ++i) t.landmarks.push_back(random_vec3(rng, -500, 500));
    for (int i = 0; i < 20; ++i) t.poses.push_back(look_at(Vec3(300 * std::cos(i * 0.3), 300 * std::sin(i * 0.3), 150), Vec3::Zero()));
    return t;
}

std::vector<std::uint32_t> all_ids(std::size_t n) {
    std::vector<std::uint32_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i);
    return ids;
}

std::vector<EstimatedPose> truth_poses(const GroundTruth& t) {
    std::vector<EstimatedPose> p;
    for (std::size_t i = 0; i < t.poses.size(); ++i) p.push_back({static_cast<std::uint32_t>(i), t.poses[i]});
    return p;
}

}  // namespace

TEST(EvaluateMap, IdentityIsZero) {
    const GroundTruth t = make_truth(200, 1);
    const auto e = evaluate_map(t.landmarks, all_ids(200), truth_poses(t), t);
    EXPECT_LT(e.rmse, 1e-9);
    EXPECT_EQ(e.matched, 200);
    EXPECT_DOUBLE_EQ(e.matched_fraction, 1.0);
    EXPECT_EQ(e.poses, 20);
    EXPECT_LT(e.position_rmse, 1e-9);
    EXPECT_LT(e.rotation_max_deg, 1e-6);
}

TEST(EvaluateMap, GaugeTransformedIsZero) {
    const GroundTruth t = make_truth(200, 2);
    std::mt19937_64 rng(3);
    const Sim3Transform G = random_sim3(rng);  // maps truth into the estimate's frame
    AlignedVector<Vec3> est;
    for (const auto& x : t.landmarks) est.push_back(G.apply(x));
    std::vector<EstimatedPose> poses;
    for (std::size_t i = 0; i < t.poses.size(); ++i) {
        // camera-from-estimate: same camera, world expressed through G
        const Sim3Transform Gi = G.inverse();
        SE3Pose p;
        p.rotation = t.poses[i].rotation * Gi.rotation;
        const Vec3 c = G.apply(t.poses[i].center());
        p.translation = -p.rotation * c;
        poses.push_back({static_cast<std::uint32_t>(i), p});
    }
    const auto e = evaluate_map(est, all_ids(200), poses, t);
    EXPECT_LT(e.rmse, 1e-8);
    EXPECT_NEAR(e.gauge.scale * G.scale, 1.0, 1e-9);
    EXPECT_LT(e.position_max, 1e-8);
    EXPECT_LT(e.rotation_max_deg, 1e-6);
}

TEST(EvaluateMap, IsotropicNoiseGivesSigmaRootThree) {
    const GroundTruth t = make_truth(1000, 4);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 0.1);
    AlignedVector<Vec3> est;
    for (const auto& x : t.landmarks) est.push_back(x + Vec3(n(rng), n(rng), n(rng)));
    const auto e = evaluate_map(est, all_ids(1000), {}, t);
    EXPECT_NEAR(e.rmse, 0.1 * std::sqrt(3.0), 0.05 * 0.1 * std::sqrt(3.0));
}

TEST(EvaluateMap, IgnoresUnlabeledAndNeedsThreeMatches) {
    const GroundTruth t = make_truth(10, 6);
    AlignedVector<Vec3> est(t.landmarks.begin(), t.landmarks.end());
    std::vector<std::uint32_t> ids(10, kNoTruthId);
    ids[0] = 0;
    ids[1] = 1;
    ids[2] = kOutlierTruthId;
    EXPECT_THROW(evaluate_map(est, ids, {}, t), PreconditionError);
    ids[3] = 3;
    est[4] = Vec3(1e6, 0, 0);  // unlabeled, must not matter
    const auto e = evaluate_map(est, ids, {}, t);
    EXPECT_EQ(e.matched, 3);
    EXPECT_LT(e.rmse, 1e-9);
}
