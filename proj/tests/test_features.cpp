#include "aeromap/features.hpp"
#include "aeromap/outlier_filter.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace aeromap;
using namespace aeromap::testing;

namespace {

Descriptor random_descriptor(std::mt19937_64& rng) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    Descriptor d;
    float s = 0.0f;
    for (float& v : d) {
        v = n(rng);
        s += v * v;
    }
    for (float& v : d) v /= std::sqrt(s);
    return d;
}

Descriptor perturbed(const Descriptor& base, std::mt19937_64& rng, float sigma) {
    std::normal_distribution<float> n(0.0f, sigma);
    Descriptor d = base;
    for (float& v : d) v += n(rng);
    return d;
}

}  // namespace

TEST(DescriptorDistance, Arithmetic) {
    Descriptor a{}, b{};
    b[0] = 3.0f;
    b[5] = 4.0f;
    EXPECT_FLOAT_EQ(descriptor_distance(a, b), 5.0f);
    EXPECT_FLOAT_EQ(descriptor_distance(b, b), 0.0f);
}

TEST(MutualNN, RecoversPermutedNoisyCopy) {
    std::mt19937_64 rng(1);
    std::vector<Descriptor> a(300);
    for (auto& d : a) d = random_descriptor(rng);
    std::vector<int> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Descriptor> b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) b[perm[i]] = perturbed(a[i], rng, 0.01f);
    const auto m = match_mutual_nn(a, b, 0.5f);
    ASSERT_EQ(m.size(), a.size());
    for (const auto& x : m) EXPECT_EQ(x.b, perm[x.a]);
}

TEST(MutualNN, ThresholdAndEmpty) {
    std::mt19937_64 rng(2);
    std::vector<Descriptor> a(50), b(50);
    for (auto& d : a) d = random_descriptor(rng);
    for (auto& d : b) d = random_descriptor(rng);
    EXPECT_TRUE(match_mutual_nn(a, b, 0.5f).empty());
    EXPECT_TRUE(match_mutual_nn(a, {}, 10.0f).empty());
    const auto self = match_mutual_nn(a, a, 1e-3f);
    ASSERT_EQ(self.size(), a.size());
    for (const auto& x : self) EXPECT_EQ(x.a, x.b);
}

TEST(MutualNN, MatchesBruteForce) {
    std::mt19937_64 rng(3);
    std::vector<Descriptor> a(120), b(150);
    for (auto& d : a) d = random_descriptor(rng);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = i < 100 ? perturbed(a[i], rng, 0.05f) : random_descriptor(rng);
    const auto nearest = [](const Descriptor& q, const std::vector<Descriptor>& set) {
        int best = -1;
        float bd = 1e30f;
        for (std::size_t i = 0; i < set.size(); ++i) {
            const float d = descriptor_distance(q, set[i]);
            if (d < bd) {
                bd = d;
                best = static_cast<int>(i);
            }
        }
        return best;
    };
    std::vector<std::pair<int, int>> expected;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int j = nearest(a[i], b);
        if (nearest(b[j], a) == static_cast<int>(i) && descriptor_distance(a[i], b[j]) <= 0.9f) {
            expected.emplace_back(static_cast<int>(i), j);
        }
    }
    std::vector<std::pair<int, int>> got;
    for (const auto& m : match_mutual_nn(a, b, 0.9f)) got.emplace_back(m.a, m.b);
    EXPECT_EQ(got, expected);
}

TEST(MedianNN, SmallSets) {
    EXPECT_EQ(median_nn_distance(std::vector<Descriptor>(1)), 0.0f);
    std::vector<Descriptor> s(3, Descriptor{});
    s[1][0] = 1.0f;
    s[2][0] = 3.0f;  // NN distances 1, 1, 2
    EXPECT_FLOAT_EQ(median_nn_distance(s), 1.0f);
}

TEST(PixelGrid, MatchesBruteForceRadiusQuery) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    std::vector<Observation> obs(2000);
    for (auto& o : obs) o.pixel = Vec2(u(rng), u(rng));
    const PixelGrid grid(obs, 25.0);
    std::vector<int> got;
    for (int q = 0; q < 200; ++q) {
        const Vec2 p(u(rng) * 1.2 - 100.0, u(rng) * 1.2 - 100.0);
        grid.query(p, 30.0, got);
        std::sort(got.begin(), got.end());
        std::vector<int> expected;
        for (int i = 0; i < static_cast<int>(obs.size()); ++i) {
            if ((obs[i].pixel - p).squaredNorm() <= 900.0) expected.push_back(i);
        }
        EXPECT_EQ(got, expected);
    }
}

namespace {

std::vector<bool> brute_force_knn_mask(const std::vector<Vec3>& pts, int k, double sigma) {
    const std::size_t n = pts.size();
    std::vector<double> means(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d.push_back((pts[j] - pts[i]).norm());
        }
        std::sort(d.begin(), d.end());
        means[i] = std::accumulate(d.begin(), d.begin() + k, 0.0) / k;
    }
    const double mean = std::accumulate(means.begin(), means.end(), 0.0) / n;
    double var = 0.0;
    for (double v : means) var += (v - mean) * (v - mean);
    const double limit = mean + sigma * std::sqrt(var / n);
    std::vector<bool> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = means[i] > limit;
    return mask;
}

}  // namespace

TEST(KnnFilter, EqualsBruteForceOn500Points) {
    std::mt19937_64 rng(5);
    std::vector<Vec3> pts;
    for (int i = 0; i < 480; ++i) pts.push_back(random_vec3(rng, -10, 10));
    for (int i = 0; i < 20; ++i) pts.push_back(random_vec3(rng, -60, 60));
    const auto got = knn_outlier_mask(pts, 30, 2.0);
    const auto expected = brute_force_knn_mask(pts, 30, 2.0);
    EXPECT_EQ(got, expected);
    EXPECT_GT(std::count(got.begin(), got.end(), true), 0);
}

TEST(KnnFilter, TeleportedLandmarkRemoved) {
    std::mt19937_64 rng(6);
    std::vector<Vec3> pts;
    for (int i = 0; i < 400; ++i) pts.push_back(random_vec3(rng, -1, 1));
    pts[123] = Vec3(100.0 * std::sqrt(3.0), 0, 0);
    const auto mask = knn_outlier_mask(pts, 30, 2.0);
    EXPECT_TRUE(mask[123]);
}

TEST(KnnFilter, IdenticalSpacingRemovesNothing) {
    std::vector<Vec3> cube;
    for (int i = 0; i < 8; ++i) cube.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    const auto mask = knn_outlier_mask(cube, 3, 2.0);
    EXPECT_EQ(std::count(mask.begin(), mask.end(), true), 0);
}

TEST(KnnFilter, UniformClusterLosesAtMostTheTail) {
    std::mt19937_64 rng(7);
    std::vector<Vec3> pts;
    for (int i = 0; i < 1000; ++i) pts.push_back(random_vec3(rng, 0, 10));
    const auto mask = knn_outlier_mask(pts, 30, 2.0);
    EXPECT_LT(std::count(mask.begin(), mask.end(), true), 100);
}

TEST(KnnFilter, TooFewPointsIsNoop) {
    std::vector<Vec3> pts(30, Vec3::Zero());
    pts[0] = Vec3(1e6, 0, 0);
    const auto mask = knn_outlier_mask(pts, 30, 2.0);
    EXPECT_EQ(std::count(mask.begin(), mask.end(), true), 0);
}
