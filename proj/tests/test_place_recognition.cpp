#include "aeromap/place_recognition.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace aeromap;

namespace {

Descriptor random_unit_descriptor(std::mt19937_64& rng) {
    std::normal_distribution<float> g(0.0f, 1.0f);
    Descriptor d;
    float n = 0.0f;
    for (auto& v : d) {
        v = g(rng);
        n += v * v;
    }
    for (auto& v : d) v /= std::sqrt(n);
    return d;
}

// Literal (2 - |a-b|_1) / 2.
double l1_similarity(const BowVector& a, const BowVector& b) {
    std::map<std::uint32_t, double> diff = a;
    for (const auto& [w, x] : b) diff[w] -= x;
    double l1 = 0.0;
    for (const auto& [w, x] : diff) l1 += std::abs(x);
    return (2.0 - l1) / 2.0;
}

Descriptor jitter(const Descriptor& base, float sigma, std::mt19937_64& rng) {
    std::normal_distribution<float> g(0.0f, sigma);
    Descriptor d = base;
    for (auto& v : d) v += g(rng);
    return d;
}

std::vector<Descriptor> random_pool(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Descriptor> pool;
    for (int i = 0; i < n; ++i) pool.push_back(random_unit_descriptor(rng));
    return pool;
}

std::shared_ptr<VocabularyTree> trained_tree(const std::vector<Descriptor>& pool, int k, int L) {
    return std::make_shared<VocabularyTree>(build_vocabulary(pool, k, L, 7));
}

}  // namespace

TEST(Vocabulary, TwoClustersGiveTheirCentroids) {
    std::mt19937_64 rng(1);
    Descriptor a{}, b{};
    a[0] = 1.0f;
    b[1] = 1.0f;
    std::vector<Descriptor> sample;
    for (int i = 0; i < 50; ++i) sample.push_back(jitter(a, 0.01f, rng));
    for (int i = 0; i < 70; ++i) sample.push_back(jitter(b, 0.01f, rng));
    const VocabularyTree t = build_vocabulary(sample, 2, 1, 3);
    ASSERT_EQ(t.num_words(), 2u);

    // Direct centroid oracle.
    std::vector<Eigen::VectorXd> mean(2, Eigen::VectorXd::Zero(kDescriptorSize));
    for (int i = 0; i < 120; ++i) {
        mean[i < 50 ? 0 : 1] += Eigen::Map<const Eigen::VectorXf>(sample[i].data(), kDescriptorSize).cast<double>();
    }
    mean[0] /= 50.0;
    mean[1] /= 70.0;
    std::vector<Eigen::VectorXd> leaves;
    for (const auto& n : t.nodes()) {
        if (n.word >= 0) leaves.push_back(Eigen::Map<const Eigen::VectorXf>(n.center.data(), kDescriptorSize).cast<double>());
    }
    if ((leaves[0] - mean[0]).norm() > (leaves[1] - mean[0]).norm()) std::swap(leaves[0], leaves[1]);
    EXPECT_LT((leaves[0] - mean[0]).norm(), 1e-6);
    EXPECT_LT((leaves[1] - mean[1]).norm(), 1e-6);
}

TEST(Vocabulary, RepeatedDescriptorQuantizesConstantly) {
    std::mt19937_64 rng(2);
    const Descriptor d = random_unit_descriptor(rng);
    const std::vector<Descriptor> sample(40, d);
    const VocabularyTree t = build_vocabulary(sample, 10, 3, 1);
    const auto w = t.quantize(d);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(t.quantize(random_unit_descriptor(rng)), w);
    for (const auto& n : t.nodes()) {
        if (n.word >= 0) EXPECT_EQ(n.center, d);
    }
}

TEST(Vocabulary, DeterministicBoundedAndRoundTrips) {
    const auto pool = random_pool(3000, 4);
    const VocabularyTree a = build_vocabulary(pool, 10, 3, 11);
    const VocabularyTree b = build_vocabulary(pool, 10, 3, 11);
    EXPECT_TRUE(a == b);
    EXPECT_LE(a.num_words(), 1000u);
    EXPECT_GT(a.num_words(), 100u);
    for (const auto& n : a.nodes()) EXPECT_LE(n.num_children, 10);

    VocabularyTree c = a;
    std::vector<std::vector<Descriptor>> docs;
    for (int d = 0; d < 10; ++d) docs.emplace_back(pool.begin() + d * 300, pool.begin() + (d + 1) * 300);
    c.set_idf(docs);
    for (double w : c.weights()) EXPECT_GE(w, 0.0);
    std::stringstream ss;
    c.save(ss);
    const VocabularyTree back = VocabularyTree::load(ss);
    EXPECT_TRUE(back == c);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(back.quantize(pool[i]), c.quantize(pool[i]));

    std::stringstream bad("not a vocabulary");
    EXPECT_THROW(VocabularyTree::load(bad), DatasetError);
    EXPECT_THROW(build_vocabulary({}, 10, 3, 0), PreconditionError);
    EXPECT_THROW(build_vocabulary(pool, 1, 3, 0), PreconditionError);
}

TEST(Vocabulary, GreedyDescentMatchesNearestLeafOnSeparatedClusters) {
    // Three far-apart groups of three sub-clusters each: greedy descent is exact.
    std::mt19937_64 rng(9);
    std::vector<Descriptor> sample;
    for (int g = 0; g < 3; ++g) {
        Descriptor top{};
        top[g] = 1.0f;
        for (int s = 0; s < 3; ++s) {
            Descriptor sub = top;
            sub[10 + 3 * g + s] = 0.3f;
            for (int i = 0; i < 30; ++i) sample.push_back(jitter(sub, 0.005f, rng));
        }
    }
    const VocabularyTree t = build_vocabulary(sample, 3, 2, 5);
    ASSERT_EQ(t.num_words(), 9u);
    for (const auto& d : sample) {
        std::uint32_t best = 0;
        float best_d = 1e30f;
        for (const auto& n : t.nodes()) {
            if (n.word < 0) continue;
            float s = 0.0f;
            for (int i = 0; i < kDescriptorSize; ++i) s += (d[i] - n.center[i]) * (d[i] - n.center[i]);
            if (s < best_d) {
                best_d = s;
                best = static_cast<std::uint32_t>(n.word);
            }
        }
        EXPECT_EQ(t.quantize(d), best);
        // A leaf center quantizes to itself.
    }
    for (const auto& n : t.nodes()) {
        if (n.word >= 0) EXPECT_EQ(t.quantize(n.center), static_cast<std::uint32_t>(n.word));
    }
}

TEST(BowVector, NormalizedAndSimilarity) {
    const auto pool = random_pool(2000, 5);
    const auto tree = trained_tree(pool, 10, 2);
    const std::span<const Descriptor> s(pool);
    const BowVector a = bow_vector(*tree, s.subspan(0, 300));
    double sum = 0.0;
    for (const auto& [w, x] : a) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(bow_similarity(a, a), 1.0, 1e-12);
    EXPECT_TRUE(bow_vector(*tree, {}).empty());
    const BowVector b = bow_vector(*tree, s.subspan(300, 300));
    EXPECT_EQ(bow_similarity(a, b), bow_similarity(b, a));
    EXPECT_NEAR(bow_similarity(a, b), l1_similarity(a, b), 1e-12);

    BowVector x{{1, 0.5}, {2, 0.5}}, y{{3, 1.0}};
    EXPECT_EQ(bow_similarity(x, y), 0.0);
}

TEST(SubmapDatabase, RankingEqualsBruteForce) {
    const auto pool = random_pool(4000, 6);
    const auto tree = trained_tree(pool, 10, 3);
    SubmapDatabase db(tree);
    std::mt19937_64 rng(8);
    std::vector<std::vector<Descriptor>> sets(20);
    for (auto& set : sets) {
        const int n = 50 + static_cast<int>(rng() % 400);
        for (int i = 0; i < n; ++i) set.push_back(pool[rng() % pool.size()]);
    }
    for (std::uint32_t i = 0; i < 20; ++i) db.add(i, sets[i]);
    EXPECT_EQ(db.size(), 20u);
    EXPECT_THROW(db.add(3, sets[3]), PreconditionError);

    for (std::uint32_t q = 0; q < 20; ++q) {
        const auto ranked = db.query(sets[q], q);
        const BowVector vq = bow_vector(*tree, sets[q]);
        std::vector<QueryResult> brute;
        for (std::uint32_t j = 0; j < 20; ++j) {
            if (j == q) continue;
            const double s = bow_similarity(vq, db.vector(j));
            EXPECT_NEAR(s, l1_similarity(vq, db.vector(j)), 1e-12);
            if (s > 0.0) brute.push_back({j, s});
        }
        std::stable_sort(brute.begin(), brute.end(), [](auto& a, auto& b) { return a.score > b.score; });
        ASSERT_EQ(ranked.size(), brute.size());
        for (std::size_t r = 0; r < brute.size(); ++r) {
            EXPECT_EQ(ranked[r].submap_id, brute[r].submap_id);
            EXPECT_EQ(ranked[r].score, brute[r].score);
        }
    }
}

TEST(SubmapDatabase, PostingsReconstructVectorsAndIncrementalEqualsRebuild) {
    const auto pool = random_pool(2000, 10);
    const auto tree = trained_tree(pool, 10, 2);
    SubmapDatabase db(tree);
    const std::span<const Descriptor> s(pool);
    for (std::uint32_t i = 0; i < 5; ++i) db.add(i, s.subspan(i * 200, 200));
    db.add(5, std::span<const Descriptor>{});
    EXPECT_TRUE(db.vector(5).empty());

    std::map<std::uint32_t, BowVector> rebuilt;
    for (std::uint32_t w = 0; w < tree->num_words(); ++w) {
        for (const auto& p : db.postings(w)) rebuilt[p.submap_id][w] = p.weight;
    }
    for (std::uint32_t i = 0; i < 5; ++i) EXPECT_EQ(rebuilt[i], db.vector(i));
    EXPECT_FALSE(rebuilt.count(5));

    // Query before and after a full rebuild from the same vectors.
    const auto before = db.query(s.subspan(100, 300));
    SubmapDatabase again(tree);
    for (std::uint32_t i = 0; i < 5; ++i) again.add(i, s.subspan(i * 200, 200));
    again.add(5, std::span<const Descriptor>{});
    const auto after = again.query(s.subspan(100, 300));
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t r = 0; r < before.size(); ++r) {
        EXPECT_EQ(before[r].submap_id, after[r].submap_id);
        EXPECT_EQ(before[r].score, after[r].score);
    }
}

TEST(SubmapDatabase, SelfSimilarityRanksFirstAndDisjointScoresZero) {
    const auto pool = random_pool(2000, 12);
    const auto tree = trained_tree(pool, 10, 2);
    SubmapDatabase db(tree);
    const std::span<const Descriptor> s(pool);
    for (std::uint32_t i = 0; i < 6; ++i) db.add(i, s.subspan(i * 300, 300));
    db.add(100, s.subspan(600, 300));  // copy of submap 2 under another id
    const auto r = db.query(s.subspan(600, 300), 2u);
    ASSERT_FALSE(r.empty());
    EXPECT_EQ(r.front().submap_id, 100u);
    EXPECT_NEAR(r.front().score, 1.0, 1e-12);

    // Submaps built from one word each never meet.
    std::vector<Descriptor> one(10, pool[0]);
    std::vector<Descriptor> other;
    for (const auto& d : pool) {
        if (tree->quantize(d) != tree->quantize(pool[0])) {
            other.assign(10, d);
            break;
        }
    }
    SubmapDatabase small(tree);
    small.add(1, one);
    const auto q = small.query(other);
    EXPECT_TRUE(q.empty());
}

TEST(SubmapDatabase, CandidateSelection) {
    const std::vector<QueryResult> ranked{{4, 0.5}, {1, 0.3}, {9, 0.06}, {2, 0.04}, {3, 0.01}};
    const auto c = select_candidates(ranked, 5, 0.1);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[2].submap_id, 9u);
    EXPECT_EQ(select_candidates(ranked, 1, 0.1).size(), 1u);
    EXPECT_TRUE(select_candidates({}, 5, 0.1).empty());
}
