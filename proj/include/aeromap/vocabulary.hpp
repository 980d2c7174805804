#pragma once

#include "aeromap/features.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace aeromap {

/// Hierarchical k-means tree of visual words. Node 0 is the root, nodes are
/// stored breadth-first and leaves carry word ids in node order.
class VocabularyTree {
public:
    struct Node {
        Descriptor center{};
        std::int32_t first_child = -1;  ///< children are stored contiguously
        std::int32_t num_children = 0;
        std::int32_t word = -1;         ///< leaf word id, -1 for inner nodes
    };

    VocabularyTree() = default;

    int branching() const { return k_; }
    int depth() const { return L_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t num_words() const { return weights_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    double weight(std::uint32_t word) const { return weights_.at(word); }

    /// Greedy nearest-child descent; ties go to the lowest child index.
    std::uint32_t quantize(const Descriptor& d) const;

    /// Inverse document frequency log(N / n_w) from a training corpus of
    /// documents (each a descriptor set). Words absent from every document are
    /// treated as seen once.
    void set_idf(const std::vector<std::vector<Descriptor>>& documents);

    void save(std::ostream& out) const;
    static VocabularyTree load(std::istream& in);
    void save(const std::string& path) const;
    static VocabularyTree load(const std::string& path);

    bool operator==(const VocabularyTree&) const;

    friend VocabularyTree build_vocabulary(std::span<const Descriptor>, int, int, std::uint64_t);

private:
    int k_ = 0;
    int L_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<Node> nodes_;
    std::vector<double> weights_;
};

/// Hierarchical k-means (k-means++ seeding, Lloyd iterations until stable, at most 30)
/// with a fixed seed. A node with fewer than k distinct training descriptors
/// gets fewer children. Weights start at 1.
VocabularyTree build_vocabulary(std::span<const Descriptor> sample, int k, int L, std::uint64_t seed);

/// Sparse word -> weight map, L1-normalized when nonempty.
using BowVector = std::map<std::uint32_t, double>;

BowVector bow_vector(const VocabularyTree& tree, std::span<const Descriptor> descriptors);

/// (2 - |a - b|_1) / 2 for L1-normalized vectors, evaluated as the sum of
/// min(a_w, b_w) over shared words; 1 for identical, 0 for disjoint.
double bow_similarity(const BowVector& a, const BowVector& b);

}  // namespace aeromap
