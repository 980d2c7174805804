#pragma once

#include "aeromap/submap.hpp"
#include "aeromap/vocabulary.hpp"

#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>

namespace aeromap {

struct QueryResult {
    std::uint32_t submap_id = 0;
    double score = 0.0;
};

/// Bag-of-words database over submaps with an inverted index. Queries only
/// touch postings of the query's words. add() takes an exclusive lock, queries
/// a shared one, so readers never see a half-added submap.
class SubmapDatabase {
public:
    struct Posting {
        std::uint32_t submap_id;
        double weight;
    };

    explicit SubmapDatabase(std::shared_ptr<const VocabularyTree> tree);

    /// Throws PreconditionError on a duplicate id.
    void add(std::uint32_t submap_id, std::span<const Descriptor> descriptors);
    void add(const Submap& submap);

    /// Ranked by descending score, ties by ascending id; only submaps sharing
    /// at least one word are returned. `exclude` is left out of the ranking.
    std::vector<QueryResult> query(const BowVector& q, std::optional<std::uint32_t> exclude = {}) const;
    std::vector<QueryResult> query(std::span<const Descriptor> descriptors,
                                   std::optional<std::uint32_t> exclude = {}) const;
    std::vector<QueryResult> query(const Submap& submap) const;

    std::size_t size() const;
    BowVector vector(std::uint32_t submap_id) const;
    std::vector<Posting> postings(std::uint32_t word) const;
    const VocabularyTree& tree() const { return *tree_; }

private:
    std::shared_ptr<const VocabularyTree> tree_;
    mutable std::shared_mutex mutex_;
    std::map<std::uint32_t, BowVector> vectors_;
    std::unordered_map<std::uint32_t, std::vector<Posting>> index_;
};

std::vector<Descriptor> landmark_descriptors(const Submap& submap);

/// Top-n results whose score is at least relative_floor x the best score.
std::vector<QueryResult> select_candidates(const std::vector<QueryResult>& ranked, int top_n,
                                           double relative_floor);

}  // namespace aeromap
