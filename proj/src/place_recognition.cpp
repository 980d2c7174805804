#include "aeromap/place_recognition.hpp"

#include <algorithm>
#include <mutex>

namespace aeromap {

SubmapDatabase::SubmapDatabase(std::shared_ptr<const VocabularyTree> tree) : tree_(std::move(tree)) {
    if (!tree_ || tree_->num_words() == 0) throw PreconditionError("SubmapDatabase: empty vocabulary");
}

void SubmapDatabase::add(std::uint32_t submap_id, std::span<const Descriptor> descriptors) {
    BowVector v = bow_vector(*tree_, descriptors);  // outside the lock
    std::unique_lock lock(mutex_);
    if (vectors_.count(submap_id)) {
        throw PreconditionError("SubmapDatabase: submap " + std::to_string(submap_id) + " already added");
    }
    for (const auto& [w, x] : v) index_[w].push_back({submap_id, x});
    vectors_.emplace(submap_id, std::move(v));
}

void SubmapDatabase::add(const Submap& submap) {
    const auto d = landmark_descriptors(submap);
    add(submap.id, d);
}

std::vector<QueryResult> SubmapDatabase::query(const BowVector& q, std::optional<std::uint32_t> exclude) const {
    // For L1-normalized vectors (2 - |a-b|_1)/2 = sum over shared words of min(a_w, b_w).
    std::map<std::uint32_t, double> acc;
    {
        std::shared_lock lock(mutex_);
        for (const auto& [w, x] : q) {
            const auto it = index_.find(w);
            if (it == index_.end()) continue;
            for (const auto& p : it->second) {
                if (exclude && p.submap_id == *exclude) continue;
                acc[p.submap_id] += std::min(x, p.weight);
            }
        }
    }
    std::vector<QueryResult> out;
    out.reserve(acc.size());
    for (const auto& [id, s] : acc) out.push_back({id, s});
    std::stable_sort(out.begin(), out.end(), [](const QueryResult& a, const QueryResult& b) { return a.score > b.score; });
    return out;
}

std::vector<QueryResult> SubmapDatabase::query(std::span<const Descriptor> descriptors,
                                               std::optional<std::uint32_t> exclude) const {
    return query(bow_vector(*tree_, descriptors), exclude);
}

std::vector<QueryResult> SubmapDatabase::query(const Submap& submap) const {
    const auto d = landmark_descriptors(submap);
    return query(d, submap.id);
}

std::size_t SubmapDatabase::size() const {
    std::shared_lock lock(mutex_);
    return vectors_.size();
}

BowVector SubmapDatabase::vector(std::uint32_t submap_id) const {
    std::shared_lock lock(mutex_);
    const auto it = vectors_.find(submap_id);
    if (it == vectors_.end()) throw PreconditionError("SubmapDatabase: unknown submap " + std::to_string(submap_id));
    return it->second;
}

std::vector<SubmapDatabase::Posting> SubmapDatabase::postings(std::uint32_t word) const {
    std::shared_lock lock(mutex_);
    const auto it = index_.find(word);
    return it == index_.end() ? std::vector<Posting>{} : it->second;
}

std::vector<Descriptor> landmark_descriptors(const Submap& submap) {
    std::vector<Descriptor> out;
    out.reserve(submap.landmarks.size());
    for (const auto& [id, lm] : submap.landmarks) out.push_back(lm.descriptor);
    return out;
}

std::vector<QueryResult> select_candidates(const std::vector<QueryResult>& ranked, int top_n,
                                           double relative_floor) {
    std::vector<QueryResult> out;
    if (ranked.empty()) return out;
    const double floor = relative_floor * ranked.front().score;
    for (const auto& r : ranked) {
        if (static_cast<int>(out.size()) >= top_n || r.score < floor || !(r.score > 0.0)) break;
        out.push_back(r);
    }
    return out;
}

}  // namespace aeromap
