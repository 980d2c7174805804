#pragma once

#include "aeromap/alignment.hpp"
#include "aeromap/channel.hpp"
#include "aeromap/place_recognition.hpp"

#include "json.hpp"

#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>

namespace aeromap {

/// Immutable result of one alignment pass.
struct MapSnapshot {
    std::uint64_t version = 0;
    std::vector<std::uint32_t> submap_ids;
    GlobalMap map;
    OptimizationSummary optimization;
    int graph_nodes = 0;
    int graph_landmarks = 0;
    int graph_observations = 0;
    int graph_links = 0;
    int temporal_links = 0;
    int loop_links = 0;
    double latency_seconds = 0.0;
};

/// Sequential alignment state: every accepted submap goes into the place
/// recognition database, gets a temporal link to the previous completed
/// submap and loop links to verified database candidates, and the whole graph
/// is rebuilt, re-optimized from warm starts and fused.
class AlignmentEngine {
public:
    using EventSink = std::function<void(const nlohmann::json&)>;

    /// tree may be null, which disables loop closure.
    AlignmentEngine(AlignmentOptions opts, std::shared_ptr<const VocabularyTree> tree, EventSink sink = {});

    /// Failed submaps are logged and skipped (nullptr returned).
    std::shared_ptr<const MapSnapshot> add(Submap submap);

    std::shared_ptr<const MapSnapshot> latest() const { return latest_; }
    const std::deque<Submap>& submaps() const { return submaps_; }
    const std::vector<SubmapLink>& links() const { return links_; }

private:
    std::optional<SubmapLink> try_link(const Submap& a, const Submap& b, LinkKind kind,
                                       std::vector<Correspondence3D3D> corrs);
    void emit(nlohmann::json event) const;

    AlignmentOptions opts_;
    std::unique_ptr<SubmapDatabase> db_;
    EventSink sink_;
    std::deque<Submap> submaps_;
    std::vector<SubmapLink> links_;
    std::map<std::uint32_t, WarmStart> warm_;
    std::shared_ptr<const MapSnapshot> latest_;
    std::uint64_t version_ = 0;
};

/// The alignment thread: consumes submaps from a bounded channel and publishes
/// snapshots. Exceptions from a single submap are reported and skipped.
class AlignmentWorker {
public:
    AlignmentWorker(AlignmentEngine& engine, std::size_t capacity,
                    std::function<void(const std::shared_ptr<const MapSnapshot>&)> on_snapshot = {});
    ~AlignmentWorker();
    AlignmentWorker(const AlignmentWorker&) = delete;
    AlignmentWorker& operator=(const AlignmentWorker&) = delete;

    /// Blocks while the channel is full.
    void submit(Submap submap);
    /// Closes the channel and waits for the queue to drain.
    void finish();
    std::shared_ptr<const MapSnapshot> latest() const;

private:
    void loop();

    AlignmentEngine& engine_;
    BoundedChannel<Submap> channel_;
    std::function<void(const std::shared_ptr<const MapSnapshot>&)> on_snapshot_;
    mutable std::mutex mutex_;
    std::shared_ptr<const MapSnapshot> latest_;
    std::thread thread_;
};

}  // namespace aeromap
