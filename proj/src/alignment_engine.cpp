#include "aeromap/alignment_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>

namespace aeromap {

AlignmentEngine::AlignmentEngine(AlignmentOptions opts, std::shared_ptr<const VocabularyTree> tree,
                                 EventSink sink)
    : opts_(opts), sink_(std::move(sink)) {
    opts_.validate();
    if (tree) db_ = std::make_unique<SubmapDatabase>(std::move(tree));
}

void AlignmentEngine::emit(nlohmann::json event) const {
    if (sink_) sink_(event);
}

std::optional<SubmapLink> AlignmentEngine::try_link(const Submap& a, const Submap& b, LinkKind kind,
                                                    std::vector<Correspondence3D3D> corrs) {
    RansacConfig cfg;
    cfg.max_iterations = opts_.ransac_iterations;
    cfg.inlier_threshold = opts_.ransac_threshold_fraction * submap_diameter(b);
    cfg.min_inliers = opts_.min_link_inliers;
    cfg.seed = opts_.seed ^ (static_cast<std::uint64_t>(a.id) << 32 | b.id);
    std::optional<SubmapLink> link;
    if (cfg.inlier_threshold > 0.0) link = verify_link(a.id, b.id, corrs, cfg, kind);
    emit({{"event", "link"},
          {"kind", to_string(kind)},
          {"a", a.id},
          {"b", b.id},
          {"candidates", corrs.size()},
          {"inliers", link ? link->correspondences.size() : 0},
          {"accepted", link.has_value()}});
    return link;
}

std::shared_ptr<const MapSnapshot> AlignmentEngine::add(Submap submap) {
    if (submap.status != SubmapStatus::Completed) {
        emit({{"event", "submap_skipped"}, {"submap", submap.id}, {"reason", submap.failure_reason}});
        return nullptr;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const Submap* previous = submaps_.empty() ? nullptr : &submaps_.back();
    submaps_.push_back(std::move(submap));
    const Submap& s = submaps_.back();

    std::set<std::uint32_t> linked;
    if (previous) {
        auto corrs = find_temporal_correspondences(*previous, s);
        if (auto l = try_link(*previous, s, LinkKind::TemporalOverlap, std::move(corrs))) {
            links_.push_back(std::move(*l));
            linked.insert(previous->id);
        }
    }
    if (db_) {
        const auto ranked = db_->query(landmark_descriptors(s));
        for (const auto& c : select_candidates(ranked, opts_.top_n, opts_.relative_floor)) {
            if (linked.count(c.submap_id)) continue;
            const auto it = std::find_if(submaps_.begin(), submaps_.end(),
                                         [&](const Submap& x) { return x.id == c.submap_id; });
            if (it == submaps_.end()) continue;
            auto corrs = find_loop_correspondences(*it, s, opts_.match_threshold);
            if (auto l = try_link(*it, s, LinkKind::LoopClosure, std::move(corrs))) {
                links_.push_back(std::move(*l));
                linked.insert(c.submap_id);
            }
        }
        db_->add(s);
    }

    std::vector<const Submap*> all;
    for (const auto& x : submaps_) all.push_back(&x);
    PoseGraph graph = build_pose_graph(all, links_, opts_, warm_);
    auto snap = std::make_shared<MapSnapshot>();
    snap->optimization = optimize_graph(graph, opts_);
    for (const auto& n : graph.nodes) {
        const std::uint32_t anchor = graph.nodes[graph.component_anchor[n.component]].submap_id;
        warm_[n.submap_id] = {n.state.group, anchor};
    }
    snap->map = fuse_map(graph, all);
    snap->version = ++version_;
    for (const auto* x : all) snap->submap_ids.push_back(x->id);
    snap->graph_nodes = static_cast<int>(graph.nodes.size());
    snap->graph_landmarks = static_cast<int>(graph.landmarks.size());
    snap->graph_observations = static_cast<int>(graph.observations.size());
    snap->graph_links = static_cast<int>(links_.size());
    for (const auto& l : links_) (l.kind == LinkKind::LoopClosure ? snap->loop_links : snap->temporal_links)++;
    snap->latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json costs = nlohmann::json::array();
    for (const auto& c : snap->optimization.components) costs.push_back(c.cost_trace);
    emit({{"event", "alignment"},
          {"version", snap->version},
          {"submap", s.id},
          {"submaps", snap->submap_ids.size()},
          {"components", graph.num_components()},
          {"nodes", snap->graph_nodes},
          {"landmarks", snap->graph_landmarks},
          {"observations", snap->graph_observations},
          {"links", snap->graph_links},
          {"initial_cost", snap->optimization.initial_cost},
          {"final_cost", snap->optimization.final_cost},
          {"converged", snap->optimization.converged},
          {"cost_traces", costs},
          {"latency_s", snap->latency_seconds}});
    latest_ = snap;
    return snap;
}

AlignmentWorker::AlignmentWorker(AlignmentEngine& engine, std::size_t capacity,
                                 std::function<void(const std::shared_ptr<const MapSnapshot>&)> on_snapshot)
    : engine_(engine), channel_(capacity), on_snapshot_(std::move(on_snapshot)) {
    thread_ = std::thread([this] { loop(); });
}

AlignmentWorker::~AlignmentWorker() { finish(); }

void AlignmentWorker::submit(Submap submap) { channel_.push(std::move(submap)); }

void AlignmentWorker::finish() {
    channel_.close();
    if (thread_.joinable()) thread_.join();
}

std::shared_ptr<const MapSnapshot> AlignmentWorker::latest() const {
    std::lock_guard lock(mutex_);
    return latest_;
}

void AlignmentWorker::loop() {
    while (auto s = channel_.pop()) {
        std::shared_ptr<const MapSnapshot> snap;
        const std::uint32_t id = s->id;
        try {
            snap = engine_.add(std::move(*s));
        } catch (const std::exception& e) {
            // The engine keeps the submap it already accepted; the next pass retries the graph.
            std::fprintf(stderr, "alignment of submap %u failed: %s\n", id, e.what());
            continue;
        }
        if (!snap) continue;
        {
            std::lock_guard lock(mutex_);
            latest_ = snap;
        }
        if (on_snapshot_) on_snapshot_(snap);
    }
}

}  // namespace aeromap
