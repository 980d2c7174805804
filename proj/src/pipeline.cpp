#include "aeromap/pipeline.hpp"

#include "aeromap/io.hpp"

#include <chrono>
#include <filesystem>
#include <random>

namespace aeromap {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SubmapSummary summarize(const Submap& s) {
    SubmapSummary m;
    m.id = s.id;
    m.status = s.status;
    m.failure_reason = s.failure_reason;
    m.first_frame = s.first_frame;
    m.last_frame = s.last_frame;
    m.keyframes = static_cast<int>(s.keyframes.size());
    m.landmarks = static_cast<int>(s.landmarks.size());
    m.frames = static_cast<int>(s.frame_poses.size());
    m.final_rms = s.final_rms;
    m.build_seconds = s.build_seconds;
    m.median_focal = s.keyframes.empty() ? 0.0 : s.median_focal();
    return m;
}

SnapshotSummary summarize(const MapSnapshot& s) {
    SnapshotSummary m;
    m.version = s.version;
    m.submaps = static_cast<int>(s.submap_ids.size());
    m.nodes = s.graph_nodes;
    m.landmarks = s.graph_landmarks;
    m.observations = s.graph_observations;
    m.links = s.graph_links;
    m.components = static_cast<int>(s.optimization.components.size());
    m.initial_cost = s.optimization.initial_cost;
    m.final_cost = s.optimization.final_cost;
    for (const auto& c : s.optimization.components) m.iterations += c.iterations;
    m.converged = s.optimization.converged;
    m.latency_seconds = s.latency_seconds;
    return m;
}

}  // namespace

std::shared_ptr<VocabularyTree> train_vocabulary(const FrameSource& source, const VocabularyConfig& cfg) {
    const std::size_t n = source.size();
    if (n == 0) throw DatasetError("vocabulary training: the dataset has no frames");
    std::mt19937_64 rng(cfg.seed);
    const std::size_t per_frame = (static_cast<std::size_t>(cfg.sample_size) + n - 1) / n;
    std::vector<Descriptor> sample;
    std::vector<std::vector<Descriptor>> documents;
    for (std::size_t i = 0; i < n; ++i) {
        Frame f = source.frame(i);
        if (i % static_cast<std::size_t>(cfg.document_frames) == 0) {
            std::vector<Descriptor> doc;
            for (const auto& o : f.observations) doc.push_back(o.descriptor);
            documents.push_back(std::move(doc));
        }
        std::shuffle(f.observations.begin(), f.observations.end(), rng);
        for (std::size_t j = 0; j < std::min(per_frame, f.observations.size()); ++j) {
            sample.push_back(f.observations[j].descriptor);
        }
    }
    if (sample.size() < static_cast<std::size_t>(cfg.k)) {
        throw DatasetError("vocabulary training: only " + std::to_string(sample.size()) +
                           " descriptors available, at least k = " + std::to_string(cfg.k) + " are needed");
    }
    auto tree = std::make_shared<VocabularyTree>(build_vocabulary(sample, cfg.k, cfg.L, cfg.seed));
    tree->set_idf(documents);
    return tree;
}

RunResult run_pipeline(const FrameSource& source, const PipelineConfig& cfg,
                       std::shared_ptr<const VocabularyTree> tree, EventSink builder_events,
                       EventSink alignment_events) {
    cfg.validate();
    if (source.size() == 0) throw DatasetError("the dataset has no frames");
    const auto t0 = std::chrono::steady_clock::now();
    RunResult run;
    AlignmentEngine engine(cfg.alignment, cfg.loop_closure ? std::move(tree) : nullptr, alignment_events);
    SubmapBuilder builder(source, cfg.builder, cfg.ba, builder_events);

    if (cfg.mode == ExecutionMode::Single) {
        while (auto s = builder.next()) {
            run.submaps.push_back(summarize(*s));
            if (auto snap = engine.add(std::move(*s))) run.snapshots.push_back(summarize(*snap));
        }
        run.build_seconds = seconds_since(t0);
    } else {
        std::vector<SnapshotSummary> snapshots;
        {
            AlignmentWorker worker(engine, static_cast<std::size_t>(cfg.channel_capacity),
                                   [&](const std::shared_ptr<const MapSnapshot>& snap) {
                                       snapshots.push_back(summarize(*snap));
                                   });
            while (auto s = builder.next()) {
                run.submaps.push_back(summarize(*s));
                worker.submit(std::move(*s));
            }
            run.build_seconds = seconds_since(t0);
            worker.finish();
        }
        run.snapshots = std::move(snapshots);
    }
    run.final_snapshot = engine.latest();
    run.aligned.assign(engine.submaps().begin(), engine.submaps().end());
    run.links = engine.links();
    run.total_seconds = seconds_since(t0);
    if (!run.final_snapshot) throw ReconstructionError("no submap was completed");
    return run;
}

MapEvaluation evaluate_run(const RunResult& run, const GroundTruth& truth) {
    const GlobalMap& m = run.final_snapshot->map;
    std::vector<EstimatedPose> poses;
    for (const auto& e : m.trajectory) poses.push_back({e.frame_id, e.pose});
    return evaluate_map(m.landmarks, m.landmark_truth, poses, truth);
}

nlohmann::json to_json(const MapEvaluation& e) {
    return {{"landmark_rmse", e.rmse},
            {"matched_landmarks", e.matched},
            {"distinct_truth_landmarks", e.distinct_truth},
            {"matched_fraction", e.matched_fraction},
            {"gauge_scale", e.gauge.scale},
            {"poses", e.poses},
            {"position_rmse", e.position_rmse},
            {"position_max", e.position_max},
            {"rotation_median_deg", e.rotation_median_deg},
            {"rotation_max_deg", e.rotation_max_deg}};
}

nlohmann::json write_run_outputs(const std::string& dir, const RunResult& run, const PipelineConfig& cfg,
                                 const FrameSource& source, const std::optional<GroundTruth>& truth) {
    std::filesystem::create_directories(dir);
    const auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
    const GlobalMap& m = run.final_snapshot->map;
    write_ply(path("map.ply"), m);
    write_trajectory(path("trajectory.txt"), m.trajectory);
    std::vector<const Submap*> aligned;
    for (const auto& s : run.aligned) aligned.push_back(&s);
    write_submap_archive(path("submaps.bin"), aligned, m.submap_poses);

    nlohmann::json report;
    report["config"] = to_json(cfg);
    const CameraIntrinsics K = source.intrinsics();
    report["dataset"] = {{"frames", source.size()},
                         {"focal", K.focal},
                         {"principal_point", {K.principal_point.x(), K.principal_point.y()}},
                         {"image", {K.width, K.height}}};
    nlohmann::json submaps = nlohmann::json::array();
    int completed = 0;
    for (const auto& s : run.submaps) {
        completed += s.status == SubmapStatus::Completed;
        submaps.push_back({{"id", s.id},
                           {"status", to_string(s.status)},
                           {"failure_reason", s.failure_reason},
                           {"first_frame", s.first_frame},
                           {"last_frame", s.last_frame},
                           {"keyframes", s.keyframes},
                           {"landmarks", s.landmarks},
                           {"frames", s.frames},
                           {"final_rms_px", s.final_rms},
                           {"build_seconds", s.build_seconds},
                           {"median_focal", s.median_focal}});
    }
    report["submaps"] = submaps;
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& s : run.snapshots) {
        snaps.push_back({{"version", s.version},
                         {"submaps", s.submaps},
                         {"nodes", s.nodes},
                         {"landmarks", s.landmarks},
                         {"observations", s.observations},
                         {"links", s.links},
                         {"scale_priors", s.nodes},
                         {"components", s.components},
                         {"initial_cost", s.initial_cost},
                         {"final_cost", s.final_cost},
                         {"iterations", s.iterations},
                         {"converged", s.converged},
                         {"latency_seconds", s.latency_seconds}});
    }
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : run.links) {
        links.push_back({{"a", l.a}, {"b", l.b}, {"kind", to_string(l.kind)}, {"inliers", l.correspondences.size()}});
    }
    const auto& fin = *run.final_snapshot;
    nlohmann::json cost_traces = nlohmann::json::array();
    for (const auto& c : fin.optimization.components) {
        cost_traces.push_back({{"component", c.component},
                               {"anchor_submap", c.anchor_submap},
                               {"free_nodes", c.free_nodes},
                               {"landmarks", c.landmarks},
                               {"observations", c.observations},
                               {"iterations", c.iterations},
                               {"converged", c.converged},
                               {"cost_trace", c.cost_trace}});
    }
    report["alignment"] = {{"snapshots", snaps},
                           {"links", links},
                           {"temporal_links", fin.temporal_links},
                           {"loop_links", fin.loop_links},
                           {"final_components", cost_traces}};
    int relocalized = 0;
    for (const auto& e : m.trajectory) relocalized += e.relocalized;
    report["counts"] = {{"submaps_built", run.submaps.size()},
                        {"submaps_completed", completed},
                        {"submaps_failed", static_cast<int>(run.submaps.size()) - completed},
                        {"submaps_aligned", run.aligned.size()},
                        {"map_landmarks", m.landmarks.size()},
                        {"trajectory_frames", m.trajectory.size()},
                        {"relocalized_frames", relocalized},
                        {"graph_nodes", fin.graph_nodes},
                        {"graph_landmarks", fin.graph_landmarks},
                        {"graph_observations", fin.graph_observations},
                        {"graph_links", fin.graph_links}};
    report["timing"] = {{"build_seconds", run.build_seconds}, {"total_seconds", run.total_seconds}};
    if (truth) {
        try {
            report["evaluation"] = to_json(evaluate_run(run, *truth));
        } catch (const PreconditionError& e) {
            report["evaluation"] = {{"error", e.what()}};
        }
    }
    write_json(path("report.json"), report);
    return report;
}

}  // namespace aeromap
