#pragma once

#include "aeromap/alignment_engine.hpp"
#include "aeromap/config.hpp"
#include "aeromap/evaluation.hpp"

#include "json.hpp"

#include <memory>
#include <optional>

namespace aeromap {

/// No submap could be completed.
class ReconstructionError : public Error {
public:
    using Error::Error;
};

struct SubmapSummary {
    std::uint32_t id = 0;
    SubmapStatus status = SubmapStatus::Building;
    std::string failure_reason;
    std::uint32_t first_frame = 0;
    std::uint32_t last_frame = 0;
    int keyframes = 0;
    int landmarks = 0;
    int frames = 0;
    double final_rms = 0.0;
    double build_seconds = 0.0;
    double median_focal = 0.0;
};

struct SnapshotSummary {
    std::uint64_t version = 0;
    int submaps = 0;
    int nodes = 0;
    int landmarks = 0;
    int observations = 0;
    int links = 0;
    int components = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    int iterations = 0;
    bool converged = true;
    double latency_seconds = 0.0;
};

struct RunResult {
    std::vector<SubmapSummary> submaps;      ///< every builder output, failed ones included
    std::vector<SnapshotSummary> snapshots;  ///< in publication order
    std::shared_ptr<const MapSnapshot> final_snapshot;
    std::vector<Submap> aligned;             ///< completed submaps, in alignment order
    std::vector<SubmapLink> links;
    double build_seconds = 0.0;              ///< builder worker wall time
    double total_seconds = 0.0;
};

/// Samples descriptors across the source with the config seed, trains the tree
/// and sets IDF weights from one document per `document_frames` frames.
std::shared_ptr<VocabularyTree> train_vocabulary(const FrameSource& source, const VocabularyConfig& cfg);

/// Builder and alignment joined by a bounded channel (two-worker) or
/// interleaved build -> align (single). tree may be null when loop closure is
/// off. Throws ReconstructionError when no submap completes.
RunResult run_pipeline(const FrameSource& source, const PipelineConfig& cfg,
                       std::shared_ptr<const VocabularyTree> tree, EventSink builder_events = {},
                       EventSink alignment_events = {});

/// Writes map.ply, trajectory.txt, submaps.bin and report.json into dir.
/// Returns the report.
nlohmann::json write_run_outputs(const std::string& dir, const RunResult& run, const PipelineConfig& cfg,
                                 const FrameSource& source, const std::optional<GroundTruth>& truth);

/// Evaluation of the final map of a run against ground truth.
MapEvaluation evaluate_run(const RunResult& run, const GroundTruth& truth);

nlohmann::json to_json(const MapEvaluation& e);

}  // namespace aeromap
