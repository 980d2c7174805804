#pragma once

#include "aeromap/lie.hpp"
#include "aeromap/ransac.hpp"
#include "aeromap/similarity.hpp"
#include "aeromap/submap.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace aeromap {

enum class LinkKind { TemporalOverlap, LoopClosure };
std::string to_string(LinkKind k);

/// Verified relation between two submaps: relative maps a's local points onto b's.
struct SubmapLink {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::vector<Correspondence3D3D> correspondences;  ///< inliers only
    Sim3Transform relative;
    LinkKind kind = LinkKind::TemporalOverlap;
};

struct AlignmentOptions {
    double huber_delta = 0.5;         ///< global-frame units
    double lambda_a = 0.01;           ///< scale prior weight
    int max_iterations = 50;
    double function_tolerance = 1e-10;
    int min_link_inliers = 12;
    bool anchor_gauge = true;         ///< fix the first submap of every component

    int ransac_iterations = 1000;
    double ransac_threshold_fraction = 0.01;  ///< 3D inlier threshold = fraction x submap diameter
    double match_threshold = 0.0;     ///< descriptor distance; 0 = 0.7 x median NN distance of a
    int top_n = 5;
    double relative_floor = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Shared landmark ids of consecutive submaps (the overlap carryover).
std::vector<Correspondence3D3D> find_temporal_correspondences(const Submap& prev, const Submap& next);

/// Mutual nearest neighbours between the landmark descriptors of a and b.
std::vector<Correspondence3D3D> find_loop_correspondences(const Submap& a, const Submap& b,
                                                          double match_threshold);

/// Bounding-box diagonal of the landmark positions (0 when empty).
double submap_diameter(const Submap& s);

/// Sim(3) RANSAC on candidate correspondences; nullopt when the link is rejected.
std::optional<SubmapLink> verify_link(std::uint32_t a, std::uint32_t b,
                                      std::span<const Correspondence3D3D> corrs, const RansacConfig& cfg,
                                      LinkKind kind);

struct GraphNode {
    std::uint32_t submap_id = 0;
    Sim3State state;          ///< maps local coordinates into the global frame
    bool fixed = false;
    int component = 0;
};

struct GraphObservation {
    int node = 0;
    int landmark = 0;
    Vec3 local = Vec3::Zero();
    std::uint32_t local_id = 0;
};

struct GraphLandmark {
    Vec3 position = Vec3::Zero();
    std::uint32_t truth_id = kNoTruthId;  ///< majority over merged members
    std::uint32_t submap_id = 0;          ///< first observing submap
    int component = 0;
};

struct PoseGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphLandmark> landmarks;
    std::vector<GraphObservation> observations;
    std::vector<int> component_anchor;  ///< node index anchoring each component
    std::map<std::uint32_t, int> node_of;

    std::size_t num_scale_priors() const { return nodes.size(); }
    int num_components() const { return static_cast<int>(component_anchor.size()); }
};

/// Previous estimate of a submap pose and the submap that anchored its component.
struct WarmStart {
    Sim3Transform pose;
    std::uint32_t anchor = 0;
};

/// Nodes initialized by chaining link transforms from each component's anchor
/// (or from a warm start in the same gauge); landmarks merged by union-find
/// over link correspondences and placed at the mean of their transformed copies.
PoseGraph build_pose_graph(std::span<const Submap* const> submaps, std::span<const SubmapLink> links,
                           const AlignmentOptions& opts,
                           const std::map<std::uint32_t, WarmStart>& warm = {});

/// sum huber(|s R x + t - X|) + sum (lambda_a mu_i)^2; the prior term is left
/// out when lambda_a == 0.
double evaluate_cost(const PoseGraph& graph, const AlignmentOptions& opts);

struct ComponentSummary {
    int component = 0;
    std::uint32_t anchor_submap = 0;
    int free_nodes = 0;
    int landmarks = 0;
    int observations = 0;
    std::vector<double> cost_trace;  ///< initial cost, then every accepted step
    int iterations = 0;
    bool converged = false;
};

struct OptimizationSummary {
    std::vector<ComponentSummary> components;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    bool converged = true;
};

/// Levenberg-Marquardt over every component: landmark blocks eliminated in
/// closed form, the reduced pose system solved with a sparse LDLT, node updates
/// applied with sim3_manifold_update.
OptimizationSummary optimize_graph(PoseGraph& graph, const AlignmentOptions& opts);

struct TrajectoryEntry {
    std::uint32_t frame_id = 0;
    SE3Pose pose;  ///< camera-from-global
    double scale = 1.0;
    std::uint32_t submap_id = 0;
    bool relocalized = false;
    bool keyframe = false;
};

struct GlobalMap {
    AlignedVector<Vec3> landmarks;
    std::vector<std::uint32_t> landmark_submap;
    std::vector<std::uint32_t> landmark_truth;
    std::vector<TrajectoryEntry> trajectory;  ///< sorted by frame, first submap wins in overlaps
    std::map<std::uint32_t, Sim3Transform> submap_poses;
};

/// Camera-from-local pose promoted through the local-to-global similarity G.
SE3Pose promote_pose(const SE3Pose& local, const Sim3Transform& G);

/// Landmarks at the mean of sim3_apply(G_i, x_ij) over their observations;
/// frames promoted through their submap's pose.
GlobalMap fuse_map(const PoseGraph& graph, std::span<const Submap* const> submaps);

}  // namespace aeromap
