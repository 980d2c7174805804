#include "aeromap/alignment.hpp"

#include "aeromap/bundle_adjust.hpp"
#include "aeromap/features.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_map>

namespace aeromap {

std::string to_string(LinkKind k) {
    return k == LinkKind::TemporalOverlap ? "temporal" : "loop";
}

void AlignmentOptions::validate() const {
    const auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("alignment." + field + ": " + why);
    };
    if (!(huber_delta > 0.0)) fail("huber_delta", "must be positive");
    if (!(lambda_a > 0.0 && lambda_a < 1.0)) fail("lambda_a", "must be in (0, 1)");
    if (max_iterations < 1) fail("max_iterations", "must be at least 1");
    if (!(function_tolerance > 0.0)) fail("function_tolerance", "must be positive");
    if (min_link_inliers < 3) fail("min_link_inliers", "must be at least 3");
    if (ransac_iterations < 1) fail("ransac_iterations", "must be at least 1");
    if (!(ransac_threshold_fraction > 0.0)) fail("ransac_threshold_fraction", "must be positive");
    if (!(match_threshold >= 0.0)) fail("match_threshold", "must be non-negative");
    if (top_n < 1) fail("top_n", "must be at least 1");
    if (!(relative_floor >= 0.0 && relative_floor <= 1.0)) fail("relative_floor", "must be in [0, 1]");
}

std::vector<Correspondence3D3D> find_temporal_correspondences(const Submap& prev, const Submap& next) {
    std::vector<Correspondence3D3D> out;
    for (const auto& [id, lm] : prev.landmarks) {
        const auto it = next.landmarks.find(id);
        if (it != next.landmarks.end()) out.push_back({lm.position, it->second.position, id, id});
    }
    return out;
}

std::vector<Correspondence3D3D> find_loop_correspondences(const Submap& a, const Submap& b,
                                                          double match_threshold) {
    std::vector<Descriptor> da, db;
    std::vector<const Landmark*> la, lb;
    for (const auto& [id, lm] : a.landmarks) {
        da.push_back(lm.descriptor);
        la.push_back(&lm);
    }
    for (const auto& [id, lm] : b.landmarks) {
        db.push_back(lm.descriptor);
        lb.push_back(&lm);
    }
    if (da.empty() || db.empty()) return {};
    const double thr = match_threshold > 0.0 ? match_threshold : 0.7 * median_nn_distance(da);
    std::vector<Correspondence3D3D> out;
    for (const auto& m : match_mutual_nn(da, db, static_cast<float>(thr))) {
        out.push_back({la[m.a]->position, lb[m.b]->position, la[m.a]->id, lb[m.b]->id});
    }
    return out;
}

double submap_diameter(const Submap& s) {
    if (s.landmarks.empty()) return 0.0;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& [id, lm] : s.landmarks) {
        lo = lo.cwiseMin(lm.position);
        hi = hi.cwiseMax(lm.position);
    }
    return (hi - lo).norm();
}

std::optional<SubmapLink> verify_link(std::uint32_t a, std::uint32_t b,
                                      std::span<const Correspondence3D3D> corrs, const RansacConfig& cfg,
                                      LinkKind kind) {
    if (static_cast<int>(corrs.size()) < std::max(3, cfg.min_inliers)) return std::nullopt;
    std::optional<Sim3RansacResult> r;
    try {
        r = sim3_ransac(corrs, cfg);
    } catch (const DegenerateError&) {
        return std::nullopt;
    }
    if (!r) return std::nullopt;
    SubmapLink link;
    link.a = a;
    link.b = b;
    link.kind = kind;
    link.relative = r->transform;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        if (r->inliers[i]) link.correspondences.push_back(corrs[i]);
    }
    return link;
}

namespace {

struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    // The smaller root wins so representatives are order-independent.
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

std::uint64_t landmark_key(std::uint32_t submap, std::uint32_t landmark) {
    return (static_cast<std::uint64_t>(submap) << 32) | landmark;
}

double prior_mu(const GraphNode& n) { return n.state.algebra.mu; }

// State update that tolerates the log singularity at a rotation of pi: only mu
// of the algebra enters the cost, and it is exact from the scale.
Sim3State update_state(const Sim3State& s, const Sim3Tangent& up) {
    try {
        return sim3_manifold_update(s, up);
    } catch (const DegenerateError&) {
        Sim3State out;
        out.group = sim3_exp(up) * s.group;
        out.algebra = s.algebra;
        out.algebra.mu = std::log(out.group.scale);
        return out;
    }
}

Sim3State state_from_group(const Sim3Transform& G) {
    try {
        return Sim3State::from_group(G);
    } catch (const DegenerateError&) {
        Sim3State s;
        s.group = G;
        s.algebra.mu = std::log(G.scale);
        return s;
    }
}

}  // namespace

PoseGraph build_pose_graph(std::span<const Submap* const> submaps, std::span<const SubmapLink> links,
                           const AlignmentOptions& opts, const std::map<std::uint32_t, WarmStart>& warm) {
    PoseGraph g;
    for (const Submap* s : submaps) {
        if (g.node_of.count(s->id)) throw PreconditionError("build_pose_graph: duplicate submap id");
        g.node_of[s->id] = static_cast<int>(g.nodes.size());
        GraphNode n;
        n.submap_id = s->id;
        g.nodes.push_back(n);
    }
    const int N = static_cast<int>(g.nodes.size());

    // Components over submaps.
    DisjointSets comp(N);
    std::vector<std::vector<std::pair<int, const SubmapLink*>>> adj(N);
    for (const auto& l : links) {
        const auto ia = g.node_of.find(l.a), ib = g.node_of.find(l.b);
        if (ia == g.node_of.end() || ib == g.node_of.end()) continue;
        comp.unite(ia->second, ib->second);
        adj[ia->second].emplace_back(ib->second, &l);
        adj[ib->second].emplace_back(ia->second, &l);
    }
    std::map<int, int> comp_index;
    for (int i = 0; i < N; ++i) {
        const int root = comp.find(i);
        if (!comp_index.count(root)) {
            comp_index[root] = static_cast<int>(g.component_anchor.size());
            g.component_anchor.push_back(root);  // the root is the lowest index: the anchor
        }
        g.nodes[i].component = comp_index[root];
    }

    // Initialization: anchor at identity, warm starts in the same gauge, else chain
    // breadth-first along links. A node G maps local to global, and b = T(a) gives
    // G_b = G_a * T^-1.
    std::vector<bool> done(N, false);
    for (int c = 0; c < g.num_components(); ++c) {
        const int anchor = g.component_anchor[c];
        const std::uint32_t anchor_id = g.nodes[anchor].submap_id;
        g.nodes[anchor].fixed = opts.anchor_gauge;
        std::vector<Sim3Transform> pose(N);
        std::queue<int> q;
        q.push(anchor);
        done[anchor] = true;
        const auto wa = warm.find(anchor_id);
        pose[anchor] = wa != warm.end() && wa->second.anchor == anchor_id ? wa->second.pose : Sim3Transform::identity();
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (const auto& [v, l] : adj[u]) {
                if (done[v]) continue;
                done[v] = true;
                const auto w = warm.find(g.nodes[v].submap_id);
                if (w != warm.end() && w->second.anchor == anchor_id) {
                    pose[v] = w->second.pose;
                } else if (l->a == g.nodes[u].submap_id) {
                    pose[v] = pose[u] * l->relative.inverse();
                } else {
                    pose[v] = pose[u] * l->relative;
                }
                q.push(v);
            }
        }
        for (int i = 0; i < N; ++i) {
            if (g.nodes[i].component == c) g.nodes[i].state = state_from_group(pose[i]);
        }
    }

    // Landmark union-find over (submap, landmark) keys.
    std::unordered_map<std::uint64_t, int> element;
    std::vector<std::pair<int, const Landmark*>> members;  // (node, landmark)
    for (int i = 0; i < N; ++i) {
        for (const auto& [id, lm] : submaps[i]->landmarks) {
            element[landmark_key(submaps[i]->id, id)] = static_cast<int>(members.size());
            members.emplace_back(i, &lm);
        }
    }
    DisjointSets merge(members.size());
    for (const auto& l : links) {
        for (const auto& c : l.correspondences) {
            const auto ea = element.find(landmark_key(l.a, c.landmark_a));
            const auto eb = element.find(landmark_key(l.b, c.landmark_b));
            if (ea != element.end() && eb != element.end()) merge.unite(ea->second, eb->second);
        }
    }
    std::vector<int> node_of_root(members.size(), -1);
    std::vector<std::map<std::uint32_t, int>> votes;
    for (std::size_t e = 0; e < members.size(); ++e) {
        const int root = merge.find(static_cast<int>(e));
        if (node_of_root[root] < 0) {
            node_of_root[root] = static_cast<int>(g.landmarks.size());
            GraphLandmark gl;
            gl.submap_id = g.nodes[members[e].first].submap_id;
            gl.component = g.nodes[members[e].first].component;
            g.landmarks.push_back(gl);
            votes.emplace_back();
        }
        const int lid = node_of_root[root];
        const auto& [node, lm] = members[e];
        g.observations.push_back({node, lid, lm->position, lm->id});
        ++votes[lid][lm->truth_id];
    }
    std::vector<int> count(g.landmarks.size(), 0);
    for (const auto& o : g.observations) {
        g.landmarks[o.landmark].position += g.nodes[o.node].state.group.apply(o.local);
        ++count[o.landmark];
    }
    for (std::size_t j = 0; j < g.landmarks.size(); ++j) {
        g.landmarks[j].position /= count[j];
        int best = -1;
        for (const auto& [truth, n] : votes[j]) {
            if (n > best) {
                best = n;
                g.landmarks[j].truth_id = truth;
            }
        }
    }
    return g;
}

double evaluate_cost(const PoseGraph& graph, const AlignmentOptions& opts) {
    double cost = 0.0;
    for (const auto& o : graph.observations) {
        const Vec3 r = graph.nodes[o.node].state.group.apply(o.local) - graph.landmarks[o.landmark].position;
        cost += huber_cost(r.norm(), opts.huber_delta);
    }
    if (opts.lambda_a > 0.0) {
        for (const auto& n : graph.nodes) {
            const double p = opts.lambda_a * prior_mu(n);
            cost += p * p;
        }
    }
    return cost;
}

namespace {

using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat73 = Eigen::Matrix<double, 7, 3>;

struct Component {
    std::vector<int> nodes;         // graph node indices
    std::vector<int> var;           // per graph node: free block index or -1
    std::vector<int> landmarks;     // graph landmark indices
    std::vector<std::vector<int>> obs_of;  // per local landmark: observation indices
    int free = 0;
};

double component_cost(const PoseGraph& g, const Component& c, const AlignmentOptions& opts,
                      const std::vector<Sim3State>& states, const std::vector<Vec3>& X) {
    double cost = 0.0;
    for (std::size_t j = 0; j < c.landmarks.size(); ++j) {
        for (int oi : c.obs_of[j]) {
            const auto& o = g.observations[oi];
            cost += huber_cost((states[o.node].group.apply(o.local) - X[j]).norm(), opts.huber_delta);
        }
    }
    if (opts.lambda_a > 0.0) {
        for (int n : c.nodes) {
            const double p = opts.lambda_a * states[n].algebra.mu;
            cost += p * p;
        }
    }
    return cost;
}

ComponentSummary optimize_component(PoseGraph& g, const Component& c, const AlignmentOptions& opts, int id) {
    ComponentSummary sum;
    sum.component = id;
    sum.anchor_submap = g.nodes[g.component_anchor[id]].submap_id;
    sum.free_nodes = c.free;
    sum.landmarks = static_cast<int>(c.landmarks.size());
    for (const auto& o : c.obs_of) sum.observations += static_cast<int>(o.size());

    std::vector<Sim3State> states(g.nodes.size());
    for (int n : c.nodes) states[n] = g.nodes[n].state;
    std::vector<Vec3> X(c.landmarks.size());
    for (std::size_t j = 0; j < c.landmarks.size(); ++j) X[j] = g.landmarks[c.landmarks[j]].position;

    double cost = component_cost(g, c, opts, states, X);
    sum.cost_trace.push_back(cost);
    if (cost <= 1e-30) {
        sum.converged = true;
        return sum;
    }

    const int P = 7 * c.free;
    double lambda = 1e-4;
    for (int it = 0; it < opts.max_iterations; ++it) {
        sum.iterations = it + 1;
        // Normal equations.
        Eigen::VectorXd gp = Eigen::VectorXd::Zero(P);
        std::vector<Mat7> Hpp(c.free, Mat7::Zero());
        std::vector<double> hl(c.landmarks.size(), 0.0);
        std::vector<Vec3> gl(c.landmarks.size(), Vec3::Zero());
        // Per landmark, B blocks keyed by free node.
        std::vector<std::vector<std::pair<int, Mat73>>> B(c.landmarks.size());
        for (std::size_t j = 0; j < c.landmarks.size(); ++j) {
            for (int oi : c.obs_of[j]) {
                const auto& o = g.observations[oi];
                const AlignmentResidual r = alignment_residual_and_jacobians(states[o.node].group, o.local, X[j]);
                const double e = r.residual.norm();
                const double w = e <= opts.huber_delta ? 1.0 : opts.huber_delta / e;
                hl[j] += w;
                gl[j] -= w * r.residual;  // gradient; J_landmark = -I
                const int v = c.var[o.node];
                if (v < 0) continue;
                Hpp[v] += w * r.J_pose.transpose() * r.J_pose;
                gp.segment<7>(7 * v) += w * r.J_pose.transpose() * r.residual;
                const Mat73 b = -w * r.J_pose.transpose();
                auto found = std::find_if(B[j].begin(), B[j].end(), [&](const auto& p) { return p.first == v; });
                if (found == B[j].end()) {
                    B[j].emplace_back(v, b);
                } else {
                    found->second += b;
                }
            }
        }
        if (opts.lambda_a > 0.0) {
            const double l2 = opts.lambda_a * opts.lambda_a;
            for (int n : c.nodes) {
                const int v = c.var[n];
                if (v < 0) continue;
                Hpp[v](6, 6) += l2;
                gp(7 * v + 6) += l2 * states[n].algebra.mu;
            }
        }

        // Damped Schur complement onto the pose blocks.
        std::map<std::pair<int, int>, Mat7> S;
        for (int v = 0; v < c.free; ++v) {
            Mat7 H = Hpp[v];
            for (int d = 0; d < 7; ++d) H(d, d) += lambda * std::max(Hpp[v](d, d), 1e-9);
            S[{v, v}] = H;
        }
        Eigen::VectorXd rhs = -gp;
        std::vector<double> hd(c.landmarks.size());
        for (std::size_t j = 0; j < c.landmarks.size(); ++j) {
            hd[j] = hl[j] + lambda * std::max(hl[j], 1e-9);
            for (const auto& [v, b] : B[j]) {
                rhs.segment<7>(7 * v) += b * gl[j] / hd[j];
                for (const auto& [u, bu] : B[j]) {
                    if (u < v) continue;
                    const Mat7 blk = b * bu.transpose() / hd[j];
                    auto ins = S.try_emplace({v, u}, Mat7::Zero());
                    ins.first->second -= blk;
                }
            }
        }
        Eigen::VectorXd dp = Eigen::VectorXd::Zero(P);
        if (P > 0) {
            std::vector<Eigen::Triplet<double>> trip;
            trip.reserve(S.size() * 49 * 2);
            for (const auto& [key, blk] : S) {
                const auto [v, u] = key;
                for (int r = 0; r < 7; ++r) {
                    for (int q = 0; q < 7; ++q) {
                        trip.emplace_back(7 * v + r, 7 * u + q, blk(r, q));
                        if (u != v) trip.emplace_back(7 * u + q, 7 * v + r, blk(r, q));
                    }
                }
            }
            Eigen::SparseMatrix<double> A(P, P);
            A.setFromTriplets(trip.begin(), trip.end());
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
            if (ldlt.info() != Eigen::Success) {
                throw Error("optimize_graph: reduced system factorization failed in component " + std::to_string(id));
            }
            dp = ldlt.solve(rhs);
            if (ldlt.info() != Eigen::Success || !dp.allFinite()) {
                throw Error("optimize_graph: reduced system solve failed in component " + std::to_string(id));
            }
        }

        std::vector<Sim3State> trial = states;
        for (int n : c.nodes) {
            const int v = c.var[n];
            if (v >= 0) trial[n] = update_state(states[n], Sim3Tangent::from_vector(dp.segment<7>(7 * v)));
        }
        std::vector<Vec3> trial_X = X;
        for (std::size_t j = 0; j < c.landmarks.size(); ++j) {
            Vec3 r = -gl[j];
            for (const auto& [v, b] : B[j]) r -= b.transpose() * dp.segment<7>(7 * v);
            trial_X[j] += r / hd[j];
        }
        const double trial_cost = component_cost(g, c, opts, trial, trial_X);
        if (std::isfinite(trial_cost) && trial_cost < cost) {
            const double decrease = cost - trial_cost;
            states = std::move(trial);
            X = std::move(trial_X);
            cost = trial_cost;
            sum.cost_trace.push_back(cost);
            lambda = std::max(lambda / 3.0, 1e-12);
            if (decrease <= opts.function_tolerance * cost || cost <= 1e-30) {
                sum.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) {
                sum.converged = true;  // no further descent available at this precision
                break;
            }
        }
    }
    for (int n : c.nodes) g.nodes[n].state = states[n];
    for (std::size_t j = 0; j < c.landmarks.size(); ++j) g.landmarks[c.landmarks[j]].position = X[j];
    return sum;
}

}  // namespace

OptimizationSummary optimize_graph(PoseGraph& graph, const AlignmentOptions& opts) {
    OptimizationSummary out;
    out.initial_cost = evaluate_cost(graph, opts);
    const int C = graph.num_components();
    std::vector<Component> comps(C);
    for (auto& c : comps) c.var.assign(graph.nodes.size(), -1);
    for (int n = 0; n < static_cast<int>(graph.nodes.size()); ++n) {
        Component& c = comps[graph.nodes[n].component];
        c.nodes.push_back(n);
        if (!graph.nodes[n].fixed) c.var[n] = c.free++;
    }
    std::vector<int> local(graph.landmarks.size(), -1);
    for (int j = 0; j < static_cast<int>(graph.landmarks.size()); ++j) {
        Component& c = comps[graph.landmarks[j].component];
        local[j] = static_cast<int>(c.landmarks.size());
        c.landmarks.push_back(j);
        c.obs_of.emplace_back();
    }
    for (int oi = 0; oi < static_cast<int>(graph.observations.size()); ++oi) {
        const int j = graph.observations[oi].landmark;
        comps[graph.landmarks[j].component].obs_of[local[j]].push_back(oi);
    }
    for (int c = 0; c < C; ++c) {
        out.components.push_back(optimize_component(graph, comps[c], opts, c));
        out.converged = out.converged && out.components.back().converged;
    }
    out.final_cost = evaluate_cost(graph, opts);
    return out;
}

SE3Pose promote_pose(const SE3Pose& local, const Sim3Transform& G) {
    SE3Pose out;
    out.rotation = local.rotation * G.rotation.transpose();
    out.translation = -out.rotation * G.apply(local.center());
    return out;
}

GlobalMap fuse_map(const PoseGraph& graph, std::span<const Submap* const> submaps) {
    GlobalMap m;
    m.landmarks.assign(graph.landmarks.size(), Vec3::Zero());
    std::vector<int> count(graph.landmarks.size(), 0);
    for (const auto& o : graph.observations) {
        m.landmarks[o.landmark] += graph.nodes[o.node].state.group.apply(o.local);
        ++count[o.landmark];
    }
    for (std::size_t j = 0; j < graph.landmarks.size(); ++j) {
        m.landmarks[j] /= count[j];
        m.landmark_submap.push_back(graph.landmarks[j].submap_id);
        m.landmark_truth.push_back(graph.landmarks[j].truth_id);
    }
    std::map<std::uint32_t, TrajectoryEntry> frames;
    for (const Submap* s : submaps) {
        const auto it = graph.node_of.find(s->id);
        if (it == graph.node_of.end()) continue;
        const Sim3Transform& G = graph.nodes[it->second].state.group;
        m.submap_poses[s->id] = G;
        std::set<std::uint32_t> keyframes;
        for (const auto& k : s->keyframes) keyframes.insert(k.frame_id);
        for (const auto& fp : s->frame_poses) {
            if (frames.count(fp.frame_id)) continue;
            frames[fp.frame_id] = {fp.frame_id, promote_pose(fp.pose, G), G.scale, s->id, fp.relocalized,
                                   keyframes.count(fp.frame_id) > 0};
        }
    }
    for (auto& [f, e] : frames) m.trajectory.push_back(e);
    return m;
}

}  // namespace aeromap
