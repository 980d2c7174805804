#include "aeromap/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace aeromap {

std::string to_string(ExecutionMode m) { return m == ExecutionMode::TwoWorker ? "two-worker" : "single"; }

ExecutionMode execution_mode_from_string(const std::string& s) {
    if (s == "two-worker") return ExecutionMode::TwoWorker;
    if (s == "single") return ExecutionMode::Single;
    throw ConfigError("mode: expected 'two-worker' or 'single', got '" + s + "'");
}

void PipelineConfig::apply_seed(std::uint64_t s) {
    seed = s;
    builder.seed = s;
    alignment.seed = s;
    vocabulary.seed = s;
}

void PipelineConfig::validate() const {
    builder.validate();
    if (!ba.is_valid()) throw ConfigError("ba: max_iterations, function_tolerance and huber_delta must be positive");
    alignment.validate();
    if (vocabulary.k < 2) throw ConfigError("vocabulary.k: must be at least 2");
    if (vocabulary.L < 1) throw ConfigError("vocabulary.L: must be at least 1");
    if (vocabulary.sample_size < vocabulary.k) throw ConfigError("vocabulary.sample_size: must be at least k");
    if (vocabulary.document_frames < 1) throw ConfigError("vocabulary.document_frames: must be at least 1");
    if (channel_capacity < 1) throw ConfigError("channel_capacity: must be at least 1");
    if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

namespace {

// A YAML mapping whose keys are consumed one by one; leftovers are errors.
class Section {
public:
    Section(YAML::Node node, std::string prefix, std::string origin)
        : node_(std::move(node)), prefix_(std::move(prefix)), origin_(std::move(origin)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, "expected a mapping");
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        used_.insert(key);
        if (!node_ || node_.IsNull()) return;
        const YAML::Node v = node_[key];
        if (!v) return;
        try {
            out = v.as<T>();
        } catch (const YAML::Exception&) {
            fail(v, prefix_ + key + ": wrong type");
        }
    }

    Section child(const std::string& key) {
        used_.insert(key);
        YAML::Node v = node_ && node_.IsMap() ? node_[key] : YAML::Node();
        return Section(v, prefix_ + key + ".", origin_);
    }

    void ignore(const std::string& key) { used_.insert(key); }

    void finish() const {
        if (!node_ || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!used_.count(key)) fail(kv.first, prefix_ + key + ": unknown key");
        }
    }

    [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const {
        const auto m = at.Mark();
        throw ConfigError(origin_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": " +
                          what);
    }

private:
    YAML::Node node_;
    std::string prefix_;
    std::string origin_;
    std::set<std::string> used_;
};

void read_ransac(Section s, RansacConfig& r) {
    s.get("max_iterations", r.max_iterations);
    s.get("inlier_threshold", r.inlier_threshold);
    s.get("min_inliers", r.min_inliers);
    s.get("confidence", r.confidence);
    s.finish();
}

nlohmann::json ransac_json(const RansacConfig& r) {
    return {{"max_iterations", r.max_iterations},
            {"inlier_threshold", r.inlier_threshold},
            {"min_inliers", r.min_inliers},
            {"confidence", r.confidence}};
}

YAML::Node parse(const std::string& text, const std::string& origin) {
    try {
        return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& yaml_text, const std::string& origin) {
    const YAML::Node root = parse(yaml_text, origin);
    PipelineConfig c;
    Section top(root, "", origin);
    std::uint64_t seed = 0;
    top.get("seed", seed);
    c.apply_seed(seed);
    std::string mode = to_string(c.mode);
    top.get("mode", mode);
    c.mode = execution_mode_from_string(mode);
    top.get("output_dir", c.output_dir);
    top.get("channel_capacity", c.channel_capacity);
    top.get("loop_closure", c.loop_closure);
    top.ignore("scenario");

    Section b = top.child("builder");
    b.get("tau_resection", c.builder.tau_resection);
    b.get("tau_resection_fraction", c.builder.tau_resection_fraction);
    b.get("tau_resection_floor", c.builder.tau_resection_floor);
    b.get("tau_stereo", c.builder.tau_stereo);
    b.get("alpha_stereo", c.builder.alpha_stereo);
    b.get("keyframes_per_submap", c.builder.keyframes_per_submap);
    b.get("overlap_fraction", c.builder.overlap_fraction);
    b.get("view_angle_limit", c.builder.view_angle_limit);
    b.get("reprojection_threshold", c.builder.reprojection_threshold);
    b.get("knn_k", c.builder.knn_k);
    b.get("knn_sigma", c.builder.knn_sigma);
    b.get("estimate_focal", c.builder.estimate_focal);
    b.get("match_threshold", c.builder.match_threshold);
    b.get("match_window", c.builder.match_window);
    b.get("min_triangulation_angle", c.builder.min_triangulation_angle);
    b.get("min_bootstrap_landmarks", c.builder.min_bootstrap_landmarks);
    b.get("min_track_length", c.builder.min_track_length);
    b.get("submap_depth_units", c.builder.submap_depth_units);
    read_ransac(b.child("pnp"), c.builder.pnp);
    read_ransac(b.child("essential"), c.builder.essential);
    b.finish();

    Section ba = top.child("ba");
    ba.get("max_iterations", c.ba.max_iterations);
    ba.get("function_tolerance", c.ba.function_tolerance);
    ba.get("huber_delta", c.ba.huber_delta);
    ba.finish();
    c.ba.estimate_focal = c.builder.estimate_focal;

    Section a = top.child("alignment");
    a.get("huber_delta", c.alignment.huber_delta);
    a.get("lambda_a", c.alignment.lambda_a);
    a.get("max_iterations", c.alignment.max_iterations);
    a.get("function_tolerance", c.alignment.function_tolerance);
    a.get("min_link_inliers", c.alignment.min_link_inliers);
    a.get("anchor_gauge", c.alignment.anchor_gauge);
    a.get("ransac_iterations", c.alignment.ransac_iterations);
    a.get("ransac_threshold_fraction", c.alignment.ransac_threshold_fraction);
    a.get("match_threshold", c.alignment.match_threshold);
    a.get("top_n", c.alignment.top_n);
    a.get("relative_floor", c.alignment.relative_floor);
    a.finish();

    Section v = top.child("vocabulary");
    v.get("k", c.vocabulary.k);
    v.get("L", c.vocabulary.L);
    v.get("path", c.vocabulary.path);
    v.get("sample_size", c.vocabulary.sample_size);
    v.get("document_frames", c.vocabulary.document_frames);
    v.get("seed", c.vocabulary.seed);
    v.finish();

    top.finish();
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) { return parse_pipeline_config(slurp(path), path); }

ScenarioConfig parse_scenario_config(const std::string& yaml_text, const std::string& origin) {
    const YAML::Node root = parse(yaml_text, origin);
    Section top(root, "", origin);
    Section s = top.child("scenario");
    ScenarioConfig c;
    std::string scene = to_string(c.scene), trajectory = to_string(c.trajectory);
    s.get("scene", scene);
    s.get("extent", c.extent);
    s.get("density", c.density);
    s.get("relief", c.relief);
    s.get("trajectory", trajectory);
    s.get("altitude", c.altitude);
    s.get("radius", c.radius);
    s.get("frames_per_revolution", c.frames_per_revolution);
    s.get("look_ahead", c.look_ahead);
    s.get("tilt_deg", c.tilt_deg);
    s.get("frame_count", c.frame_count);
    s.get("cuts", c.cuts);
    s.get("pixel_sigma", c.pixel_sigma);
    s.get("descriptor_sigma", c.descriptor_sigma);
    s.get("outlier_rate", c.outlier_rate);
    s.get("occlusion", c.occlusion);
    s.get("max_range", c.max_range);
    s.get("seed", c.seed);
    Section k = s.child("intrinsics");
    k.get("focal", c.intrinsics.focal);
    k.get("cx", c.intrinsics.principal_point.x());
    k.get("cy", c.intrinsics.principal_point.y());
    k.get("width", c.intrinsics.width);
    k.get("height", c.intrinsics.height);
    k.finish();
    s.finish();
    try {
        c.scene = scene_type_from_string(scene);
        c.trajectory = trajectory_type_from_string(trajectory);
    } catch (const Error& e) {
        throw ConfigError(origin + ": scenario: " + e.what());
    }
    c.validate();
    return c;
}

ScenarioConfig load_scenario_config(const std::string& path) { return parse_scenario_config(slurp(path), path); }

nlohmann::json to_json(const PipelineConfig& c) {
    const auto& b = c.builder;
    const auto& a = c.alignment;
    return {{"seed", c.seed},
            {"mode", to_string(c.mode)},
            {"output_dir", c.output_dir},
            {"channel_capacity", c.channel_capacity},
            {"loop_closure", c.loop_closure},
            {"builder",
             {{"tau_resection", b.tau_resection},
              {"tau_resection_fraction", b.tau_resection_fraction},
              {"tau_resection_floor", b.tau_resection_floor},
              {"tau_stereo", b.tau_stereo},
              {"alpha_stereo", b.alpha_stereo},
              {"keyframes_per_submap", b.keyframes_per_submap},
              {"overlap_fraction", b.overlap_fraction},
              {"view_angle_limit", b.view_angle_limit},
              {"reprojection_threshold", b.reprojection_threshold},
              {"knn_k", b.knn_k},
              {"knn_sigma", b.knn_sigma},
              {"estimate_focal", b.estimate_focal},
              {"match_threshold", b.match_threshold},
              {"match_window", b.match_window},
              {"min_triangulation_angle", b.min_triangulation_angle},
              {"min_bootstrap_landmarks", b.min_bootstrap_landmarks},
              {"min_track_length", b.min_track_length},
              {"submap_depth_units", b.submap_depth_units},
              {"pnp", ransac_json(b.pnp)},
              {"essential", ransac_json(b.essential)}}},
            {"ba",
             {{"max_iterations", c.ba.max_iterations},
              {"function_tolerance", c.ba.function_tolerance},
              {"huber_delta", c.ba.huber_delta},
              {"estimate_focal", c.ba.estimate_focal}}},
            {"alignment",
             {{"huber_delta", a.huber_delta},
              {"lambda_a", a.lambda_a},
              {"max_iterations", a.max_iterations},
              {"function_tolerance", a.function_tolerance},
              {"min_link_inliers", a.min_link_inliers},
              {"anchor_gauge", a.anchor_gauge},
              {"ransac_iterations", a.ransac_iterations},
              {"ransac_threshold_fraction", a.ransac_threshold_fraction},
              {"match_threshold", a.match_threshold},
              {"top_n", a.top_n},
              {"relative_floor", a.relative_floor}}},
            {"vocabulary",
             {{"k", c.vocabulary.k},
              {"L", c.vocabulary.L},
              {"path", c.vocabulary.path},
              {"sample_size", c.vocabulary.sample_size},
              {"document_frames", c.vocabulary.document_frames},
              {"seed", c.vocabulary.seed}}}};
}

nlohmann::json to_json(const ScenarioConfig& c) {
    return {{"scene", to_string(c.scene)},
            {"extent", c.extent},
            {"density", c.density},
            {"relief", c.relief},
            {"trajectory", to_string(c.trajectory)},
            {"altitude", c.altitude},
            {"radius", c.radius},
            {"frames_per_revolution", c.frames_per_revolution},
            {"look_ahead", c.look_ahead},
            {"tilt_deg", c.tilt_deg},
            {"frame_count", c.frame_count},
            {"cuts", c.cuts},
            {"pixel_sigma", c.pixel_sigma},
            {"descriptor_sigma", c.descriptor_sigma},
            {"outlier_rate", c.outlier_rate},
            {"occlusion", c.occlusion},
            {"max_range", c.max_range},
            {"seed", c.seed},
            {"intrinsics",
             {{"focal", c.intrinsics.focal},
              {"cx", c.intrinsics.principal_point.x()},
              {"cy", c.intrinsics.principal_point.y()},
              {"width", c.intrinsics.width},
              {"height", c.intrinsics.height}}}};
}

}  // namespace aeromap
