#include "aeromap/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

namespace aeromap {

void ScenarioConfig::validate() const {
    const auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("scenario." + field + ": " + why);
    };
    if (!(extent > 0.0)) fail("extent", "must be positive");
    if (!(density > 0.0)) fail("density", "must be positive");
    if (!(relief >= 0.0)) fail("relief", "must be non-negative");
    if (!(altitude > 0.0)) fail("altitude", "must be positive");
    if (!(radius > 0.0)) fail("radius", "must be positive");
    if (frames_per_revolution < 4) fail("frames_per_revolution", "must be at least 4");
    if (!(tilt_deg > 0.0 && tilt_deg <= 90.0)) fail("tilt_deg", "must be in (0, 90]");
    if (frame_count < 2) fail("frame_count", "must be at least 2");
    if (!intrinsics.is_valid() || intrinsics.width <= 0 || intrinsics.height <= 0) {
        fail("intrinsics", "focal must be positive and the principal point inside the image");
    }
    if (!(pixel_sigma >= 0.0)) fail("pixel_sigma", "must be non-negative");
    if (!(descriptor_sigma >= 0.0)) fail("descriptor_sigma", "must be non-negative");
    if (!(outlier_rate >= 0.0)) fail("outlier_rate", "must be non-negative");
    if (!(max_range >= 0.0)) fail("max_range", "must be non-negative");
    for (int c : cuts) {
        if (c <= 0 || c >= frame_count) fail("cuts", "cut frames must lie inside (0, frame_count)");
    }
}

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

enum Stream : std::uint64_t { kScene = 1, kDescriptors = 2, kFrame = 3, kTerrain = 4 };

struct Terrain {
    // Sum of plane waves.
    struct Wave {
        Vec2 k;
        double phase, amp;
    };
    std::vector<Wave> waves;

    double height(double x, double y) const {
        double h = 0.0;
        for (const auto& w : waves) h += w.amp * std::sin(w.k.x() * x + w.k.y() * y + w.phase);
        return h;
    }
};

Terrain make_terrain(const ScenarioConfig& cfg) {
    auto rng = make_rng(cfg.seed, kTerrain);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Terrain t;
    const double amps[4] = {0.5, 0.25, 0.15, 0.1};
    for (int i = 0; i < 4; ++i) {
        const double wavelength = cfg.extent / (1.0 + 2.0 * i + u(rng));
        const double dir = 2.0 * kPi * u(rng);
        t.waves.push_back({Vec2(std::cos(dir), std::sin(dir)) * (2.0 * kPi / wavelength),
                           2.0 * kPi * u(rng), amps[i] * cfg.relief});
    }
    return t;
}

}  // namespace

Scene generate_scene(const ScenarioConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(std::llround(cfg.density * cfg.extent * cfg.extent));
    if (n == 0) throw ConfigError("scenario.density: zero landmarks for this extent");
    Scene scene;
    scene.positions.reserve(n);
    scene.descriptors.resize(n);

    auto rng = make_rng(cfg.seed, kScene);
    std::uniform_real_distribution<double> u(-0.5 * cfg.extent, 0.5 * cfg.extent);
    if (cfg.scene == SceneType::Heightfield) {
        const Terrain terrain = make_terrain(cfg);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = u(rng), y = u(rng);
            scene.positions.emplace_back(x, y, terrain.height(x, y));
        }
    } else {
        // 100 m blocks separated by 20 m streets; one flat-roofed building per block.
        const double block = 100.0, street = 20.0;
        std::unordered_map<std::int64_t, double> roof;
        std::uniform_real_distribution<double> h(0.2, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = u(rng), y = u(rng);
            const double bx = std::floor(x / block), by = std::floor(y / block);
            const double fx = x - bx * block, fy = y - by * block;
            double z = 0.0;
            if (fx > street && fy > street) {
                const std::int64_t key = static_cast<std::int64_t>(bx) * 100003 + static_cast<std::int64_t>(by);
                auto it = roof.find(key);
                if (it == roof.end()) {
                    auto brng = make_rng(cfg.seed, kTerrain, static_cast<std::uint64_t>(key));
                    it = roof.emplace(key, h(brng) * cfg.relief).first;
                }
                z = it->second;
            }
            scene.positions.emplace_back(x, y, z);
        }
    }

    auto drng = make_rng(cfg.seed, kDescriptors);
    std::normal_distribution<float> g(0.0f, 1.0f);
    for (auto& d : scene.descriptors) {
        float s = 0.0f;
        for (float& v : d) {
            v = g(drng);
            s += v * v;
        }
        const float inv = 1.0f / std::sqrt(s);
        for (float& v : d) v *= inv;
    }
    return scene;
}

std::vector<SE3Pose> generate_trajectory(const ScenarioConfig& cfg) {
    cfg.validate();
    const double F = cfg.frames_per_revolution;
    const double R = cfg.radius, A = cfg.altitude;
    const double look_in = A / std::tan(deg_to_rad(cfg.tilt_deg));
    const Vec3 up(0, 0, 1);

    std::vector<SE3Pose> poses;
    poses.reserve(cfg.frame_count);
    for (int i = 0; i < cfg.frame_count; ++i) {
        double t = i;
        for (int c : cfg.cuts) {
            if (i >= c) t += 0.25 * F;
        }
        Vec3 p, heading, inward;
        switch (cfg.trajectory) {
            case TrajectoryType::Orbit:
            case TrajectoryType::RingLoop: {
                const double theta = cfg.trajectory == TrajectoryType::RingLoop
                                         ? 2.0 * kPi * t / (cfg.frame_count - 1)
                                         : 2.0 * kPi * t / F;
                p = Vec3(R * std::cos(theta), R * std::sin(theta), A);
                heading = Vec3(-std::sin(theta), std::cos(theta), 0.0);
                inward = Vec3(-std::cos(theta), -std::sin(theta), 0.0);
                break;
            }
            case TrajectoryType::FigureEight: {
                const double phi = 2.0 * kPi * t / F;
                p = Vec3(R * std::sin(phi), R * std::sin(phi) * std::cos(phi), A);
                heading = Vec3(std::cos(phi), std::cos(2.0 * phi), 0.0).normalized();
                inward = up.cross(heading);
                break;
            }
            case TrajectoryType::Raster: {
                // Passes along x, F frames each, joined by quarter-length semicircle turns.
                const double spacing = 0.5 * R;
                const double turn = 0.25 * F;
                const double period = F + turn;
                const int lane = static_cast<int>(std::floor(t / period));
                const double s = t - lane * period;
                const double dir = (lane % 2 == 0) ? 1.0 : -1.0;
                const double y0 = -R + lane * spacing;
                if (s < F) {
                    p = Vec3(dir * (-R + 2.0 * R * s / F), y0, A);
                    heading = Vec3(dir, 0.0, 0.0);
                } else {
                    const double a = kPi * (s - F) / turn;
                    const double r = 0.5 * spacing;
                    p = Vec3(dir * (R + r * std::sin(a)), y0 + r - r * std::cos(a), A);
                    heading = Vec3(dir * std::cos(a), std::sin(a), 0.0);
                }
                inward = up.cross(heading);
                break;
            }
        }
        const Vec3 h = (inward + cfg.look_ahead * heading).normalized();
        const Vec3 target = p + look_in * h - Vec3(0, 0, A);
        poses.push_back(look_at(p, target, up));
    }
    return poses;
}

Frame render_frame(const ScenarioConfig& cfg, const Scene& scene, const SE3Pose& pose,
                   std::uint32_t index) {
    const CameraIntrinsics& K = cfg.intrinsics;
    auto rng = make_rng(cfg.seed, kFrame, index);

    struct Visible {
        std::uint32_t id;
        Vec2 pixel;
        double depth;
    };
    std::vector<Visible> visible;
    const double max_range2 = cfg.max_range > 0.0 ? cfg.max_range * cfg.max_range : 0.0;
    for (std::size_t j = 0; j < scene.positions.size(); ++j) {
        const Vec3 xc = pose.apply(scene.positions[j]);
        if (xc.z() <= 0.0) continue;
        if (max_range2 > 0.0 && xc.squaredNorm() > max_range2) continue;
        const Vec2 px(K.focal * xc.x() / xc.z() + K.principal_point.x(),
                      K.focal * xc.y() / xc.z() + K.principal_point.y());
        if (!K.contains(px)) continue;
        visible.push_back({static_cast<std::uint32_t>(j), px, xc.z()});
    }

    if (cfg.occlusion && !visible.empty()) {
        constexpr int kCell = 16;
        const int cols = K.width / kCell + 1;
        std::vector<double> nearest(static_cast<std::size_t>(cols) * (K.height / kCell + 1),
                                    std::numeric_limits<double>::infinity());
        const auto cell = [&](const Vec2& px) {
            return static_cast<int>(px.y()) / kCell * cols + static_cast<int>(px.x()) / kCell;
        };
        for (const auto& v : visible) nearest[cell(v.pixel)] = std::min(nearest[cell(v.pixel)], v.depth);
        std::erase_if(visible, [&](const Visible& v) { return v.depth > 1.02 * nearest[cell(v.pixel)]; });
    }

    Frame frame;
    frame.id = index;
    frame.observations.reserve(visible.size());
    std::normal_distribution<double> pn(0.0, 1.0);
    std::normal_distribution<float> dn(0.0f, 1.0f);
    const auto sigma_d = static_cast<float>(cfg.descriptor_sigma);
    const auto noisy_descriptor = [&](std::uint32_t id) {
        Descriptor d = scene.descriptors[id];
        if (sigma_d > 0.0f) {
            for (float& v : d) v += sigma_d * dn(rng);
        }
        return d;
    };
    for (const auto& v : visible) {
        Observation o;
        o.pixel = v.pixel;
        if (cfg.pixel_sigma > 0.0) o.pixel += cfg.pixel_sigma * Vec2(pn(rng), pn(rng));
        o.descriptor = noisy_descriptor(v.id);
        o.truth_id = v.id;
        if (K.contains(o.pixel)) frame.observations.push_back(o);
    }

    const auto n_out = static_cast<std::size_t>(std::llround(cfg.outlier_rate * frame.observations.size()));
    if (n_out > 0) {
        std::uniform_real_distribution<double> ux(0.0, K.width), uy(0.0, K.height);
        std::uniform_int_distribution<std::size_t> pick(0, scene.positions.size() - 1);
        for (std::size_t k = 0; k < n_out; ++k) {
            Observation o;
            o.pixel = Vec2(ux(rng), uy(rng));
            o.descriptor = noisy_descriptor(static_cast<std::uint32_t>(pick(rng)));
            o.truth_id = kOutlierTruthId;
            frame.observations.push_back(o);
        }
    }
    std::shuffle(frame.observations.begin(), frame.observations.end(), rng);
    return frame;
}

SimulatedFrameSource::SimulatedFrameSource(ScenarioConfig cfg)
    : cfg_(std::move(cfg)),
      scene_(std::make_shared<const Scene>(generate_scene(cfg_))),
      poses_(generate_trajectory(cfg_)) {}

SimulatedFrameSource::SimulatedFrameSource(ScenarioConfig cfg, std::shared_ptr<const Scene> scene,
                                           std::vector<SE3Pose> poses)
    : cfg_(std::move(cfg)), scene_(std::move(scene)), poses_(std::move(poses)) {}

Frame SimulatedFrameSource::frame(std::size_t index) const {
    return render_frame(cfg_, *scene_, poses_.at(index), static_cast<std::uint32_t>(index));
}

GroundTruth SimulatedFrameSource::ground_truth() const {
    return {cfg_.intrinsics, poses_, scene_->positions};
}

std::string to_string(SceneType t) { return t == SceneType::GridCity ? "grid-city" : "heightfield"; }

std::string to_string(TrajectoryType t) {
    switch (t) {
        case TrajectoryType::Orbit: return "orbit";
        case TrajectoryType::Raster: return "raster";
        case TrajectoryType::RingLoop: return "ring-loop";
        case TrajectoryType::FigureEight: return "figure-eight";
    }
    return "orbit";
}

SceneType scene_type_from_string(const std::string& s) {
    if (s == "grid-city") return SceneType::GridCity;
    if (s == "heightfield") return SceneType::Heightfield;
    throw ConfigError("unknown scene type '" + s + "' (expected grid-city or heightfield)");
}

TrajectoryType trajectory_type_from_string(const std::string& s) {
    if (s == "orbit") return TrajectoryType::Orbit;
    if (s == "raster") return TrajectoryType::Raster;
    if (s == "ring-loop") return TrajectoryType::RingLoop;
    if (s == "figure-eight") return TrajectoryType::FigureEight;
    throw ConfigError("unknown trajectory type '" + s + "'");
}

}  // namespace aeromap
