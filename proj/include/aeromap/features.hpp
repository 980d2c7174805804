#pragma once

#include "aeromap/camera.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace aeromap {

constexpr int kDescriptorSize = 128;
using Descriptor = std::array<float, kDescriptorSize>;

/// Truth id sentinels carried by observations.
constexpr std::uint32_t kNoTruthId = 0xFFFFFFFFu;
constexpr std::uint32_t kOutlierTruthId = 0xFFFFFFFEu;

inline bool is_real_truth_id(std::uint32_t id) { return id < kOutlierTruthId; }

struct Observation {
    Vec2 pixel = Vec2::Zero();
    Descriptor descriptor{};
    std::uint32_t truth_id = kNoTruthId;
};

struct Frame {
    std::uint32_t id = 0;
    std::vector<Observation> observations;
};

/// Random access to an ordered frame sequence. Implementations may generate or
/// read frames lazily; frame(i) must be deterministic.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::size_t size() const = 0;
    virtual Frame frame(std::size_t index) const = 0;
    virtual CameraIntrinsics intrinsics() const = 0;
};

class InMemoryFrameSource : public FrameSource {
public:
    InMemoryFrameSource(CameraIntrinsics K, std::vector<Frame> frames)
        : K_(K), frames_(std::move(frames)) {}
    std::size_t size() const override { return frames_.size(); }
    Frame frame(std::size_t index) const override { return frames_.at(index); }
    CameraIntrinsics intrinsics() const override { return K_; }

private:
    CameraIntrinsics K_;
    std::vector<Frame> frames_;
};

float descriptor_distance(const Descriptor& a, const Descriptor& b);

struct DescriptorMatch {
    int a = -1;
    int b = -1;
    float distance = 0.0f;
};

/// Mutual nearest neighbours between two descriptor sets under max_distance
/// (Euclidean). Sorted by index in a.
std::vector<DescriptorMatch> match_mutual_nn(std::span<const Descriptor> a,
                                             std::span<const Descriptor> b, float max_distance);

/// For each descriptor in a, the nearest descriptor in b and its distance
/// (index -1 when b is empty).
std::vector<DescriptorMatch> nearest_neighbors(std::span<const Descriptor> a,
                                               std::span<const Descriptor> b);

/// Median over the set of each descriptor's distance to its nearest other
/// member. Zero for fewer than two descriptors.
float median_nn_distance(std::span<const Descriptor> set);

/// Pixel-space bucket grid for windowed lookups.
class PixelGrid {
public:
    PixelGrid(std::span<const Observation> obs, double cell_size);
    /// Indices of observations within radius of p.
    void query(const Vec2& p, double radius, std::vector<int>& out) const;

private:
    std::span<const Observation> obs_;
    double cell_;
    int cols_ = 0, rows_ = 0;
    double min_x_ = 0, min_y_ = 0;
    std::vector<int> start_;
    std::vector<int> items_;
};

}  // namespace aeromap
