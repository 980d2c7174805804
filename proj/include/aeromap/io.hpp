#pragma once

#include "aeromap/alignment.hpp"
#include "aeromap/simulation.hpp"

#include "json.hpp"

#include <chrono>
#include <fstream>
#include <mutex>
#include <string>

namespace aeromap {

// Feature-track dataset: a text header terminated by "end\n", a frame index of
// (uint32 id, uint32 count, uint64 offset) and per-observation records of
// float64 pixel x2, float32 descriptor x128 and, when "truth 1", uint32 truth id.
// All binary fields little-endian.

/// Writes every frame of a source. Returns the number of observations written.
std::size_t write_dataset(const std::string& path, const FrameSource& source, bool with_truth = true);

/// Seekable reader; frames are loaded on demand. Throws DatasetError on a bad
/// header, truncated index or non-increasing frame ids.
class FileFrameSource : public FrameSource {
public:
    explicit FileFrameSource(const std::string& path);

    std::size_t size() const override { return index_.size(); }
    Frame frame(std::size_t index) const override;
    CameraIntrinsics intrinsics() const override { return K_; }
    bool has_truth() const { return truth_; }

private:
    struct Entry {
        std::uint32_t id;
        std::uint32_t count;
        std::uint64_t offset;
    };
    std::string path_;
    CameraIntrinsics K_;
    bool truth_ = false;
    std::vector<Entry> index_;
    mutable std::ifstream in_;
    mutable std::mutex mutex_;
};

/// Ground truth: text header, then float64 per-frame (quaternion wxyz,
/// translation) and landmark xyz.
void write_ground_truth(const std::string& path, const GroundTruth& truth);
GroundTruth read_ground_truth(const std::string& path);

/// Binary little-endian PLY: double x, y, z, uint submap_id, uint truth_id.
void write_ply(const std::string& path, const GlobalMap& map);
struct PlyCloud {
    AlignedVector<Vec3> points;
    std::vector<std::uint32_t> submap_ids;
    std::vector<std::uint32_t> truth_ids;
};
PlyCloud read_ply(const std::string& path);

/// One line per frame: frame_id qw qx qy qz tx ty tz submap_id relocalized.
/// The pose is camera-from-global.
void write_trajectory(const std::string& path, const std::vector<TrajectoryEntry>& trajectory);
std::vector<TrajectoryEntry> read_trajectory(const std::string& path);

/// Every submap in its local frame plus its global Sim(3), for offline inspection.
/// Wall-clock fields are left out so the file is reproducible.
void write_submap_archive(const std::string& path, const std::vector<const Submap*>& submaps,
                          const std::map<std::uint32_t, Sim3Transform>& poses);
struct ArchivedSubmap {
    Submap submap;
    std::optional<Sim3Transform> pose;
};
std::vector<ArchivedSubmap> read_submap_archive(const std::string& path);

/// Thread-safe JSON-lines writer; every record gets "t" (seconds since the
/// log's creation) and "worker".
class EventLog {
public:
    EventLog(const std::string& path, std::string worker);
    void write(nlohmann::json event);

private:
    std::mutex mutex_;
    std::ofstream out_;
    std::string worker_;
    std::chrono::steady_clock::time_point start_;
};

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

}  // namespace aeromap
