#include "aeromap/io.hpp"

#include <Eigen/Geometry>

#include <bit>
#include <cstring>
#include <iomanip>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace aeromap {

namespace {

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
    T v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DatasetError(what + ": unexpected end of file");
    return v;
}

void put_vec(std::ostream& out, const Vec3& v) {
    for (int i = 0; i < 3; ++i) put(out, v[i]);
}

Vec3 get_vec(std::istream& in, const std::string& what) {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = get<double>(in, what);
    return v;
}

void put_pose(std::ostream& out, const SE3Pose& p) {
    const Eigen::Quaterniond q(p.rotation);
    put(out, q.w());
    put(out, q.x());
    put(out, q.y());
    put(out, q.z());
    put_vec(out, p.translation);
}

SE3Pose get_pose(std::istream& in, const std::string& what) {
    double c[4];
    for (double& x : c) x = get<double>(in, what);
    SE3Pose p;
    p.rotation = Eigen::Quaterniond(c[0], c[1], c[2], c[3]).normalized().toRotationMatrix();
    p.translation = get_vec(in, what);
    return p;
}

void put_string(std::ostream& out, const std::string& s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::string& what) {
    const auto n = get<std::uint32_t>(in, what);
    if (n > (1u << 24)) throw DatasetError(what + ": implausible string length");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw DatasetError(what + ": unexpected end of file");
    return s;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open " + path + " for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path);
    return in;
}

// Reads "key value..." lines until "end". The first line must equal magic.
std::map<std::string, std::string> read_header(std::istream& in, const std::string& magic,
                                               const std::string& path) {
    std::string line;
    if (!std::getline(in, line) || line != magic) {
        throw DatasetError(path + ": not a '" + magic + "' file (bad magic or version)");
    }
    std::map<std::string, std::string> h;
    while (std::getline(in, line)) {
        if (line == "end") return h;
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw DatasetError(path + ": malformed header line '" + line + "'");
        h[line.substr(0, sp)] = line.substr(sp + 1);
    }
    throw DatasetError(path + ": header not terminated");
}

const std::string& header_field(const std::map<std::string, std::string>& h, const std::string& key,
                                const std::string& path) {
    const auto it = h.find(key);
    if (it == h.end()) throw DatasetError(path + ": header field '" + key + "' missing");
    return it->second;
}

void write_intrinsics(std::ostream& out, const CameraIntrinsics& K) {
    out << std::setprecision(17) << "focal " << K.focal << "\nprincipal " << K.principal_point.x() << ' '
        << K.principal_point.y() << "\nimage " << K.width << ' ' << K.height << '\n';
}

CameraIntrinsics parse_intrinsics(const std::map<std::string, std::string>& h, const std::string& path) {
    CameraIntrinsics K;
    std::istringstream f(header_field(h, "focal", path)), p(header_field(h, "principal", path)),
        im(header_field(h, "image", path));
    f >> K.focal;
    p >> K.principal_point.x() >> K.principal_point.y();
    im >> K.width >> K.height;
    if (f.fail() || p.fail() || im.fail() || !K.is_valid()) throw DatasetError(path + ": invalid intrinsics");
    return K;
}

std::size_t parse_count(const std::map<std::string, std::string>& h, const std::string& key,
                        const std::string& path) {
    const std::string& v = header_field(h, key, path);
    std::size_t pos = 0;
    unsigned long long n = 0;
    try {
        n = std::stoull(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw DatasetError(path + ": header field '" + key + "' is not a count");
    return static_cast<std::size_t>(n);
}

}  // namespace

std::size_t write_dataset(const std::string& path, const FrameSource& source, bool with_truth) {
    auto out = open_out(path);
    const std::size_t n = source.size();
    out << "aeromap-dataset 1\n";
    write_intrinsics(out, source.intrinsics());
    out << "frames " << n << "\ntruth " << (with_truth ? 1 : 0) << "\nend\n";
    const std::uint64_t index_at = static_cast<std::uint64_t>(out.tellp());
    // Index placeholder, patched once the counts are known.
    for (std::size_t i = 0; i < n; ++i) {
        put(out, std::uint32_t{0});
        put(out, std::uint32_t{0});
        put(out, std::uint64_t{0});
    }
    std::vector<std::uint32_t> ids(n), counts(n);
    std::vector<std::uint64_t> offsets(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Frame f = source.frame(i);
        if (i > 0 && f.id <= ids[i - 1]) throw DatasetError(path + ": frame ids must be strictly increasing");
        ids[i] = f.id;
        counts[i] = static_cast<std::uint32_t>(f.observations.size());
        offsets[i] = static_cast<std::uint64_t>(out.tellp());
        for (const auto& o : f.observations) {
            put(out, o.pixel.x());
            put(out, o.pixel.y());
            out.write(reinterpret_cast<const char*>(o.descriptor.data()), kDescriptorSize * sizeof(float));
            if (with_truth) put(out, o.truth_id);
        }
        total += f.observations.size();
    }
    out.seekp(static_cast<std::streamoff>(index_at));
    for (std::size_t i = 0; i < n; ++i) {
        put(out, ids[i]);
        put(out, counts[i]);
        put(out, offsets[i]);
    }
    if (!out) throw DatasetError("failed writing " + path);
    return total;
}

FileFrameSource::FileFrameSource(const std::string& path) : path_(path), in_(open_in(path)) {
    const auto h = read_header(in_, "aeromap-dataset 1", path);
    K_ = parse_intrinsics(h, path);
    const std::size_t n = parse_count(h, "frames", path);
    truth_ = parse_count(h, "truth", path) != 0;
    in_.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(in_.tellg());
    in_.seekg(static_cast<std::streamoff>(0));
    read_header(in_, "aeromap-dataset 1", path);
    const std::uint64_t record = 2 * sizeof(double) + kDescriptorSize * sizeof(float) + (truth_ ? 4 : 0);
    index_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Entry e;
        e.id = get<std::uint32_t>(in_, path);
        e.count = get<std::uint32_t>(in_, path);
        e.offset = get<std::uint64_t>(in_, path);
        if (!index_.empty() && e.id <= index_.back().id) {
            throw DatasetError(path + ": frame ids not strictly increasing at index " + std::to_string(i));
        }
        if (e.offset + e.count * record > file_size) {
            throw DatasetError(path + ": frame " + std::to_string(e.id) + " extends past the end of the file");
        }
        index_.push_back(e);
    }
}

Frame FileFrameSource::frame(std::size_t index) const {
    const Entry& e = index_.at(index);
    Frame f;
    f.id = e.id;
    f.observations.resize(e.count);
    std::lock_guard lock(mutex_);
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(e.offset));
    for (auto& o : f.observations) {
        o.pixel.x() = get<double>(in_, path_);
        o.pixel.y() = get<double>(in_, path_);
        if (!in_.read(reinterpret_cast<char*>(o.descriptor.data()), kDescriptorSize * sizeof(float))) {
            throw DatasetError(path_ + ": truncated frame " + std::to_string(e.id));
        }
        if (truth_) o.truth_id = get<std::uint32_t>(in_, path_);
    }
    return f;
}

void write_ground_truth(const std::string& path, const GroundTruth& truth) {
    auto out = open_out(path);
    out << "aeromap-truth 1\n";
    write_intrinsics(out, truth.intrinsics);
    out << "poses " << truth.poses.size() << "\nlandmarks " << truth.landmarks.size() << "\nend\n";
    for (const auto& p : truth.poses) put_pose(out, p);
    for (const auto& x : truth.landmarks) put_vec(out, x);
    if (!out) throw DatasetError("failed writing " + path);
}

GroundTruth read_ground_truth(const std::string& path) {
    auto in = open_in(path);
    const auto h = read_header(in, "aeromap-truth 1", path);
    GroundTruth t;
    t.intrinsics = parse_intrinsics(h, path);
    const std::size_t np = parse_count(h, "poses", path), nl = parse_count(h, "landmarks", path);
    for (std::size_t i = 0; i < np; ++i) t.poses.push_back(get_pose(in, path));
    for (std::size_t i = 0; i < nl; ++i) t.landmarks.push_back(get_vec(in, path));
    return t;
}

void write_ply(const std::string& path, const GlobalMap& map) {
    auto out = open_out(path);
    out << "ply\nformat binary_little_endian 1.0\ncomment aeromap global landmark cloud\n"
        << "element vertex " << map.landmarks.size() << "\nproperty double x\nproperty double y\n"
        << "property double z\nproperty uint submap_id\nproperty uint truth_id\nend_header\n";
    for (std::size_t i = 0; i < map.landmarks.size(); ++i) {
        put_vec(out, map.landmarks[i]);
        put(out, map.landmark_submap[i]);
        put(out, map.landmark_truth[i]);
    }
    if (!out) throw DatasetError("failed writing " + path);
}

PlyCloud read_ply(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    std::size_t n = 0;
    std::vector<std::string> props;
    bool binary = false;
    if (!std::getline(in, line) || line != "ply") throw DatasetError(path + ": not a PLY file");
    while (std::getline(in, line) && line != "end_header") {
        std::istringstream ls(line);
        std::string k;
        ls >> k;
        if (k == "format") {
            std::string f;
            ls >> f;
            binary = f == "binary_little_endian";
        } else if (k == "element") {
            std::string name;
            ls >> name >> n;
        } else if (k == "property") {
            std::string type, name;
            ls >> type >> name;
            props.push_back(type + " " + name);
        }
    }
    const std::vector<std::string> expected{"double x", "double y", "double z", "uint submap_id", "uint truth_id"};
    if (!binary || props != expected) throw DatasetError(path + ": unsupported PLY layout");
    PlyCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        c.points.push_back(get_vec(in, path));
        c.submap_ids.push_back(get<std::uint32_t>(in, path));
        c.truth_ids.push_back(get<std::uint32_t>(in, path));
    }
    return c;
}

void write_trajectory(const std::string& path, const std::vector<TrajectoryEntry>& trajectory) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DatasetError("cannot open " + path + " for writing");
    out << "# frame_id qw qx qy qz tx ty tz submap_id relocalized\n" << std::setprecision(17);
    for (const auto& e : trajectory) {
        const Eigen::Quaterniond q(e.pose.rotation);
        out << e.frame_id << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' '
            << e.pose.translation.x() << ' ' << e.pose.translation.y() << ' ' << e.pose.translation.z() << ' '
            << e.submap_id << ' ' << (e.relocalized ? 1 : 0) << '\n';
    }
}

std::vector<TrajectoryEntry> read_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path);
    std::vector<TrajectoryEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        TrajectoryEntry e;
        double w, x, y, z;
        int reloc;
        ls >> e.frame_id >> w >> x >> y >> z >> e.pose.translation.x() >> e.pose.translation.y() >>
            e.pose.translation.z() >> e.submap_id >> reloc;
        if (ls.fail()) throw DatasetError(path + ":" + std::to_string(lineno) + ": malformed trajectory line");
        e.pose.rotation = Eigen::Quaterniond(w, x, y, z).normalized().toRotationMatrix();
        e.relocalized = reloc != 0;
        out.push_back(e);
    }
    return out;
}

void write_submap_archive(const std::string& path, const std::vector<const Submap*>& submaps,
                          const std::map<std::uint32_t, Sim3Transform>& poses) {
    auto out = open_out(path);
    out << "aeromap-submaps 1\ncount " << submaps.size() << "\nend\n";
    for (const Submap* s : submaps) {
        put(out, s->id);
        put(out, static_cast<std::uint8_t>(s->status));
        put(out, s->first_frame);
        put(out, s->last_frame);
        put(out, s->final_rms);
        put(out, s->principal_point.x());
        put(out, s->principal_point.y());
        put_string(out, s->failure_reason);
        const auto p = poses.find(s->id);
        put(out, static_cast<std::uint8_t>(p != poses.end()));
        if (p != poses.end()) {
            put_pose(out, {p->second.rotation, p->second.translation});
            put(out, p->second.scale);
        }
        put(out, static_cast<std::uint32_t>(s->keyframes.size()));
        for (const auto& k : s->keyframes) {
            put(out, k.frame_id);
            put(out, static_cast<std::uint8_t>(k.kind));
            put(out, k.focal);
            put_pose(out, k.pose);
        }
        put(out, static_cast<std::uint32_t>(s->landmarks.size()));
        for (const auto& [id, lm] : s->landmarks) {
            put(out, lm.id);
            put_vec(out, lm.position);
            out.write(reinterpret_cast<const char*>(lm.descriptor.data()), kDescriptorSize * sizeof(float));
            put_vec(out, lm.source_view_direction);
            put(out, lm.truth_id);
            put(out, static_cast<std::uint32_t>(lm.observations.size()));
            for (const auto& o : lm.observations) {
                put(out, o.frame_id);
                put(out, o.pixel.x());
                put(out, o.pixel.y());
            }
        }
        put(out, static_cast<std::uint32_t>(s->frame_poses.size()));
        for (const auto& f : s->frame_poses) {
            put(out, f.frame_id);
            put_pose(out, f.pose);
            put(out, static_cast<std::uint8_t>(f.relocalized));
            put(out, static_cast<std::int32_t>(f.inliers));
        }
    }
    if (!out) throw DatasetError("failed writing " + path);
}

std::vector<ArchivedSubmap> read_submap_archive(const std::string& path) {
    auto in = open_in(path);
    const auto h = read_header(in, "aeromap-submaps 1", path);
    const std::size_t n = parse_count(h, "count", path);
    std::vector<ArchivedSubmap> out(n);
    for (auto& a : out) {
        Submap& s = a.submap;
        s.id = get<std::uint32_t>(in, path);
        s.status = static_cast<SubmapStatus>(get<std::uint8_t>(in, path));
        s.first_frame = get<std::uint32_t>(in, path);
        s.last_frame = get<std::uint32_t>(in, path);
        s.final_rms = get<double>(in, path);
        s.principal_point.x() = get<double>(in, path);
        s.principal_point.y() = get<double>(in, path);
        s.failure_reason = get_string(in, path);
        if (get<std::uint8_t>(in, path)) {
            const SE3Pose p = get_pose(in, path);
            a.pose = Sim3Transform{p.rotation, get<double>(in, path), p.translation};
        }
        const auto nk = get<std::uint32_t>(in, path);
        for (std::uint32_t i = 0; i < nk; ++i) {
            Keyframe k;
            k.frame_id = get<std::uint32_t>(in, path);
            k.kind = static_cast<KeyframeKind>(get<std::uint8_t>(in, path));
            k.focal = get<double>(in, path);
            k.pose = get_pose(in, path);
            s.keyframes.push_back(k);
        }
        const auto nl = get<std::uint32_t>(in, path);
        for (std::uint32_t i = 0; i < nl; ++i) {
            Landmark lm;
            lm.id = get<std::uint32_t>(in, path);
            lm.position = get_vec(in, path);
            if (!in.read(reinterpret_cast<char*>(lm.descriptor.data()), kDescriptorSize * sizeof(float))) {
                throw DatasetError(path + ": unexpected end of file");
            }
            lm.source_view_direction = get_vec(in, path);
            lm.truth_id = get<std::uint32_t>(in, path);
            const auto no = get<std::uint32_t>(in, path);
            for (std::uint32_t j = 0; j < no; ++j) {
                LandmarkObservation o;
                o.frame_id = get<std::uint32_t>(in, path);
                o.pixel.x() = get<double>(in, path);
                o.pixel.y() = get<double>(in, path);
                lm.observations.push_back(o);
            }
            s.landmarks.emplace(lm.id, std::move(lm));
        }
        const auto nf = get<std::uint32_t>(in, path);
        for (std::uint32_t i = 0; i < nf; ++i) {
            FramePose f;
            f.frame_id = get<std::uint32_t>(in, path);
            f.pose = get_pose(in, path);
            f.relocalized = get<std::uint8_t>(in, path) != 0;
            f.inliers = get<std::int32_t>(in, path);
            s.frame_poses.push_back(f);
        }
    }
    return out;
}

EventLog::EventLog(const std::string& path, std::string worker)
    : out_(path, std::ios::trunc), worker_(std::move(worker)), start_(std::chrono::steady_clock::now()) {
    if (!out_) throw DatasetError("cannot open " + path + " for writing");
}

void EventLog::write(nlohmann::json event) {
    std::lock_guard lock(mutex_);
    event["t"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    event["worker"] = worker_;
    out_ << event.dump() << '\n';
    out_.flush();
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DatasetError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(path + ": " + e.what());
    }
}

}  // namespace aeromap
