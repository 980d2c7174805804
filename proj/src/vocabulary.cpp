#include "aeromap/vocabulary.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

namespace aeromap {

namespace {

using DescMatrix = Eigen::Matrix<float, kDescriptorSize, Eigen::Dynamic>;

constexpr int kMaxLloydIterations = 30;
constexpr char kMagic[] = "aeromap-vocabulary 1\n";

float squared_distance(const Descriptor& a, const Descriptor& b) {
    float s = 0.0f;
    for (int i = 0; i < kDescriptorSize; ++i) {
        const float d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct Clustering {
    std::vector<Descriptor> centers;
    std::vector<int> assignment;  // per point
};

// Nearest center per column of X; ties to the lowest index.
void assign(const DescMatrix& X, const std::vector<Descriptor>& centers, std::vector<int>& out) {
    const int k = static_cast<int>(centers.size());
    DescMatrix C(kDescriptorSize, k);
    for (int c = 0; c < k; ++c) C.col(c) = Eigen::Map<const Eigen::VectorXf>(centers[c].data(), kDescriptorSize);
    const Eigen::RowVectorXf cn = C.colwise().squaredNorm();
    const Eigen::MatrixXf G = C.transpose() * X;  // k x n
    out.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        int best = 0;
        float best_d = cn(0) - 2.0f * G(0, j);
        for (int c = 1; c < k; ++c) {
            const float d = cn(c) - 2.0f * G(c, j);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        out[j] = best;
    }
}

Clustering kmeans(const DescMatrix& X, int k, std::mt19937_64& rng) {
    const auto n = static_cast<int>(X.cols());
    const auto point = [&](int j) {
        Descriptor d;
        Eigen::Map<Eigen::VectorXf>(d.data(), kDescriptorSize) = X.col(j);
        return d;
    };
    Clustering out;
    // k-means++ seeding; stops early once every point coincides with a center.
    out.centers.push_back(point(std::uniform_int_distribution<int>(0, n - 1)(rng)));
    std::vector<double> d2(n);
    for (int j = 0; j < n; ++j) d2[j] = squared_distance(point(j), out.centers[0]);
    while (static_cast<int>(out.centers.size()) < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        if (!(total > 0.0)) break;
        double r = std::uniform_real_distribution<double>(0.0, total)(rng);
        int pick = n - 1;
        for (int j = 0; j < n; ++j) {
            r -= d2[j];
            if (r < 0.0 && d2[j] > 0.0) {
                pick = j;
                break;
            }
        }
        while (d2[pick] <= 0.0) --pick;  // rounding at the tail
        out.centers.push_back(point(pick));
        for (int j = 0; j < n; ++j) d2[j] = std::min<double>(d2[j], squared_distance(point(j), out.centers.back()));
    }

    const int kc = static_cast<int>(out.centers.size());
    assign(X, out.centers, out.assignment);
    for (int it = 0; it < kMaxLloydIterations; ++it) {
        std::vector<Eigen::VectorXd> sum(kc, Eigen::VectorXd::Zero(kDescriptorSize));
        std::vector<int> count(kc, 0);
        for (int j = 0; j < n; ++j) {
            sum[out.assignment[j]] += X.col(j).cast<double>();
            ++count[out.assignment[j]];
        }
        for (int c = 0; c < kc; ++c) {
            if (count[c] == 0) continue;  // empty cluster keeps its center
            const Eigen::VectorXf mean = (sum[c] / count[c]).cast<float>();
            Eigen::Map<Eigen::VectorXf>(out.centers[c].data(), kDescriptorSize) = mean;
        }
        std::vector<int> next;
        assign(X, out.centers, next);
        if (next == out.assignment) break;
        out.assignment = std::move(next);
    }
    return out;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DatasetError("vocabulary: truncated file");
    return v;
}

}  // namespace

VocabularyTree build_vocabulary(std::span<const Descriptor> sample, int k, int L, std::uint64_t seed) {
    if (sample.empty()) throw PreconditionError("build_vocabulary: empty descriptor sample");
    if (k < 2) throw PreconditionError("build_vocabulary: branching factor k must be at least 2");
    if (L < 1) throw PreconditionError("build_vocabulary: depth L must be at least 1");

    VocabularyTree tree;
    tree.k_ = k;
    tree.L_ = L;
    tree.seed_ = seed;
    tree.nodes_.emplace_back();
    std::mt19937_64 rng(seed);

    struct Work {
        int node;
        int level;
        std::vector<int> members;
    };
    std::vector<int> all(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) all[i] = static_cast<int>(i);
    // Breadth-first split so node ids are level-ordered; words assigned afterwards.
    std::vector<Work> queue{{0, 0, std::move(all)}};
    for (std::size_t q = 0; q < queue.size(); ++q) {
        Work w = std::move(queue[q]);
        if (w.level == L || w.members.empty()) continue;
        DescMatrix X(kDescriptorSize, static_cast<Eigen::Index>(w.members.size()));
        for (std::size_t j = 0; j < w.members.size(); ++j) {
            X.col(j) = Eigen::Map<const Eigen::VectorXf>(sample[w.members[j]].data(), kDescriptorSize);
        }
        const Clustering cl = kmeans(X, k, rng);
        if (cl.centers.size() < 2 && w.node != 0) continue;  // one distinct point: leaf
        const auto first = static_cast<std::int32_t>(tree.nodes_.size());
        tree.nodes_[w.node].first_child = first;
        tree.nodes_[w.node].num_children = static_cast<std::int32_t>(cl.centers.size());
        std::vector<std::vector<int>> members(cl.centers.size());
        for (std::size_t j = 0; j < w.members.size(); ++j) members[cl.assignment[j]].push_back(w.members[j]);
        for (std::size_t c = 0; c < cl.centers.size(); ++c) {
            VocabularyTree::Node child;
            child.center = cl.centers[c];
            tree.nodes_.push_back(child);
            queue.push_back({first + static_cast<int>(c), w.level + 1, std::move(members[c])});
        }
    }
    std::int32_t words = 0;
    for (auto& n : tree.nodes_) {
        if (n.num_children == 0) n.word = words++;
    }
    tree.weights_.assign(static_cast<std::size_t>(words), 1.0);
    return tree;
}

std::uint32_t VocabularyTree::quantize(const Descriptor& d) const {
    if (nodes_.empty()) throw PreconditionError("quantize: empty vocabulary");
    const Node* n = &nodes_[0];
    while (n->num_children > 0) {
        int best = n->first_child;
        float best_d = squared_distance(d, nodes_[best].center);
        for (int c = 1; c < n->num_children; ++c) {
            const float dc = squared_distance(d, nodes_[n->first_child + c].center);
            if (dc < best_d) {
                best_d = dc;
                best = n->first_child + c;
            }
        }
        n = &nodes_[best];
    }
    return static_cast<std::uint32_t>(n->word);
}

void VocabularyTree::set_idf(const std::vector<std::vector<Descriptor>>& documents) {
    if (documents.empty()) throw PreconditionError("set_idf: no training documents");
    std::vector<int> df(weights_.size(), 0);
    for (const auto& doc : documents) {
        std::set<std::uint32_t> seen;
        for (const auto& d : doc) seen.insert(quantize(d));
        for (auto w : seen) ++df[w];
    }
    const double N = static_cast<double>(documents.size());
    for (std::size_t w = 0; w < weights_.size(); ++w) weights_[w] = std::log(N / std::max(df[w], 1));
}

void VocabularyTree::save(std::ostream& out) const {
    out.write(kMagic, sizeof(kMagic) - 1);
    write_pod<std::int32_t>(out, k_);
    write_pod<std::int32_t>(out, L_);
    write_pod<std::uint64_t>(out, seed_);
    write_pod<std::uint64_t>(out, nodes_.size());
    for (const auto& n : nodes_) {
        out.write(reinterpret_cast<const char*>(n.center.data()), sizeof(float) * kDescriptorSize);
        write_pod(out, n.first_child);
        write_pod(out, n.num_children);
        write_pod(out, n.word);
    }
    write_pod<std::uint64_t>(out, weights_.size());
    for (double w : weights_) write_pod(out, w);
}

VocabularyTree VocabularyTree::load(std::istream& in) {
    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw DatasetError("vocabulary: bad magic/version");
    VocabularyTree t;
    t.k_ = read_pod<std::int32_t>(in);
    t.L_ = read_pod<std::int32_t>(in);
    t.seed_ = read_pod<std::uint64_t>(in);
    const auto nodes = read_pod<std::uint64_t>(in);
    if (nodes == 0 || nodes > (1u << 26)) throw DatasetError("vocabulary: implausible node count");
    t.nodes_.resize(nodes);
    for (auto& n : t.nodes_) {
        in.read(reinterpret_cast<char*>(n.center.data()), sizeof(float) * kDescriptorSize);
        n.first_child = read_pod<std::int32_t>(in);
        n.num_children = read_pod<std::int32_t>(in);
        n.word = read_pod<std::int32_t>(in);
    }
    const auto words = read_pod<std::uint64_t>(in);
    if (words > nodes) throw DatasetError("vocabulary: implausible word count");
    t.weights_.resize(words);
    for (auto& w : t.weights_) w = read_pod<double>(in);
    for (const auto& n : t.nodes_) {
        if (n.num_children < 0 || (n.num_children > 0 && (n.first_child <= 0 ||
                                                          n.first_child + n.num_children > static_cast<std::int64_t>(nodes))) ||
            (n.num_children == 0 && (n.word < 0 || n.word >= static_cast<std::int64_t>(words)))) {
            throw DatasetError("vocabulary: corrupt node table");
        }
    }
    return t;
}

void VocabularyTree::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot write vocabulary '" + path + "'");
    save(out);
}

VocabularyTree VocabularyTree::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open vocabulary '" + path + "'");
    return load(in);
}

bool VocabularyTree::operator==(const VocabularyTree& o) const {
    if (k_ != o.k_ || L_ != o.L_ || seed_ != o.seed_ || weights_ != o.weights_ || nodes_.size() != o.nodes_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto &a = nodes_[i], &b = o.nodes_[i];
        if (a.center != b.center || a.first_child != b.first_child || a.num_children != b.num_children ||
            a.word != b.word) {
            return false;
        }
    }
    return true;
}

BowVector bow_vector(const VocabularyTree& tree, std::span<const Descriptor> descriptors) {
    BowVector v;
    for (const auto& d : descriptors) {
        const auto w = tree.quantize(d);
        v[w] += tree.weight(w);
    }
    double total = 0.0;
    for (const auto& [w, x] : v) total += x;
    if (!(total > 0.0)) return {};
    for (auto it = v.begin(); it != v.end();) {
        if (it->second == 0.0) {
            it = v.erase(it);
        } else {
            it->second /= total;
            ++it;
        }
    }
    return v;
}

double bow_similarity(const BowVector& a, const BowVector& b) {
    // Equal to (2 - |a - b|_1) / 2 for L1-normalized vectors; summed over shared
    // words in ascending order, as the inverted index does.
    double s = 0.0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            s += std::min(ia->second, ib->second);
            ++ia;
            ++ib;
        }
    }
    return s;
}

}  // namespace aeromap
