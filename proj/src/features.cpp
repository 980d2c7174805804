#include "aeromap/features.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace aeromap {

namespace {

using ConstDescMap = Eigen::Map<const Eigen::Matrix<float, kDescriptorSize, Eigen::Dynamic>>;

ConstDescMap as_matrix(std::span<const Descriptor> d) {
    return ConstDescMap(d.empty() ? nullptr : d.front().data(), kDescriptorSize,
                        static_cast<Eigen::Index>(d.size()));
}

struct Nearest {
    int index = -1;
    float sq = std::numeric_limits<float>::infinity();
};

// Row-wise (for a) and column-wise (for b) nearest neighbours via blocked
// |a|^2 + |b|^2 - 2 a.b. exclude_self skips the diagonal when a and b alias.
void all_nearest(std::span<const Descriptor> a, std::span<const Descriptor> b, bool exclude_self,
                 std::vector<Nearest>* for_a, std::vector<Nearest>* for_b) {
    const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
    if (for_a) for_a->assign(na, {});
    if (for_b) for_b->assign(nb, {});
    if (na == 0 || nb == 0) return;
    const auto A = as_matrix(a);
    const auto B = as_matrix(b);
    const Eigen::VectorXf nA = A.colwise().squaredNorm().transpose();
    const Eigen::RowVectorXf nB = B.colwise().squaredNorm();
    constexpr int kBlock = 512;
    Eigen::MatrixXf D;
    for (int r0 = 0; r0 < na; r0 += kBlock) {
        const int rows = std::min(kBlock, na - r0);
        D.noalias() = A.middleCols(r0, rows).transpose() * B;
        D *= -2.0f;
        D.colwise() += nA.segment(r0, rows);
        D.rowwise() += nB;
        for (int j = 0; j < nb; ++j) {
            for (int i = 0; i < rows; ++i) {
                const int gi = r0 + i;
                if (exclude_self && gi == j) continue;
                const float d = D(i, j);
                if (for_a) {
                    Nearest& n = (*for_a)[gi];
                    if (d < n.sq) n = {j, d};
                }
                if (for_b) {
                    Nearest& n = (*for_b)[j];
                    if (d < n.sq) n = {gi, d};
                }
            }
        }
    }
}

}  // namespace

float descriptor_distance(const Descriptor& a, const Descriptor& b) {
    float s = 0.0f;
    for (int i = 0; i < kDescriptorSize; ++i) {
        const float d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::vector<DescriptorMatch> match_mutual_nn(std::span<const Descriptor> a,
                                             std::span<const Descriptor> b, float max_distance) {
    std::vector<Nearest> na, nb;
    all_nearest(a, b, false, &na, &nb);
    std::vector<DescriptorMatch> out;
    for (int i = 0; i < static_cast<int>(a.size()); ++i) {
        const int j = na[i].index;
        if (j < 0 || nb[j].index != i) continue;
        const float d = descriptor_distance(a[i], b[j]);
        if (d <= max_distance) out.push_back({i, j, d});
    }
    return out;
}

std::vector<DescriptorMatch> nearest_neighbors(std::span<const Descriptor> a,
                                               std::span<const Descriptor> b) {
    std::vector<Nearest> na;
    all_nearest(a, b, false, &na, nullptr);
    std::vector<DescriptorMatch> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i].a = static_cast<int>(i);
        out[i].b = na[i].index;
        out[i].distance = na[i].index >= 0 ? descriptor_distance(a[i], b[na[i].index])
                                           : std::numeric_limits<float>::infinity();
    }
    return out;
}

float median_nn_distance(std::span<const Descriptor> set) {
    if (set.size() < 2) return 0.0f;
    std::vector<Nearest> nn;
    all_nearest(set, set, true, &nn, nullptr);
    std::vector<float> d(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) d[i] = descriptor_distance(set[i], set[nn[i].index]);
    const auto mid = d.begin() + d.size() / 2;
    std::nth_element(d.begin(), mid, d.end());
    return *mid;
}

PixelGrid::PixelGrid(std::span<const Observation> obs, double cell_size)
    : obs_(obs), cell_(cell_size) {
    if (obs.empty()) return;
    double max_x = obs[0].pixel.x(), max_y = obs[0].pixel.y();
    min_x_ = max_x;
    min_y_ = max_y;
    for (const auto& o : obs) {
        min_x_ = std::min(min_x_, o.pixel.x());
        min_y_ = std::min(min_y_, o.pixel.y());
        max_x = std::max(max_x, o.pixel.x());
        max_y = std::max(max_y, o.pixel.y());
    }
    cols_ = static_cast<int>((max_x - min_x_) / cell_) + 1;
    rows_ = static_cast<int>((max_y - min_y_) / cell_) + 1;
    std::vector<int> cell_of(obs.size());
    start_.assign(static_cast<std::size_t>(cols_) * rows_ + 1, 0);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const int cx = static_cast<int>((obs[i].pixel.x() - min_x_) / cell_);
        const int cy = static_cast<int>((obs[i].pixel.y() - min_y_) / cell_);
        cell_of[i] = cy * cols_ + cx;
        ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(obs.size());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < obs.size(); ++i) items_[fill[cell_of[i]]++] = static_cast<int>(i);
}

void PixelGrid::query(const Vec2& p, double radius, std::vector<int>& out) const {
    out.clear();
    if (cols_ == 0) return;
    const int x0 = std::max(0, static_cast<int>(std::floor((p.x() - radius - min_x_) / cell_)));
    const int x1 = std::min(cols_ - 1, static_cast<int>(std::floor((p.x() + radius - min_x_) / cell_)));
    const int y0 = std::max(0, static_cast<int>(std::floor((p.y() - radius - min_y_) / cell_)));
    const int y1 = std::min(rows_ - 1, static_cast<int>(std::floor((p.y() + radius - min_y_) / cell_)));
    const double r2 = radius * radius;
    for (int cy = y0; cy <= y1; ++cy) {
        for (int cx = x0; cx <= x1; ++cx) {
            const int c = cy * cols_ + cx;
            for (int k = start_[c]; k < start_[c + 1]; ++k) {
                if ((obs_[items_[k]].pixel - p).squaredNorm() <= r2) out.push_back(items_[k]);
            }
        }
    }
}

}  // namespace aeromap
