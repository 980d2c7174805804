#include "aeromap/outlier_filter.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

namespace aeromap {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BPoint, std::size_t>;

}  // namespace

std::vector<double> knn_mean_distances(std::span<const Vec3> points, int k) {
    if (k < 1 || points.size() <= static_cast<std::size_t>(k)) {
        throw PreconditionError("knn_mean_distances: need more than k points");
    }
    std::vector<Entry> entries;
    entries.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        entries.emplace_back(BPoint(points[i].x(), points[i].y(), points[i].z()), i);
    }
    const bgi::rtree<Entry, bgi::quadratic<16>> tree(entries.begin(), entries.end());

    std::vector<double> means(points.size());
    std::vector<Entry> hits;
    std::vector<double> d;
    for (std::size_t i = 0; i < points.size(); ++i) {
        hits.clear();
        tree.query(bgi::nearest(entries[i].first, static_cast<unsigned>(k + 1)), std::back_inserter(hits));
        d.clear();
        bool skipped_self = false;
        for (const Entry& h : hits) {
            if (!skipped_self && h.second == i) {
                skipped_self = true;
                continue;
            }
            const Vec3& q = points[h.second];
            d.push_back((q - points[i]).norm());
        }
        std::sort(d.begin(), d.end());
        d.resize(k);  // drops the farthest when self was not among the hits (duplicates)
        means[i] = std::accumulate(d.begin(), d.end(), 0.0) / k;
    }
    return means;
}

std::vector<bool> knn_outlier_mask(std::span<const Vec3> points, int k, double sigma_multiplier) {
    std::vector<bool> mask(points.size(), false);
    if (points.size() <= static_cast<std::size_t>(k)) return mask;
    const std::vector<double> m = knn_mean_distances(points, k);
    const double n = static_cast<double>(m.size());
    const double mean = std::accumulate(m.begin(), m.end(), 0.0) / n;
    double var = 0.0;
    for (double v : m) var += (v - mean) * (v - mean);
    const double limit = mean + sigma_multiplier * std::sqrt(var / n);
    for (std::size_t i = 0; i < m.size(); ++i) mask[i] = m[i] > limit;
    return mask;
}

}  // namespace aeromap
