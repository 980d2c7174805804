#include "aeromap/similarity.hpp"

#include <Eigen/Dense>

namespace aeromap {

Sim3Transform umeyama_alignment(std::span<const Vec3> a, std::span<const Vec3> b, bool with_scale) {
    const std::size_t n = a.size();
    if (n != b.size()) throw PreconditionError("umeyama: point sets differ in size");
    if (n < 3) throw PreconditionError("umeyama: at least 3 correspondences required");

    Vec3 mean_a = Vec3::Zero(), mean_b = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);

    Mat3 cov = Mat3::Zero();
    double var_a = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 da = a[i] - mean_a;
        cov += (b[i] - mean_b) * da.transpose();
        var_a += da.squaredNorm();
    }
    cov /= static_cast<double>(n);
    var_a /= static_cast<double>(n);

    // Collinearity of the source set: its scatter matrix must have rank >= 2.
    Mat3 scatter = Mat3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 da = a[i] - mean_a;
        scatter += da * da.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> scatter_eig(scatter);
    const Vec3 ev = scatter_eig.eigenvalues();  // ascending
    if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
        throw DegenerateError("umeyama: source points are collinear or coincident");
    }

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 S = Mat3::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;

    Sim3Transform T;
    T.rotation = svd.matrixU() * S * svd.matrixV().transpose();
    T.scale = with_scale ? svd.singularValues().dot(S.diagonal()) / var_a : 1.0;
    T.translation = mean_b - T.scale * (T.rotation * mean_a);
    return T;
}

Sim3Transform umeyama_sim3(std::span<const Correspondence3D3D> corrs) {
    std::vector<Vec3> a, b;
    a.reserve(corrs.size());
    b.reserve(corrs.size());
    for (const auto& c : corrs) {
        a.push_back(c.point_a);
        b.push_back(c.point_b);
    }
    return umeyama_alignment(a, b, true);
}

namespace {

int mark_inliers(std::span<const Correspondence3D3D> corrs, const Sim3Transform& T, double threshold,
                 std::vector<bool>& mask, double* error = nullptr) {
    mask.assign(corrs.size(), false);
    int count = 0;
    double err = 0.0;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        const double d = (T.apply(corrs[i].point_a) - corrs[i].point_b).norm();
        if (d < threshold) {
            mask[i] = true;
            ++count;
            err += d;
        }
    }
    if (error) *error = err;
    return count;
}

std::optional<Sim3Transform> fit_subset(std::span<const Correspondence3D3D> corrs,
                                        const std::vector<bool>& mask) {
    std::vector<Vec3> a, b;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        if (!mask[i]) continue;
        a.push_back(corrs[i].point_a);
        b.push_back(corrs[i].point_b);
    }
    try {
        return umeyama_alignment(a, b, true);
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

std::optional<Sim3RansacResult> sim3_ransac(std::span<const Correspondence3D3D> corrs,
                                            const RansacConfig& cfg) {
    const int n = static_cast<int>(corrs.size());
    if (n < 3) throw PreconditionError("sim3_ransac: at least 3 correspondences required");

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> scratch, sample;
    std::vector<bool> mask;
    int best_count = 0;
    double best_error = 0.0;
    Sim3Transform best;
    int max_iter = cfg.max_iterations;
    for (int it = 0; it < max_iter; ++it) {
        ransac_detail::draw_sample(rng, n, 3, scratch, sample);
        const Vec3 a[3] = {corrs[sample[0]].point_a, corrs[sample[1]].point_a, corrs[sample[2]].point_a};
        const Vec3 b[3] = {corrs[sample[0]].point_b, corrs[sample[1]].point_b, corrs[sample[2]].point_b};
        Sim3Transform T;
        try {
            T = umeyama_alignment(a, b, true);
        } catch (const DegenerateError&) {
            continue;
        }
        double err = 0.0;
        const int count = mark_inliers(corrs, T, cfg.inlier_threshold, mask, &err);
        if (count > best_count || (count == best_count && count > 0 && err < best_error)) {
            best_count = count;
            best_error = err;
            best = T;
            max_iter = std::min(max_iter, ransac_detail::required_iterations(
                                              static_cast<double>(count) / n, 3, cfg.confidence,
                                              cfg.max_iterations));
        }
    }
    if (best_count < std::max(cfg.min_inliers, 3)) return std::nullopt;

    // Refit on the consensus set until the mask stops changing.
    Sim3RansacResult result;
    result.transform = best;
    mark_inliers(corrs, best, cfg.inlier_threshold, result.inliers);
    for (int round = 0; round < 5; ++round) {
        const auto refit = fit_subset(corrs, result.inliers);
        if (!refit) break;
        std::vector<bool> next;
        const int count = mark_inliers(corrs, *refit, cfg.inlier_threshold, next);
        if (count < std::max(cfg.min_inliers, 3)) break;
        result.transform = *refit;
        const bool same = next == result.inliers;
        result.inliers = std::move(next);
        if (same) break;
    }
    result.num_inliers = static_cast<int>(std::count(result.inliers.begin(), result.inliers.end(), true));
    if (result.num_inliers < std::max(cfg.min_inliers, 3)) return std::nullopt;
    return result;
}

}  // namespace aeromap
