#include "aeromap/pnp.hpp"
#include "aeromap/similarity.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace aeromap {

namespace {

// Coefficients in ascending powers.
using UPoly = std::vector<double>;

UPoly padd(const UPoly& a, const UPoly& b, double sb = 1.0) {
    UPoly r(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) r[i] += sb * b[i];
    return r;
}

UPoly pmul(const UPoly& a, const UPoly& b) {
    UPoly r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

double peval(const UPoly& p, double x) {
    double r = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) r = r * x + p[i];
    return r;
}

std::vector<double> real_roots(UPoly p) {
    double scale = 0.0;
    for (double c : p) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return {};
    while (p.size() > 1 && std::abs(p.back()) <= 1e-14 * scale) p.pop_back();
    const int deg = static_cast<int>(p.size()) - 1;
    if (deg < 1) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 0; i < deg; ++i) companion(0, i) = -p[deg - 1 - i] / p[deg];
    for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> eig(companion, false);
    UPoly dp(deg);
    for (int i = 1; i <= deg; ++i) dp[i - 1] = i * p[i];
    std::vector<double> roots;
    for (int i = 0; i < deg; ++i) {
        const auto z = eig.eigenvalues()(i);
        if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z.real()))) continue;
        double x = z.real();
        for (int k = 0; k < 3; ++k) {  // Newton polish
            const double d = peval(dp, x);
            if (d == 0.0) break;
            x -= peval(p, x) / d;
        }
        roots.push_back(x);
    }
    return roots;
}

}  // namespace

std::vector<SE3Pose> solve_p3p(const std::array<Vec3, 3>& bearings,
                               const std::array<Vec3, 3>& points) {
    const Vec3 f1 = bearings[0].normalized(), f2 = bearings[1].normalized(),
               f3 = bearings[2].normalized();
    const double a2 = (points[1] - points[2]).squaredNorm();
    const double b2 = (points[0] - points[2]).squaredNorm();
    const double c2 = (points[0] - points[1]).squaredNorm();
    if (a2 <= 0.0 || b2 <= 0.0 || c2 <= 0.0) return {};
    const double ca = f2.dot(f3), cb = f1.dot(f3), cg = f1.dot(f2);

    // Distances s2 = u s1, s3 = v s1. Two quadratics in u whose coefficients
    // are polynomials in v:
    //   p: b^2 u^2 - 2 b^2 cg u + b^2 - c^2 (1 + v^2 - 2 v cb) = 0
    //   q: b^2 u^2 - 2 b^2 ca v u + b^2 v^2 - a^2 (1 + v^2 - 2 v cb) = 0
    const UPoly p2 = {b2};
    const UPoly p1 = {-2.0 * b2 * cg};
    const UPoly p0 = {b2 - c2, 2.0 * c2 * cb, -c2};
    const UPoly q2 = {b2};
    const UPoly q1 = {0.0, -2.0 * b2 * ca};
    const UPoly q0 = {-a2, 2.0 * a2 * cb, b2 - a2};
    // Resultant with respect to u.
    const UPoly t1 = padd(pmul(p2, q0), pmul(p0, q2), -1.0);
    const UPoly t2 = padd(pmul(p2, q1), pmul(p1, q2), -1.0);
    const UPoly t3 = padd(pmul(p1, q0), pmul(p0, q1), -1.0);
    const UPoly res = padd(pmul(t1, t1), pmul(t2, t3), -1.0);

    std::vector<SE3Pose> poses;
    for (double v : real_roots(res)) {
        if (!(v > 0.0)) continue;
        const double denom = peval(p1, v) - peval(q1, v);
        if (std::abs(denom) < 1e-14) continue;
        const double u = (peval(q0, v) - peval(p0, v)) / denom;
        if (!(u > 0.0)) continue;
        const double k = 1.0 + u * u - 2.0 * u * cg;
        if (!(k > 0.0)) continue;
        const double s1 = std::sqrt(c2 / k);
        const Vec3 cam[3] = {s1 * f1, u * s1 * f2, v * s1 * f3};
        try {
            const Sim3Transform T = umeyama_alignment(points, cam, false);
            poses.push_back({T.rotation, T.translation});
        } catch (const DegenerateError&) {
        }
    }
    return poses;
}

double reprojection_error(const CameraIntrinsics& K, const SE3Pose& pose, const Vec3& X,
                          const Vec2& pixel) {
    const auto p = project(K, pose, X);
    if (!p) return std::numeric_limits<double>::infinity();
    return (*p - pixel).norm();
}

SE3Pose refine_pose(std::span<const Correspondence2D3D> corrs, const CameraIntrinsics& K,
                    const SE3Pose& initial, const std::vector<bool>& mask, int max_iterations) {
    const auto cost_of = [&](const SE3Pose& pose) {
        double cost = 0.0;
        for (std::size_t i = 0; i < corrs.size(); ++i) {
            if (!mask.empty() && !mask[i]) continue;
            const Vec3 xc = pose.apply(corrs[i].world_point);
            if (xc.z() <= 0.0) return std::numeric_limits<double>::infinity();
            const Vec2 r(K.focal * xc.x() / xc.z() + K.principal_point.x() - corrs[i].pixel.x(),
                         K.focal * xc.y() / xc.z() + K.principal_point.y() - corrs[i].pixel.y());
            cost += r.squaredNorm();
        }
        return cost;
    };

    SE3Pose pose = initial;
    double cost = cost_of(pose);
    double lambda = 1e-4;
    for (int iter = 0; iter < max_iterations && std::isfinite(cost) && cost > 1e-28; ++iter) {
        Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
        Vec6 g = Vec6::Zero();
        for (std::size_t i = 0; i < corrs.size(); ++i) {
            if (!mask.empty() && !mask[i]) continue;
            const Vec3 xc = pose.apply(corrs[i].world_point);
            const double iz = 1.0 / xc.z();
            const Vec2 r(K.focal * xc.x() * iz + K.principal_point.x() - corrs[i].pixel.x(),
                         K.focal * xc.y() * iz + K.principal_point.y() - corrs[i].pixel.y());
            Eigen::Matrix<double, 2, 3> Jp;
            Jp << K.focal * iz, 0.0, -K.focal * xc.x() * iz * iz,
                  0.0, K.focal * iz, -K.focal * xc.y() * iz * iz;
            Eigen::Matrix<double, 3, 6> Jx;
            Jx.leftCols<3>() = -skew(xc);
            Jx.rightCols<3>().setIdentity();
            const Eigen::Matrix<double, 2, 6> J = Jp * Jx;
            H += J.transpose() * J;
            g += J.transpose() * r;
        }
        bool improved = false;
        for (int attempt = 0; attempt < 10; ++attempt) {
            Eigen::Matrix<double, 6, 6> A = H;
            A.diagonal() += lambda * H.diagonal().cwiseMax(1e-12);
            const Vec6 dx = A.ldlt().solve(-g);
            if (!dx.allFinite()) break;
            const SE3Pose candidate = se3_exp(dx) * pose;
            const double new_cost = cost_of(candidate);
            if (new_cost < cost) {
                const double rel = (cost - new_cost) / cost;
                pose = candidate;
                cost = new_cost;
                lambda = std::max(lambda * 0.1, 1e-12);
                improved = true;
                if (rel < 1e-14) return pose;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
    return pose;
}

std::optional<PnpResult> pnp_ransac(std::span<const Correspondence2D3D> corrs,
                                    const CameraIntrinsics& K, const RansacConfig& cfg) {
    const int n = static_cast<int>(corrs.size());
    if (n < 4) throw PreconditionError("pnp_ransac: at least 4 correspondences required");

    std::vector<Vec3> bearings(n);
    for (int i = 0; i < n; ++i) bearings[i] = K.bearing(corrs[i].pixel);

    const auto count_inliers = [&](const SE3Pose& pose, std::vector<bool>* mask, double* err) {
        int count = 0;
        double total = 0.0;
        if (mask) mask->assign(n, false);
        for (int i = 0; i < n; ++i) {
            const double e = reprojection_error(K, pose, corrs[i].world_point, corrs[i].pixel);
            if (e < cfg.inlier_threshold) {
                ++count;
                total += e;
                if (mask) (*mask)[i] = true;
            }
        }
        if (err) *err = total;
        return count;
    };

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> scratch, sample;
    int best_count = 0;
    double best_error = 0.0;
    SE3Pose best;
    int max_iter = cfg.max_iterations;
    for (int it = 0; it < max_iter; ++it) {
        ransac_detail::draw_sample(rng, n, 4, scratch, sample);
        const std::array<Vec3, 3> f = {bearings[sample[0]], bearings[sample[1]], bearings[sample[2]]};
        const std::array<Vec3, 3> X = {corrs[sample[0]].world_point, corrs[sample[1]].world_point,
                                       corrs[sample[2]].world_point};
        const auto& fourth = corrs[sample[3]];
        double best_fourth = std::numeric_limits<double>::infinity();
        std::optional<SE3Pose> hypothesis;
        for (const SE3Pose& pose : solve_p3p(f, X)) {
            const double e = reprojection_error(K, pose, fourth.world_point, fourth.pixel);
            if (e < best_fourth) {
                best_fourth = e;
                hypothesis = pose;
            }
        }
        if (!hypothesis) continue;
        double err = 0.0;
        const int count = count_inliers(*hypothesis, nullptr, &err);
        if (count > best_count || (count == best_count && count > 0 && err < best_error)) {
            best_count = count;
            best_error = err;
            best = *hypothesis;
            max_iter = std::min(max_iter, ransac_detail::required_iterations(
                                              static_cast<double>(count) / n, 4, cfg.confidence,
                                              cfg.max_iterations));
        }
    }
    const int min_required = std::max(cfg.min_inliers, 4);
    if (best_count < min_required) return std::nullopt;

    PnpResult result;
    result.pose = best;
    count_inliers(best, &result.inliers, nullptr);
    for (int round = 0; round < 3; ++round) {
        const SE3Pose refined = refine_pose(corrs, K, result.pose, result.inliers);
        std::vector<bool> mask;
        const int count = count_inliers(refined, &mask, nullptr);
        if (count < min_required) break;
        result.pose = refined;
        const bool same = mask == result.inliers;
        result.inliers = std::move(mask);
        if (same) break;
    }
    result.num_inliers = static_cast<int>(std::count(result.inliers.begin(), result.inliers.end(), true));
    if (result.num_inliers < min_required) return std::nullopt;
    return result;
}

}  // namespace aeromap
