#include "aeromap/camera.hpp"
#include "aeromap/triangulation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace aeromap {

bool CameraIntrinsics::contains(const Vec2& pixel, double margin) const {
    if (width <= 0 || height <= 0) return pixel.allFinite();
    return pixel.x() >= margin && pixel.y() >= margin && pixel.x() < width - margin &&
           pixel.y() < height - margin;
}

bool CameraIntrinsics::is_valid() const {
    if (!(focal > 0.0) || !principal_point.allFinite()) return false;
    if (width > 0 && height > 0) return contains(principal_point);
    return true;
}

Vec3 CameraIntrinsics::normalized(const Vec2& pixel) const {
    return {(pixel.x() - principal_point.x()) / focal, (pixel.y() - principal_point.y()) / focal,
            1.0};
}

std::optional<Vec2> project(const CameraIntrinsics& K, const SE3Pose& pose, const Vec3& X) {
    const Vec3 xc = pose.apply(X);
    if (xc.z() <= 0.0) return std::nullopt;
    return Vec2(K.focal * xc.x() / xc.z() + K.principal_point.x(),
                K.focal * xc.y() / xc.z() + K.principal_point.y());
}

SE3Pose look_at(const Vec3& center, const Vec3& target, const Vec3& up) {
    const Vec3 z = (target - center).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-9) x = z.cross(Vec3(0, 1, 0));
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 R;
    R.row(0) = x;
    R.row(1) = y;
    R.row(2) = z;
    return {R, -R * center};
}

double triangulation_angle(const SE3Pose& pose_a, const SE3Pose& pose_b, const Vec3& X) {
    const Vec3 ra = X - pose_a.center();
    const Vec3 rb = X - pose_b.center();
    const double na = ra.norm();
    const double nb = rb.norm();
    if (na <= 1e-12 || nb <= 1e-12) {
        throw PreconditionError("triangulation_angle: point coincides with a camera centre");
    }
    return rad_to_deg(std::atan2(ra.cross(rb).norm(), ra.dot(rb)));
}

namespace {

Eigen::Matrix<double, 3, 4> projection_matrix(const SE3Pose& pose) {
    Eigen::Matrix<double, 3, 4> P;
    P.leftCols<3>() = pose.rotation;
    P.col(3) = pose.translation;
    return P;
}

}  // namespace

Vec3 triangulate(const SE3Pose& pose_a, const CameraIntrinsics& K_a, const Vec2& pix_a,
                 const SE3Pose& pose_b, const CameraIntrinsics& K_b, const Vec2& pix_b,
                 double min_angle_deg) {
    const Vec3 na = K_a.normalized(pix_a);
    const Vec3 nb = K_b.normalized(pix_b);
    // World-frame ray directions.
    const Vec3 da = (pose_a.rotation.transpose() * na).normalized();
    const Vec3 db = (pose_b.rotation.transpose() * nb).normalized();
    const double ray_angle = rad_to_deg(std::acos(std::clamp(da.dot(db), -1.0, 1.0)));
    const double baseline = (pose_a.center() - pose_b.center()).norm();
    if (baseline <= 1e-12 || ray_angle < min_angle_deg) {
        throw DegenerateError("triangulate: viewing rays are nearly parallel");
    }

    const auto Pa = projection_matrix(pose_a);
    const auto Pb = projection_matrix(pose_b);
    Eigen::Matrix4d A;
    A.row(0) = na.x() * Pa.row(2) - Pa.row(0);
    A.row(1) = na.y() * Pa.row(2) - Pa.row(1);
    A.row(2) = nb.x() * Pb.row(2) - Pb.row(0);
    A.row(3) = nb.y() * Pb.row(2) - Pb.row(1);
    for (int r = 0; r < 4; ++r) A.row(r).normalize();
    Eigen::JacobiSVD<Eigen::Matrix4d> svd(A, Eigen::ComputeFullV);
    const Eigen::Vector4d h = svd.matrixV().col(3);
    if (std::abs(h(3)) < 1e-300) throw DegenerateError("triangulate: point at infinity");
    Vec3 X = h.head<3>() / h(3);

    // Gauss-Newton on normalized-plane residuals, weighted by focal to be in pixels.
    struct View {
        const SE3Pose* pose;
        Vec3 n;
        double f;
    };
    const View views[2] = {{&pose_a, na, K_a.focal}, {&pose_b, nb, K_b.focal}};
    for (int iter = 0; iter < 10; ++iter) {
        Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
        Vec3 g = Vec3::Zero();
        double cost = 0.0;
        bool ok = true;
        for (const View& v : views) {
            const Vec3 xc = v.pose->apply(X);
            if (xc.z() <= 0.0) {
                ok = false;
                break;
            }
            const double iz = 1.0 / xc.z();
            const Vec2 r(v.f * (xc.x() * iz - v.n.x()), v.f * (xc.y() * iz - v.n.y()));
            Eigen::Matrix<double, 2, 3> Jp;
            Jp << v.f * iz, 0.0, -v.f * xc.x() * iz * iz,
                  0.0, v.f * iz, -v.f * xc.y() * iz * iz;
            const Eigen::Matrix<double, 2, 3> J = Jp * v.pose->rotation;
            H += J.transpose() * J;
            g += J.transpose() * r;
            cost += r.squaredNorm();
        }
        if (!ok || cost < 1e-30) break;
        const Vec3 dx = H.ldlt().solve(-g);
        if (!dx.allFinite()) break;
        X += dx;
        if (dx.norm() <= 1e-14 * (1.0 + X.norm())) break;
    }
    return X;
}

}  // namespace aeromap
