#include "aeromap/lie.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace aeromap {

namespace {

constexpr double kSmallAngle = 1e-6;
constexpr double kSmallScale = 1e-8;
// Below this |mu| the scale-only coefficient integrals use a series to avoid
// cancellation in (e^mu (mu - 1) + 1) / mu^2 and friends.
constexpr double kSeriesScale = 1e-3;

// Coefficients of V = a I + b W + c W^2 with W = [omega]x, where
// V = integral_0^1 e^{mu tau} exp(tau W) d tau.
struct VCoefficients {
    double a, b, c;
};

VCoefficients v_coefficients(double theta, double mu) {
    VCoefficients k{};
    k.a = std::abs(mu) < kSmallScale ? 1.0 + 0.5 * mu : std::expm1(mu) / mu;

    if (theta < kSmallAngle) {
        // sin(theta tau)/theta -> tau, (1 - cos(theta tau))/theta^2 -> tau^2 / 2
        if (std::abs(mu) < kSeriesScale) {
            const double m2 = mu * mu;
            k.b = 0.5 + mu / 3.0 + m2 / 8.0 + m2 * mu / 30.0 + m2 * m2 / 144.0;
            k.c = 1.0 / 6.0 + mu / 8.0 + m2 / 20.0 + m2 * mu / 72.0 + m2 * m2 / 336.0;
        } else {
            const double e = std::exp(mu);
            k.b = (e * (mu - 1.0) + 1.0) / (mu * mu);
            k.c = (e * (mu * mu - 2.0 * mu + 2.0) - 2.0) / (2.0 * mu * mu * mu);
        }
        return k;
    }

    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t2 = theta * theta;
    // Valid for mu == 0 as well: reduces to the SE(3) coefficients.
    const double e = std::exp(mu);
    const double denom = mu * mu + t2;
    const double int_sin = (e * (mu * s - theta * c) + theta) / denom;
    const double int_cos = (e * (mu * c + theta * s) - mu) / denom;
    k.b = int_sin / theta;
    k.c = (k.a - int_cos) / t2;
    return k;
}

Mat3 v_matrix(const Vec3& omega, double mu) {
    const double theta = omega.norm();
    const VCoefficients k = v_coefficients(theta, mu);
    const Mat3 W = skew(omega);
    return k.a * Mat3::Identity() + k.b * W + k.c * W * W;
}

}  // namespace

SE3Pose SE3Pose::inverse() const {
    SE3Pose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

SE3Pose SE3Pose::operator*(const SE3Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

bool SE3Pose::is_valid(double tol) const {
    const Mat3 e = rotation.transpose() * rotation - Mat3::Identity();
    return e.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol &&
           translation.allFinite();
}

Sim3Tangent Sim3Tangent::from_vector(const Vec7& v) {
    return {v.segment<3>(0), v.segment<3>(3), v(6)};
}

Vec7 Sim3Tangent::to_vector() const {
    Vec7 v;
    v << omega, sigma, mu;
    return v;
}

Sim3Transform Sim3Transform::inverse() const {
    Sim3Transform inv;
    inv.rotation = rotation.transpose();
    inv.scale = 1.0 / scale;
    inv.translation = -inv.scale * (inv.rotation * translation);
    return inv;
}

Sim3Transform Sim3Transform::operator*(const Sim3Transform& rhs) const {
    return {rotation * rhs.rotation, scale * rhs.scale,
            scale * (rotation * rhs.translation) + translation};
}

Mat4 Sim3Transform::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = scale * rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

bool Sim3Transform::is_valid(double tol) const {
    return SE3Pose{rotation, translation}.is_valid(tol) && scale > 0.0 && std::isfinite(scale);
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

Mat3 so3_exp(const Vec3& omega) {
    const double theta = omega.norm();
    const Mat3 W = skew(omega);
    if (theta < kSmallAngle) {
        return Mat3::Identity() + W + 0.5 * W * W;
    }
    return Mat3::Identity() + (std::sin(theta) / theta) * W +
           ((1.0 - std::cos(theta)) / (theta * theta)) * W * W;
}

Vec3 so3_log(const Mat3& R) {
    const Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    const double sin_theta = 0.5 * vee.norm();
    const double cos_theta = 0.5 * (R.trace() - 1.0);
    const double theta = std::atan2(sin_theta, cos_theta);
    if (kPi - theta < 1e-6) {
        throw DegenerateError("so3_log: rotation angle at pi, axis is ambiguous");
    }
    if (theta < kSmallAngle) {
        // theta / (2 sin theta) -> 1/2 + theta^2 / 12
        return (0.5 + theta * theta / 12.0) * vee;
    }
    return (theta / (2.0 * sin_theta)) * vee;
}

Sim3Transform sim3_exp(const Sim3Tangent& v) {
    Sim3Transform G;
    G.rotation = so3_exp(v.omega);
    G.scale = std::exp(v.mu);
    G.translation = v_matrix(v.omega, v.mu) * v.sigma;
    return G;
}

Sim3Tangent sim3_log(const Sim3Transform& G) {
    Sim3Tangent v;
    v.omega = so3_log(G.rotation);
    v.mu = std::log(G.scale);
    v.sigma = v_matrix(v.omega, v.mu).partialPivLu().solve(G.translation);
    return v;
}

Sim3Transform sim3_compose(const Sim3Transform& A, const Sim3Transform& B) { return B * A; }

Sim3Transform sim3_inverse(const Sim3Transform& G) { return G.inverse(); }

Vec3 sim3_apply(const Sim3Transform& G, const Vec3& x) { return G.apply(x); }

SE3Pose se3_exp(const Vec6& xi) {
    const Sim3Transform G = sim3_exp({xi.head<3>(), xi.tail<3>(), 0.0});
    return {G.rotation, G.translation};
}

Sim3State sim3_manifold_update(const Sim3State& state, const Sim3Tangent& v_up) {
    const Sim3Transform G_up = sim3_exp(v_up);
    Sim3State out;
    out.algebra = sim3_log(G_up * sim3_exp(state.algebra));
    out.group = G_up * state.group;
    return out;
}

AlignmentResidual alignment_residual_and_jacobians(const Sim3Transform& G, const Vec3& x,
                                                   const Vec3& X) {
    AlignmentResidual r;
    const Vec3 y = G.apply(x);
    r.residual = y - X;
    r.J_pose.block<3, 3>(0, 0) = -skew(y);
    r.J_pose.block<3, 3>(0, 3).setIdentity();
    r.J_pose.col(6) = y;
    r.J_landmark = -Mat3::Identity();
    return r;
}

double rotation_angle_between(const Mat3& A, const Mat3& B) {
    const Mat3 D = A * B.transpose();
    const Vec3 vee(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1));
    return std::atan2(0.5 * vee.norm(), 0.5 * (D.trace() - 1.0));
}

}  // namespace aeromap
