#pragma once

// Sim(3) / SE(3) group and algebra operations.
//
// Conventions used throughout the library:
//  * A Sim3Transform G = (R, s, t) acts on points as G(x) = s R x + t.
//  * operator* is the ordinary group (matrix) product: (A * B)(x) = A(B(x)).
//  * sim3_compose(A, B) means "A applied first": compose(A, B)(x) = B(A(x)),
//    i.e. compose(A, B) == B * A. Residual chaining in the pose graph reads
//    left to right with this convention.
//  * Tangent vectors are ordered (omega, sigma, mu): rotation, translation, log-scale.
//  * All state updates are left-multiplicative: G <- exp(v_up) * G.

#include "aeromap/common.hpp"

#include <Eigen/Core>

namespace aeromap {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat37 = Eigen::Matrix<double, 3, 7>;

/// Rigid transform x -> R x + t. Camera poses are camera-from-world.
struct SE3Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static SE3Pose identity() { return {}; }

    Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
    SE3Pose inverse() const;
    /// For a camera-from-world pose, the camera centre in world coordinates.
    Vec3 center() const { return -rotation.transpose() * translation; }
    SE3Pose operator*(const SE3Pose& rhs) const;
    bool is_valid(double tol = 1e-9) const;
};

struct Sim3Tangent {
    Vec3 omega = Vec3::Zero();
    Vec3 sigma = Vec3::Zero();
    double mu = 0.0;

    static Sim3Tangent from_vector(const Vec7& v);
    Vec7 to_vector() const;
};

struct Sim3Transform {
    Mat3 rotation = Mat3::Identity();
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();

    static Sim3Transform identity() { return {}; }
    static Sim3Transform from_se3(const SE3Pose& p) { return {p.rotation, 1.0, p.translation}; }

    Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
    Sim3Transform inverse() const;
    Sim3Transform operator*(const Sim3Transform& rhs) const;
    /// 4x4 homogeneous form [sR t; 0 1].
    Mat4 matrix() const;
    bool is_valid(double tol = 1e-9) const;
};

/// Cross-product matrix: skew(v) * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Rodrigues exponential on SO(3).
Mat3 so3_exp(const Vec3& omega);
/// Rotation vector with angle in [0, pi). Throws DegenerateError within 1e-6 of pi.
Vec3 so3_log(const Mat3& R);

Sim3Transform sim3_exp(const Sim3Tangent& v);
/// Canonical logarithm. Throws DegenerateError when the rotation angle is at pi.
Sim3Tangent sim3_log(const Sim3Transform& G);
/// compose(A, B) applies A first: result == B * A.
Sim3Transform sim3_compose(const Sim3Transform& A, const Sim3Transform& B);
Sim3Transform sim3_inverse(const Sim3Transform& G);
Vec3 sim3_apply(const Sim3Transform& G, const Vec3& x);

/// SE(3) exponential of (omega, v); the mu = 0 slice of sim3_exp.
SE3Pose se3_exp(const Vec6& xi);

/// Per-vertex optimizer state: the group element and its algebra coordinates.
struct Sim3State {
    Sim3Transform group;
    Sim3Tangent algebra;

    static Sim3State from_group(const Sim3Transform& G) { return {G, sim3_log(G)}; }
};

/// Left-multiplicative update:
///   G_up = exp(v_up);  v <- log(G_up * exp(v));  G <- G_up * G.
Sim3State sim3_manifold_update(const Sim3State& state, const Sim3Tangent& v_up);

struct AlignmentResidual {
    Vec3 residual;      ///< s R x + t - X
    Mat37 J_pose;       ///< columns (omega, sigma, mu) for a left update of G
    Mat3 J_landmark;    ///< d residual / d X == -I
};

/// Residual of one observation edge and its Jacobians. With y = s R x + t the
/// pose blocks are d/domega = -[y]x, d/dsigma = I, d/dmu = y.
AlignmentResidual alignment_residual_and_jacobians(const Sim3Transform& G, const Vec3& x,
                                                   const Vec3& X);

/// Geodesic angle between two rotations, radians.
double rotation_angle_between(const Mat3& A, const Mat3& B);

}  // namespace aeromap
