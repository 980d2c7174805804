#pragma once

#include "aeromap/camera.hpp"

#include <vector>

namespace aeromap {

/// One keyframe: camera-from-world pose plus its own focal length.
struct BACamera {
    SE3Pose pose;
    double focal = 1.0;
    bool fixed = false;  ///< pose held constant (gauge anchor)
};

struct BAObservation {
    int camera = 0;
    int point = 0;
    Vec2 pixel = Vec2::Zero();
};

struct BAProblem {
    Vec2 principal_point = Vec2::Zero();
    std::vector<BACamera> cameras;
    AlignedVector<Vec3> points;
    std::vector<BAObservation> observations;

    /// Throws PreconditionError on dangling indices or a missing gauge anchor.
    void validate() const;
};

struct BAOptions {
    int max_iterations = 50;
    double function_tolerance = 1e-10;  ///< relative cost decrease to stop
    double huber_delta = 2.0;           ///< pixels
    bool estimate_focal = false;

    bool is_valid() const {
        return max_iterations > 0 && function_tolerance > 0.0 && huber_delta > 0.0;
    }
};

struct BAIteration {
    int iteration = 0;
    double cost = 0.0;
    double lambda = 0.0;
    bool accepted = false;
};

struct BASummary {
    double initial_cost = 0.0;
    double final_cost = 0.0;
    double initial_rms = 0.0;  ///< pixels, unweighted
    double final_rms = 0.0;
    int accepted_steps = 0;
    bool converged = false;
    std::vector<BAIteration> log;
};

/// Residual reported for a point behind the camera.
constexpr double kBehindCameraResidual = 1e3;

struct ReprojectionResidual {
    Vec2 residual = Vec2::Zero();
    bool in_front = true;
};

/// project(K, pose, X) - pixel with the camera's own focal length. Behind the
/// camera the residual is (kBehindCameraResidual, kBehindCameraResidual) and
/// in_front is false.
ReprojectionResidual reprojection_residual(const BACamera& camera, const Vec2& principal_point,
                                           const Vec3& X, const Vec2& pixel);

using Mat27 = Eigen::Matrix<double, 2, 7>;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Jacobians of the reprojection residual. Camera columns are
/// (omega, v, focal) for the left update pose <- exp(omega, v) * pose.
void reprojection_jacobians(const BACamera& camera, const Vec3& X, Mat27& J_camera,
                            Mat23& J_point);

/// Huber loss on a residual norm: r^2 inside delta, 2 delta |r| - delta^2 outside.
inline double huber_cost(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? a * a : 2.0 * delta * a - delta * delta;
}

/// Robust cost of the whole problem.
double ba_cost(const BAProblem& problem, double huber_delta);

/// Unweighted RMS reprojection error in pixels over observations in front of
/// their camera.
double ba_rms(const BAProblem& problem);

/// Levenberg-Marquardt on Huber-weighted reprojection residuals with the point
/// blocks eliminated by Schur complement; the reduced camera system is solved
/// densely. Refines problem in place. Fixed cameras are left bit-identical.
/// Throws Error when the damped system cannot be factorized.
BASummary solve_ba(BAProblem& problem, const BAOptions& opts);

}  // namespace aeromap
