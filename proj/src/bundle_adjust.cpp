#include "aeromap/bundle_adjust.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace aeromap {

void BAProblem::validate() const {
    const int nc = static_cast<int>(cameras.size());
    const int np = static_cast<int>(points.size());
    for (const auto& o : observations) {
        if (o.camera < 0 || o.camera >= nc || o.point < 0 || o.point >= np) {
            throw PreconditionError("BAProblem: observation references a missing block");
        }
    }
    if (nc > 0 && std::none_of(cameras.begin(), cameras.end(), [](const BACamera& c) { return c.fixed; })) {
        throw PreconditionError("BAProblem: no fixed camera to anchor the gauge");
    }
}

ReprojectionResidual reprojection_residual(const BACamera& camera, const Vec2& principal_point,
                                           const Vec3& X, const Vec2& pixel) {
    const Vec3 xc = camera.pose.apply(X);
    if (xc.z() <= 0.0) return {Vec2::Constant(kBehindCameraResidual), false};
    return {Vec2(camera.focal * xc.x() / xc.z() + principal_point.x() - pixel.x(),
                 camera.focal * xc.y() / xc.z() + principal_point.y() - pixel.y()),
            true};
}

void reprojection_jacobians(const BACamera& camera, const Vec3& X, Mat27& J_camera, Mat23& J_point) {
    const Vec3 xc = camera.pose.apply(X);
    const double iz = 1.0 / xc.z();
    const double f = camera.focal;
    Mat23 Jp;
    Jp << f * iz, 0.0, -f * xc.x() * iz * iz,
          0.0, f * iz, -f * xc.y() * iz * iz;
    J_camera.leftCols<3>() = -Jp * skew(xc);
    J_camera.middleCols<3>(3) = Jp;
    J_camera.col(6) = Vec2(xc.x() * iz, xc.y() * iz);
    J_point = Jp * camera.pose.rotation;
}

namespace {

double robust_cost(const std::vector<BACamera>& cameras, const AlignedVector<Vec3>& points,
                   const std::vector<BAObservation>& observations, const Vec2& pp, double delta) {
    double cost = 0.0;
    for (const auto& o : observations) {
        const auto r = reprojection_residual(cameras[o.camera], pp, points[o.point], o.pixel);
        cost += huber_cost(r.residual.norm(), delta);
    }
    return cost;
}

}  // namespace

double ba_cost(const BAProblem& problem, double huber_delta) {
    return robust_cost(problem.cameras, problem.points, problem.observations, problem.principal_point,
                       huber_delta);
}

double ba_rms(const BAProblem& problem) {
    double sum = 0.0;
    int n = 0;
    for (const auto& o : problem.observations) {
        const auto r = reprojection_residual(problem.cameras[o.camera], problem.principal_point,
                                             problem.points[o.point], o.pixel);
        if (!r.in_front) continue;
        sum += r.residual.squaredNorm();
        ++n;
    }
    return n > 0 ? std::sqrt(sum / n) : 0.0;
}

namespace {

using Mat7 = Eigen::Matrix<double, 7, 7>;
using Vec7d = Eigen::Matrix<double, 7, 1>;
using Mat73 = Eigen::Matrix<double, 7, 3>;

struct Linearization {
    std::vector<Mat7, Eigen::aligned_allocator<Mat7>> U;
    std::vector<Vec7d, Eigen::aligned_allocator<Vec7d>> gc;
    AlignedVector<Mat3> V;
    AlignedVector<Vec3> gp;
    std::vector<Mat73, Eigen::aligned_allocator<Mat73>> W;  // per observation
};

}  // namespace

BASummary solve_ba(BAProblem& problem, const BAOptions& opts) {
    if (!opts.is_valid()) throw PreconditionError("solve_ba: invalid options");
    problem.validate();

    const int nc = static_cast<int>(problem.cameras.size());
    const int np = static_cast<int>(problem.points.size());
    const int no = static_cast<int>(problem.observations.size());
    const double delta = opts.huber_delta;

    // Observations grouped by point.
    std::vector<int> point_start(np + 1, 0), point_obs(no);
    for (const auto& o : problem.observations) ++point_start[o.point + 1];
    for (int p = 0; p < np; ++p) point_start[p + 1] += point_start[p];
    {
        std::vector<int> fill(point_start.begin(), point_start.end() - 1);
        for (int i = 0; i < no; ++i) point_obs[fill[problem.observations[i].point]++] = i;
    }

    // Free-parameter mask per camera.
    std::vector<Eigen::Matrix<double, 7, 1>> free(nc);
    for (int c = 0; c < nc; ++c) {
        free[c].setOnes();
        if (problem.cameras[c].fixed) free[c].head<6>().setZero();
        if (!opts.estimate_focal) free[c](6) = 0.0;
    }

    BASummary summary;
    double cost = ba_cost(problem, delta);
    summary.initial_cost = cost;
    summary.initial_rms = ba_rms(problem);
    summary.log.push_back({0, cost, 0.0, true});

    const double floor = 1e-20 * std::max(1, no);
    if (cost <= floor || nc == 0) {
        summary.final_cost = cost;
        summary.final_rms = summary.initial_rms;
        summary.converged = true;
        return summary;
    }

    Linearization lin;
    lin.U.resize(nc);
    lin.gc.resize(nc);
    lin.V.resize(np);
    lin.gp.resize(np);
    lin.W.resize(no);

    double lambda = 1e-4;
    const int dim = 7 * nc;
    Eigen::MatrixXd S(dim, dim);
    Eigen::VectorXd b(dim);
    AlignedVector<Vec3> new_points(np);
    std::vector<BACamera> new_cameras(nc);

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        // Linearize.
        for (int c = 0; c < nc; ++c) {
            lin.U[c].setZero();
            lin.gc[c].setZero();
        }
        for (int p = 0; p < np; ++p) {
            lin.V[p].setZero();
            lin.gp[p].setZero();
        }
        for (int i = 0; i < no; ++i) {
            const auto& o = problem.observations[i];
            const BACamera& cam = problem.cameras[o.camera];
            const auto r = reprojection_residual(cam, problem.principal_point, problem.points[o.point], o.pixel);
            if (!r.in_front) {
                lin.W[i].setZero();
                continue;
            }
            Mat27 Jc;
            Mat23 Jx;
            reprojection_jacobians(cam, problem.points[o.point], Jc, Jx);
            Jc = Jc * free[o.camera].asDiagonal();
            const double n = r.residual.norm();
            const double w = n <= delta ? 1.0 : delta / n;
            lin.U[o.camera] += w * Jc.transpose() * Jc;
            lin.gc[o.camera] += w * Jc.transpose() * r.residual;
            lin.V[o.point] += w * Jx.transpose() * Jx;
            lin.gp[o.point] += w * Jx.transpose() * r.residual;
            lin.W[i] = w * Jc.transpose() * Jx;
        }

        bool accepted = false;
        bool stop = false;
        while (!accepted) {
            // Damped reduced camera system.
            S.setZero();
            b.setZero();
            for (int c = 0; c < nc; ++c) {
                Mat7 Ua = lin.U[c];
                for (int k = 0; k < 7; ++k) {
                    if (free[c](k) == 0.0) {
                        Ua.row(k).setZero();
                        Ua.col(k).setZero();
                        Ua(k, k) = 1.0;
                    } else {
                        Ua(k, k) += lambda * std::max(lin.U[c](k, k), 1e-9);
                    }
                }
                S.block<7, 7>(7 * c, 7 * c) = Ua;
                b.segment<7>(7 * c) = -lin.gc[c];
            }
            AlignedVector<Mat3> Vinv(np);
            for (int p = 0; p < np; ++p) {
                Mat3 Va = lin.V[p];
                for (int k = 0; k < 3; ++k) Va(k, k) += lambda * std::max(lin.V[p](k, k), 1e-9);
                Vinv[p] = Va.inverse();
                const Vec3 vg = Vinv[p] * lin.gp[p];
                for (int a = point_start[p]; a < point_start[p + 1]; ++a) {
                    const int ia = point_obs[a];
                    const int ca = problem.observations[ia].camera;
                    const Mat73 Y = lin.W[ia] * Vinv[p];
                    b.segment<7>(7 * ca) += lin.W[ia] * vg;
                    for (int bb = point_start[p]; bb < point_start[p + 1]; ++bb) {
                        const int ib = point_obs[bb];
                        const int cb = problem.observations[ib].camera;
                        S.block<7, 7>(7 * ca, 7 * cb).noalias() -= Y * lin.W[ib].transpose();
                    }
                }
            }
            for (int c = 0; c < nc; ++c) {
                for (int k = 0; k < 7; ++k) {
                    if (free[c](k) == 0.0) b(7 * c + k) = 0.0;
                }
            }

            Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
            Eigen::VectorXd dc;
            bool solved = ldlt.info() == Eigen::Success;
            if (solved) {
                dc = ldlt.solve(b);
                solved = dc.allFinite();
            }
            if (!solved) {
                lambda *= 10.0;
                if (lambda > 1e16) throw Error("solve_ba: reduced camera system cannot be factorized");
                continue;
            }

            for (int c = 0; c < nc; ++c) {
                new_cameras[c] = problem.cameras[c];
                const Vec7d d = dc.segment<7>(7 * c).cwiseProduct(free[c]);
                if (!problem.cameras[c].fixed) {
                    new_cameras[c].pose = se3_exp(d.head<6>()) * problem.cameras[c].pose;
                }
                new_cameras[c].focal += d(6);
            }
            for (int p = 0; p < np; ++p) {
                Vec3 rhs = -lin.gp[p];
                for (int a = point_start[p]; a < point_start[p + 1]; ++a) {
                    const int ia = point_obs[a];
                    rhs -= lin.W[ia].transpose() * dc.segment<7>(7 * problem.observations[ia].camera);
                }
                new_points[p] = problem.points[p] + Vinv[p] * rhs;
            }

            const double new_cost = robust_cost(new_cameras, new_points, problem.observations,
                                                problem.principal_point, delta);
            const bool better = std::isfinite(new_cost) && new_cost < cost;
            summary.log.push_back({iter, better ? new_cost : cost, lambda, better});
            if (better) {
                const double rel = (cost - new_cost) / cost;
                problem.cameras = new_cameras;
                problem.points = new_points;
                cost = new_cost;
                ++summary.accepted_steps;
                lambda = std::max(lambda / 3.0, 1e-9);
                accepted = true;
                if (rel < opts.function_tolerance || cost <= floor) stop = true;
            } else {
                lambda *= 10.0;
                if (lambda > 1e12) {
                    stop = true;
                    break;
                }
            }
        }
        if (stop) {
            summary.converged = true;
            break;
        }
    }
    summary.final_cost = cost;
    summary.final_rms = ba_rms(problem);
    return summary;
}

}  // namespace aeromap
