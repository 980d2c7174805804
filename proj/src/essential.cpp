#include "aeromap/essential.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>

namespace aeromap {

namespace {

// Polynomials of total degree <= 3 in (x, y, z). The ten cubic monomials come
// first; the remaining ten form the quotient basis used by the action matrix:
//   x^2, xy, xz, y^2, yz, z^2, x, y, z, 1.
constexpr int kMonomials = 20;
constexpr int kExponents[kMonomials][3] = {
    {3, 0, 0}, {2, 1, 0}, {2, 0, 1}, {1, 2, 0}, {1, 1, 1}, {1, 0, 2}, {0, 3, 0},
    {0, 2, 1}, {0, 1, 2}, {0, 0, 3}, {2, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 2, 0},
    {0, 1, 1}, {0, 0, 2}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, 0}};

struct MonomialIndex {
    int table[4][4][4];
    MonomialIndex() {
        for (auto& a : table)
            for (auto& b : a)
                for (int& c : b) c = -1;
        for (int m = 0; m < kMonomials; ++m) {
            table[kExponents[m][0]][kExponents[m][1]][kExponents[m][2]] = m;
        }
    }
    int operator()(int i, int j, int k) const { return table[i][j][k]; }
};

const MonomialIndex& monomial_index() {
    static const MonomialIndex idx;
    return idx;
}

struct Poly {
    std::array<double, kMonomials> c{};

    Poly operator+(const Poly& o) const {
        Poly r;
        for (int i = 0; i < kMonomials; ++i) r.c[i] = c[i] + o.c[i];
        return r;
    }
    Poly operator-(const Poly& o) const {
        Poly r;
        for (int i = 0; i < kMonomials; ++i) r.c[i] = c[i] - o.c[i];
        return r;
    }
    Poly operator*(double s) const {
        Poly r;
        for (int i = 0; i < kMonomials; ++i) r.c[i] = c[i] * s;
        return r;
    }
    Poly operator*(const Poly& o) const {
        const MonomialIndex& idx = monomial_index();
        Poly r;
        for (int a = 0; a < kMonomials; ++a) {
            if (c[a] == 0.0) continue;
            for (int b = 0; b < kMonomials; ++b) {
                if (o.c[b] == 0.0) continue;
                const int i = kExponents[a][0] + kExponents[b][0];
                const int j = kExponents[a][1] + kExponents[b][1];
                const int k = kExponents[a][2] + kExponents[b][2];
                if (i + j + k > 3) {
                    throw Error("five-point: polynomial degree overflow");
                }
                r.c[idx(i, j, k)] += c[a] * o.c[b];
            }
        }
        return r;
    }
};

using PolyMat = std::array<std::array<Poly, 3>, 3>;

PolyMat mul(const PolyMat& A, const PolyMat& B) {
    PolyMat C;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            Poly s;
            for (int k = 0; k < 3; ++k) s = s + A[r][k] * B[k][c];
            C[r][c] = s;
        }
    return C;
}

PolyMat transpose(const PolyMat& A) {
    PolyMat T;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) T[r][c] = A[c][r];
    return T;
}

int count_in_front(const Mat3& R, const Vec3& t, std::span<const Vec3> q1, std::span<const Vec3> q2) {
    int n = 0;
    for (std::size_t i = 0; i < q1.size(); ++i) {
        // d2 q2 = d1 R q1 + t  ->  [R q1, -q2] [d1; d2] = -t
        Eigen::Matrix<double, 3, 2> A;
        A.col(0) = R * q1[i];
        A.col(1) = -q2[i];
        const Eigen::Vector2d d = (A.transpose() * A).ldlt().solve(A.transpose() * (-t));
        if (d(0) > 0.0 && d(1) > 0.0) ++n;
    }
    return n;
}

}  // namespace

std::vector<Mat3> solve_essential_five_point(const std::array<Vec3, 5>& q1,
                                             const std::array<Vec3, 5>& q2) {
    Eigen::Matrix<double, 5, 9> A;
    for (int i = 0; i < 5; ++i) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) A(i, 3 * r + c) = q2[i](r) * q1[i](c);
    }
    Eigen::JacobiSVD<Eigen::Matrix<double, 5, 9>> svd(A, Eigen::ComputeFullV);
    const Eigen::Matrix<double, 9, 9>& V = svd.matrixV();
    // E = x X + y Y + z Z + W over the four null-space vectors.
    const Eigen::Matrix<double, 9, 1> basis[4] = {V.col(5), V.col(6), V.col(7), V.col(8)};

    const MonomialIndex& idx = monomial_index();
    const int var_index[3] = {idx(1, 0, 0), idx(0, 1, 0), idx(0, 0, 1)};
    const int one_index = idx(0, 0, 0);
    PolyMat E;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            Poly p;
            for (int v = 0; v < 3; ++v) p.c[var_index[v]] = basis[v](3 * r + c);
            p.c[one_index] = basis[3](3 * r + c);
            E[r][c] = p;
        }

    Eigen::Matrix<double, 10, kMonomials> M;
    const Poly det = E[0][0] * (E[1][1] * E[2][2] - E[1][2] * E[2][1]) -
                     E[0][1] * (E[1][0] * E[2][2] - E[1][2] * E[2][0]) +
                     E[0][2] * (E[1][0] * E[2][1] - E[1][1] * E[2][0]);
    for (int m = 0; m < kMonomials; ++m) M(0, m) = det.c[m];

    const PolyMat EEt = mul(E, transpose(E));
    const Poly trace = EEt[0][0] + EEt[1][1] + EEt[2][2];
    const PolyMat EEtE = mul(EEt, E);
    int row = 1;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c, ++row) {
            const Poly p = EEtE[r][c] * 2.0 - trace * E[r][c];
            for (int m = 0; m < kMonomials; ++m) M(row, m) = p.c[m];
        }

    // Express every cubic monomial in the quotient basis.
    const Eigen::Matrix<double, 10, 10> C = M.leftCols<10>();
    const Eigen::Matrix<double, 10, 10> D = M.rightCols<10>();
    Eigen::FullPivLU<Eigen::Matrix<double, 10, 10>> lu(C);
    if (!lu.isInvertible()) return {};
    const Eigen::Matrix<double, 10, 10> G = lu.solve(D);

    // Action matrix of multiplication by x on basis (x^2, xy, xz, y^2, yz, z^2, x, y, z, 1).
    Eigen::Matrix<double, 10, 10> action = Eigen::Matrix<double, 10, 10>::Zero();
    for (int k = 0; k < 6; ++k) action.row(k) = -G.row(k);  // x^3, x^2y, x^2z, xy^2, xyz, xz^2
    action(6, 0) = 1.0;  // x * x = x^2
    action(7, 1) = 1.0;  // x * y = xy
    action(8, 2) = 1.0;  // x * z = xz
    action(9, 6) = 1.0;  // x * 1 = x

    Eigen::EigenSolver<Eigen::Matrix<double, 10, 10>> eig(action);
    if (eig.info() != Eigen::Success) return {};
    std::vector<Mat3> solutions;
    for (int s = 0; s < 10; ++s) {
        const std::complex<double> lambda = eig.eigenvalues()(s);
        if (std::abs(lambda.imag()) > 1e-6 * (1.0 + std::abs(lambda.real()))) continue;
        const Eigen::Matrix<std::complex<double>, 10, 1> v = eig.eigenvectors().col(s);
        if (std::abs(v(9)) < 1e-12) continue;
        const double x = (v(6) / v(9)).real();
        const double y = (v(7) / v(9)).real();
        const double z = (v(8) / v(9)).real();
        const Eigen::Matrix<double, 9, 1> e = x * basis[0] + y * basis[1] + z * basis[2] + basis[3];
        Mat3 Es;
        Es << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
        const double n = Es.norm();
        if (!(n > 0.0) || !Es.allFinite()) continue;
        solutions.push_back(Es / n);
    }
    return solutions;
}

double symmetric_epipolar_distance(const Mat3& E, const Vec3& q1, const Vec3& q2) {
    const Vec3 l2 = E * q1;
    const Vec3 l1 = E.transpose() * q2;
    const double e = q2.dot(l2);
    const double n2 = l2.head<2>().squaredNorm();
    const double n1 = l1.head<2>().squaredNorm();
    if (n1 <= 0.0 || n2 <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(0.5 * (e * e / n1 + e * e / n2));
}

SE3Pose decompose_essential(const Mat3& E, std::span<const Vec3> q1, std::span<const Vec3> q2,
                            int* num_in_front) {
    Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU();
    Mat3 V = svd.matrixV();
    if (U.determinant() < 0.0) U = -U;
    if (V.determinant() < 0.0) V = -V;
    Mat3 W;
    W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Mat3 Ra = U * W * V.transpose();
    const Mat3 Rb = U * W.transpose() * V.transpose();
    const Vec3 t = U.col(2).normalized();
    const std::array<SE3Pose, 4> candidates = {SE3Pose{Ra, t}, SE3Pose{Ra, -t}, SE3Pose{Rb, t},
                                               SE3Pose{Rb, -t}};
    int best = -1;
    SE3Pose best_pose;
    for (const SE3Pose& c : candidates) {
        const int n = count_in_front(c.rotation, c.translation, q1, q2);
        if (n > best) {
            best = n;
            best_pose = c;
        }
    }
    if (num_in_front) *num_in_front = best;
    return best_pose;
}

std::optional<RelativePoseResult> estimate_relative_pose(std::span<const PixelMatch> matches,
                                                         const CameraIntrinsics& K,
                                                         const RansacConfig& cfg) {
    const int n = static_cast<int>(matches.size());
    if (n < 5) throw PreconditionError("estimate_relative_pose: at least 5 matches required");
    std::vector<Vec3> q1(n), q2(n);
    for (int i = 0; i < n; ++i) {
        q1[i] = K.normalized(matches[i].first);
        q2[i] = K.normalized(matches[i].second);
    }
    const double threshold = cfg.inlier_threshold / K.focal;

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> scratch, sample;
    int best_count = -1;
    double best_error = 0.0;
    Mat3 best_E = Mat3::Zero();
    int max_iter = cfg.max_iterations;
    for (int it = 0; it < max_iter; ++it) {
        ransac_detail::draw_sample(rng, n, 5, scratch, sample);
        std::array<Vec3, 5> s1, s2;
        for (int k = 0; k < 5; ++k) {
            s1[k] = q1[sample[k]];
            s2[k] = q2[sample[k]];
        }
        for (const Mat3& E : solve_essential_five_point(s1, s2)) {
            int count = 0;
            double err = 0.0;
            for (int i = 0; i < n; ++i) {
                const double d = symmetric_epipolar_distance(E, q1[i], q2[i]);
                if (d < threshold) {
                    ++count;
                    err += d;
                }
            }
            if (count > best_count || (count == best_count && err < best_error)) {
                best_count = count;
                best_error = err;
                best_E = E;
                max_iter = std::min(
                    max_iter, ransac_detail::required_iterations(static_cast<double>(count) / n, 5,
                                                                 cfg.confidence, cfg.max_iterations));
            }
        }
    }
    if (best_count < std::max(cfg.min_inliers, 5)) return std::nullopt;

    RelativePoseResult result;
    result.essential = best_E;
    result.inliers.assign(n, false);
    std::vector<Vec3> in1, in2;
    for (int i = 0; i < n; ++i) {
        if (symmetric_epipolar_distance(best_E, q1[i], q2[i]) < threshold) {
            result.inliers[i] = true;
            in1.push_back(q1[i]);
            in2.push_back(q2[i]);
        }
    }
    result.num_inliers = static_cast<int>(in1.size());
    result.pose = decompose_essential(best_E, in1, in2);
    return result;
}

}  // namespace aeromap
