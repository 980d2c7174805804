#include "aeromap/lie.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

using namespace aeromap;
using namespace aeromap::testing;

namespace {

// Independent oracle: the 4x4 matrix exponential of the sim(3) algebra element.
Mat4 algebra_matrix_exp(const Sim3Tangent& v) {
    Mat4 A = Mat4::Zero();
    A.topLeftCorner<3, 3>() = skew(v.omega) + v.mu * Mat3::Identity();
    A.topRightCorner<3, 1>() = v.sigma;
    return A.exp();
}

double max_abs(const Mat4& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Sim3Exp, IdentityPureTranslationPureScale) {
    const Sim3Transform I = sim3_exp({});
    EXPECT_TRUE(I.rotation.isApprox(Mat3::Identity()));
    EXPECT_EQ(I.scale, 1.0);
    EXPECT_EQ(I.translation, Vec3::Zero());

    const Sim3Transform T = sim3_exp({Vec3::Zero(), Vec3(1, 2, 3), 0.0});
    EXPECT_TRUE(T.rotation.isIdentity(0.0));
    EXPECT_DOUBLE_EQ(T.scale, 1.0);
    EXPECT_NEAR((T.translation - Vec3(1, 2, 3)).norm(), 0.0, 1e-15);

    const Sim3Transform S = sim3_exp({Vec3::Zero(), Vec3::Zero(), std::log(2.0)});
    EXPECT_NEAR(S.scale, 2.0, 1e-15);
    EXPECT_TRUE(S.translation.isZero(0.0));
}

TEST(Sim3Exp, MatchesMatrixExponential) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const Sim3Tangent v = random_tangent(rng);
        EXPECT_LT(max_abs(sim3_exp(v).matrix() - algebra_matrix_exp(v)), 1e-10);
    }
    // Near-zero rotation / scale branches.
    const Sim3Tangent tiny{Vec3(1e-8, -2e-8, 3e-9), Vec3(0.5, -1.0, 2.0), 1e-10};
    EXPECT_LT(max_abs(sim3_exp(tiny).matrix() - algebra_matrix_exp(tiny)), 1e-14);
    const Sim3Tangent small_mu{Vec3(0.3, 0.1, -0.2), Vec3(1, 2, 3), 2e-4};
    EXPECT_LT(max_abs(sim3_exp(small_mu).matrix() - algebra_matrix_exp(small_mu)), 1e-13);
    const Sim3Tangent small_rot{Vec3(1e-7, 0, 0), Vec3(1, 2, 3), 0.7};
    EXPECT_LT(max_abs(sim3_exp(small_rot).matrix() - algebra_matrix_exp(small_rot)), 1e-13);
}

TEST(Sim3Exp, ApplyMatchesHomogeneousProduct) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 100; ++i) {
        const Sim3Tangent v = random_tangent(rng);
        const Vec3 x = random_vec3(rng, -10, 10);
        const Eigen::Vector4d h = algebra_matrix_exp(v) * x.homogeneous();
        EXPECT_LT((sim3_apply(sim3_exp(v), x) - h.head<3>()).norm(), 1e-9);
    }
}

TEST(Sim3Log, IdentityAndPureScale) {
    const Sim3Tangent z = sim3_log(Sim3Transform::identity());
    EXPECT_EQ(z.to_vector(), Vec7::Zero());
    const Sim3Tangent s = sim3_log({Mat3::Identity(), std::exp(1.0), Vec3::Zero()});
    EXPECT_NEAR(s.mu, 1.0, 1e-15);
    EXPECT_TRUE(s.omega.isZero(0.0));
    EXPECT_TRUE(s.sigma.isZero(0.0));
}

TEST(Sim3Log, RoundTripOverSeededTangents) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const Sim3Tangent v = random_tangent(rng, 3.0);
        const Sim3Tangent back = sim3_log(sim3_exp(v));
        EXPECT_LT((back.to_vector() - v.to_vector()).norm(), 1e-9) << "sample " << i;
    }
}

TEST(Sim3Log, ExpOfLogReproducesGroupElement) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        const Sim3Transform G = random_sim3(rng);
        EXPECT_LT(max_abs(sim3_exp(sim3_log(G)).matrix() - G.matrix()), 1e-9);
    }
}

TEST(Sim3Log, RotationAtPiIsDegenerate) {
    const Sim3Transform G{so3_exp(Vec3(kPi, 0, 0)), 1.0, Vec3(1, 0, 0)};
    EXPECT_THROW(sim3_log(G), DegenerateError);
}

TEST(Sim3Compose, ConventionAppliesFirstArgumentFirst) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const Sim3Transform A = random_sim3(rng), B = random_sim3(rng);
        const Vec3 x = random_vec3(rng, -5, 5);
        const Vec3 lhs = sim3_apply(sim3_compose(A, B), x);
        const Vec3 rhs = sim3_apply(B, sim3_apply(A, x));
        EXPECT_LT((lhs - rhs).norm(), 1e-10 * (1.0 + rhs.norm()));
    }
}

TEST(Sim3Compose, GroupAxioms) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const Sim3Transform A = random_sim3(rng), B = random_sim3(rng), C = random_sim3(rng);
        const Mat4 left = sim3_compose(sim3_compose(A, B), C).matrix();
        const Mat4 right = sim3_compose(A, sim3_compose(B, C)).matrix();
        EXPECT_LT(max_abs(left - right), 1e-10 * (1.0 + max_abs(left)));
        EXPECT_LT(max_abs(sim3_compose(Sim3Transform::identity(), A).matrix() - A.matrix()), 1e-15);
        EXPECT_LT(max_abs(sim3_compose(A, sim3_inverse(A)).matrix() - Mat4::Identity()), 1e-9);
    }
}

TEST(Sim3Inverse, ClosedFormAndInvolution) {
    EXPECT_EQ(sim3_inverse(Sim3Transform::identity()).matrix(), Mat4::Identity());
    const Sim3Transform inv = sim3_inverse({Mat3::Identity(), 2.0, Vec3(1, 0, 0)});
    EXPECT_DOUBLE_EQ(inv.scale, 0.5);
    EXPECT_LT((inv.translation - Vec3(-0.5, 0, 0)).norm(), 1e-15);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const Sim3Transform G = random_sim3(rng);
        EXPECT_LT(max_abs(sim3_inverse(sim3_inverse(G)).matrix() - G.matrix()), 1e-10);
    }
}

TEST(Sim3Apply, Arithmetic) {
    EXPECT_EQ(sim3_apply(Sim3Transform::identity(), Vec3(4, 5, 6)), Vec3(4, 5, 6));
    EXPECT_EQ(sim3_apply({Mat3::Identity(), 2.0, Vec3(1, 0, 0)}, Vec3(1, 1, 1)), Vec3(3, 2, 2));
}

TEST(ManifoldUpdate, ZeroAndIdentityCases) {
    std::mt19937_64 rng(8);
    const Sim3State s = Sim3State::from_group(random_sim3(rng));
    const Sim3State same = sim3_manifold_update(s, {});
    EXPECT_LT(max_abs(same.group.matrix() - s.group.matrix()), 1e-15);
    EXPECT_LT((same.algebra.to_vector() - s.algebra.to_vector()).norm(), 1e-9);

    const Sim3Tangent v = random_tangent(rng, 1.0);
    const Sim3State from_id = sim3_manifold_update(Sim3State::from_group(Sim3Transform::identity()), v);
    EXPECT_LT(max_abs(from_id.group.matrix() - sim3_exp(v).matrix()), 1e-15);
    EXPECT_LT((from_id.algebra.to_vector() - v.to_vector()).norm(), 1e-9);
}

TEST(ManifoldUpdate, AccumulatesLeftProduct) {
    std::mt19937_64 rng(9);
    Sim3State state = Sim3State::from_group(random_sim3(rng));
    Mat4 product = state.group.matrix();
    std::uniform_real_distribution<double> small(-0.05, 0.05);
    for (int k = 0; k < 50; ++k) {
        const Sim3Tangent up{Vec3(small(rng), small(rng), small(rng)),
                             Vec3(small(rng), small(rng), small(rng)), small(rng)};
        state = sim3_manifold_update(state, up);
        product = algebra_matrix_exp(up) * product;
    }
    EXPECT_LT(max_abs(state.group.matrix() - product), 1e-8);
    // The algebra coordinates track the group element.
    EXPECT_LT(max_abs(sim3_exp(state.algebra).matrix() - state.group.matrix()), 1e-8);
}

TEST(AlignmentJacobian, ZeroResidualAtConsistentPoint) {
    const auto r = alignment_residual_and_jacobians(Sim3Transform::identity(), Vec3(1, 2, 3), Vec3(1, 2, 3));
    EXPECT_EQ(r.residual, Vec3::Zero());
    EXPECT_EQ(r.J_landmark, -Mat3::Identity());
}

TEST(AlignmentJacobian, TranslationBlockIsIdentity) {
    std::mt19937_64 rng(10);
    const auto r = alignment_residual_and_jacobians(random_sim3(rng), Vec3(1, -2, 3), Vec3(0, 1, 0));
    EXPECT_EQ(Mat3(r.J_pose.block<3, 3>(0, 3)), Mat3::Identity());
}

TEST(AlignmentJacobian, MatchesCentralDifferencesThroughManifoldUpdate) {
    std::mt19937_64 rng(99);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const Sim3State state = Sim3State::from_group(random_sim3(rng));
        const Vec3 x = random_vec3(rng, -3, 3);
        const Vec3 X = random_vec3(rng, -3, 3);
        const auto analytic = alignment_residual_and_jacobians(state.group, x, X);

        Mat37 fd_pose;
        for (int k = 0; k < 7; ++k) {
            Vec7 d = Vec7::Zero();
            d(k) = h;
            const auto plus = sim3_manifold_update(state, Sim3Tangent::from_vector(d));
            const auto minus = sim3_manifold_update(state, Sim3Tangent::from_vector(-d));
            fd_pose.col(k) = (plus.group.apply(x) - minus.group.apply(x)) / (2 * h);
        }
        Mat3 fd_landmark;
        for (int k = 0; k < 3; ++k) {
            Vec3 d = Vec3::Zero();
            d(k) = h;
            fd_landmark.col(k) = ((state.group.apply(x) - (X + d)) - (state.group.apply(x) - (X - d))) / (2 * h);
        }
        EXPECT_LT((fd_pose - analytic.J_pose).norm() / analytic.J_pose.norm(), 1e-5) << trial;
        EXPECT_LT((fd_landmark - analytic.J_landmark).norm() / analytic.J_landmark.norm(), 1e-5);
    }
}

TEST(Skew, CrossProductProperties) {
    EXPECT_EQ(skew(Vec3::Zero()), Mat3::Zero());
    EXPECT_EQ(skew(Vec3(0, 0, 1)) * Vec3(1, 0, 0), Vec3(0, 1, 0));
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const Vec3 v = random_vec3(rng), w = random_vec3(rng);
        EXPECT_EQ(Mat3(skew(v).transpose()), Mat3(-skew(v)));
        EXPECT_LT((skew(v) * w - v.cross(w)).norm(), 1e-15);
    }
}
