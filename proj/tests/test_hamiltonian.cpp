#include <gtest/gtest.h>

#include <cmath>

#include "fqed/hamiltonian.hpp"
#include "fqed/spectral.hpp"

using namespace fqed;

namespace {

ModelParams params_with(double alpha, Vec3 P, int J = 2, double eps = 0.25) {
    ModelParams p;
    p.alpha = alpha;
    p.P = P;
    p.J = J;
    p.epsilon = eps;
    return p;
}

ModeGrid grid_for(const ModelParams& p) { return build_grid(p.cutoffs(), 1, AngularSet::Octahedral6); }

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST(Field, EmptyShellRangeGivesZero) {
    const auto p = params_with(0.01, Vec3(0.1, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    for (const auto& A : assemble_field(grid, b, interacting_shells(0))) EXPECT_EQ(A.matrix().nonZeros(), 0);
}

TEST(Field, SingleModeMatrixElement) {
    const auto p = params_with(0.01, Vec3(0.1, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(1, 1, 1);
    const VectorOperator A = assemble_field(grid, b, {0, 1});
    const PhotonMode& m = grid[0];
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(A[static_cast<std::size_t>(i)].dense()(1, 0), std::sqrt(m.weight / m.knorm) * m.eps[i], 1e-15);
}

TEST(Field, VacuumSquareIsModeSum) {
    const auto p = params_with(0.01, Vec3(0.1, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    const VectorOperator A = assemble_field(grid, b, {0, 2});
    const RealVector omega = vacuum(*b);
    for (int i = 0; i < 3; ++i) {
        double expected = 0.0;
        for (const auto& m : grid) expected += m.weight * m.eps[i] * m.eps[i] / m.knorm;
        const RealVector a = A[static_cast<std::size_t>(i)].apply(omega);
        EXPECT_NEAR(a.squaredNorm(), expected, 1e-13);
    }
}

TEST(FiberHamiltonian, DecoupledGroundStateIsVacuum) {
    const auto p = params_with(0.0, Vec3(0.2, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    for (int j = 0; j <= p.J; ++j) {
        const DenseSpectrum s = dense_spectrum(assemble_H_fiber(p, grid, b, j));
        EXPECT_NEAR(s.values[0], 0.02, 1e-12);
        EXPECT_NEAR(std::abs(s.vectors(0, 0)), 1.0, 1e-12);
    }
}

TEST(FiberHamiltonian, ScaleZeroSpectrumMatchesDecoupled) {
    const auto coupled = params_with(0.05, Vec3(0.2, 0, 0));
    const auto free = params_with(0.0, Vec3(0.2, 0, 0));
    const ModeGrid grid = grid_for(coupled);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    EXPECT_EQ(max_abs(assemble_H_fiber(coupled, grid, b, 0).dense() - assemble_H_fiber(free, grid, b, 0).dense()), 0.0);
}

TEST(FiberHamiltonian, SixModeGroundEnergyMatchesDenseOracle) {
    const auto p = params_with(0.01, Vec3(0.1, 0, 0), 1);
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(6, 2, 2);
    const FockOperator H = assemble_H_fiber(p, grid, b, 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(H.dense());
    EXPECT_NEAR(ground_state(H).energy, oracle.eigenvalues()[0], 1e-10);
}

TEST(FiberHamiltonian, SymmetricAndBoundedBelow) {
    const auto p = params_with(0.02, Vec3(0.15, 0.05, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    for (int j = 0; j <= p.J; ++j) {
        const FockOperator H = assemble_H_fiber(p, grid, b, j);
        const Eigen::MatrixXd d = H.dense();
        EXPECT_EQ(max_abs(d - d.transpose()), 0.0);
        EXPECT_GT(dense_spectrum(H).values[0], -1e-10);
    }
}

TEST(SliceInteraction, ZeroCouplingGivesZero) {
    const auto p = params_with(0.0, Vec3(0.1, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    EXPECT_EQ(max_abs(assemble_slice_interaction(p, grid, b, 1).dense()), 0.0);
}

TEST(SliceInteraction, AddsUpToNextScale) {
    const auto p = params_with(0.03, Vec3(0.1, 0.02, -0.03));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    for (int j = 0; j < p.J; ++j) {
        const Eigen::MatrixXd lhs = assemble_H_fiber(p, grid, b, j + 1).dense();
        const Eigen::MatrixXd rhs = assemble_H_fiber(p, grid, b, j).dense() + assemble_slice_interaction(p, grid, b, j).dense();
        EXPECT_LT(max_abs(lhs - rhs), 1e-12) << "j=" << j;
    }
}

TEST(SliceInteraction, VacuumExpectationIsShellSum) {
    const auto p = params_with(0.03, Vec3(0.1, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    for (int j = 0; j < p.J; ++j) {
        double expected = 0.0;
        for (const auto& m : grid)
            if (m.shell == j) expected += 0.5 * p.alpha * m.weight * m.eps.squaredNorm() / m.knorm;
        EXPECT_NEAR(assemble_slice_interaction(p, grid, b, j).expectation(vacuum(*b)), expected, 1e-14);
    }
}

TEST(CanonicalK, DispersionFactor) {
    EXPECT_NEAR(dispersion_factor(Vec3(1, 0, 0), Vec3(0.1, 0, 0)), 0.9, 1e-15);
    const Vec3 g(0.12, -0.05, 0.03);
    const ModeGrid grid = grid_for(params_with(0.0, Vec3::Zero()));
    for (const auto& m : grid) {
        const double d = dispersion_factor(m.khat, g);
        EXPECT_GE(d, 1.0 - g.norm() - 1e-15);
        EXPECT_LE(d, 1.0 + g.norm() + 1e-15);
    }
}

TEST(CanonicalK, ScaleZeroFreeForm) {
    const auto p = params_with(0.02, Vec3(0.2, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    const Eigen::MatrixXd free_part = (half_square(assemble_photon_momentum(grid, b)) + assemble_photon_energy(grid, b)).dense();

    const CanonicalK zero = assemble_K_canonical(p, grid, b, 0, Vec3::Zero(), Vec3::Zero());
    EXPECT_EQ(zero.script_E, 0.0);
    EXPECT_LT(max_abs(zero.K.dense() - free_part), 1e-15);

    // with gradE = P the c-number carries P^2/2 and the ground energy is P^2/2
    const CanonicalK dressed = assemble_K_canonical(p, grid, b, 0, p.P, Vec3::Zero());
    EXPECT_NEAR(dressed.script_E, 0.02, 1e-15);
    EXPECT_NEAR(dense_spectrum(dressed.K).values[0], 0.02, 1e-12);
}

TEST(CanonicalK, GroundEnergyMatchesHamiltonianUpToTruncation) {
    auto p = params_with(1e-3, Vec3(0.1, 0, 0), 1, 0.3);
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 3, 3);
    const FiberFamily family(p, grid, b, 1);
    const GroundStateRecord gs = ground_state(family.at(p.P));
    Vec3 gradE;
    for (int i = 0; i < 3; ++i) gradE[i] = p.P[i] - family.beta()[static_cast<std::size_t>(i)].expectation(gs.vector);
    const PiOperators pi = pi_operator(p, grid, b, 1, gradE);
    const Vec3 shift = p.P - gradE - pi.vacuum_expectation;
    const CanonicalK K = assemble_K_canonical(p, grid, b, 1, gradE, shift);
    EXPECT_NEAR(ground_state(K.K).energy, gs.energy, 1e-6);
}

TEST(IntermediateK, DecoupledEqualsPrevious) {
    const auto p = params_with(0.0, Vec3(0.1, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    const IntermediateK k = assemble_K_hat(p, grid, b, 1, Vec3(0.1, 0, 0), Vec3::Zero());
    EXPECT_EQ(max_abs(k.K_hat.dense() - k.K_prev.dense()), 0.0);
}

TEST(IntermediateK, DeltaIdentity) {
    const auto p = params_with(0.02, Vec3(0.12, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    const Vec3 grad(0.11, 0.01, 0.0), shift(0.002, -0.001, 0.0005);
    for (int j = 1; j <= p.J; ++j) {
        const IntermediateK k = assemble_K_hat(p, grid, b, j, grad, shift);
        Eigen::MatrixXd lhs = k.K_hat.dense() - k.K_prev.dense();
        lhs.diagonal().array() += k.script_E_prev - k.script_E_hat;
        EXPECT_LT(max_abs(lhs - k.delta.dense()), 1e-12) << "j=" << j;
    }
}

TEST(IntermediateK, GammaHatDifferenceIsSliceOperator) {
    const auto p = params_with(0.02, Vec3(0.12, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    const Vec3 grad(0.11, 0.02, -0.01);
    for (int j = 1; j <= p.J; ++j) {
        const PiOperators hat = pi_from_field(p, grid, b, interacting_shells(j),
                                              displacement_coeffs(grad, grid, interacting_shells(j), p.alpha, b->mode_count()));
        const PiOperators prev = pi_operator(p, grid, b, j - 1, grad);
        const SliceOperators slice = assemble_slice_operators(p, grid, b, j, grad);
        for (std::size_t i = 0; i < 3; ++i) {
            Eigen::MatrixXd lhs = hat.components[i].dense() - prev.components[i].dense();
            lhs.diagonal().array() += hat.vacuum_expectation[static_cast<Eigen::Index>(i)] -
                                      prev.vacuum_expectation[static_cast<Eigen::Index>(i)];
            Eigen::MatrixXd rhs = slice.L[i].dense();
            rhs.diagonal().array() += slice.I[static_cast<Eigen::Index>(i)];
            EXPECT_LT(max_abs(lhs - rhs), 1e-12);
        }
    }
}

TEST(IntermediateK, CreationPartIsUpperHalfOfSlice) {
    const auto p = params_with(0.02, Vec3(0.12, 0, 0));
    const ModeGrid grid = grid_for(p);
    const auto b = enumerate_basis(grid.size(), 2, 2);
    const Vec3 grad(0.1, 0, 0);
    const SliceOperators slice = assemble_slice_operators(p, grid, b, 2, grad);
    const VectorOperator plus = assemble_slice_creation(p, grid, b, 2, grad);
    for (std::size_t i = 0; i < 3; ++i) {
        const Eigen::MatrixXd c = plus[i].dense();
        EXPECT_LT(max_abs(c + c.transpose() - slice.L[i].dense()), 1e-15);
    }
}
