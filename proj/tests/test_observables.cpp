#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fqed/observables.hpp"

using namespace fqed;

namespace {

ModelParams make_params(double alpha, Vec3 P, int J = 2, double eps = 0.3) {
    ModelParams p;
    p.alpha = alpha;
    p.P = P;
    p.J = J;
    p.epsilon = eps;
    return p;
}

struct Model {
    ModelParams p;
    ModeGrid grid;
    BasisPtr basis;
    Model(ModelParams params, int n_max = 2)
        : p(params), grid(build_grid(p.cutoffs(), 1, AngularSet::Octahedral6)),
          basis(enumerate_basis(grid.size(), n_max, 2)) {}
    GroundStateRecord ground(int j) const { return ground_state(assemble_H_fiber(p, grid, basis, j)); }
};

CascadeOptions permissive() {
    CascadeOptions o;
    o.override_constraints = true;
    o.neumann_check = false;
    return o;
}

}  // namespace

TEST(Momentum, AxisDetection) {
    EXPECT_EQ(momentum_axis(Vec3(0, 0.2, 0)), 1);
    EXPECT_EQ(momentum_axis(Vec3(0, 0, 0)), 0);
    EXPECT_THROW(momentum_axis(Vec3(0.1, 0.1, 0)), DomainError);
}

TEST(Gradient, DecoupledIsTotalMomentum) {
    const Model m(make_params(0.0, Vec3(0.15, 0, 0)));
    const auto gs = m.ground(2);
    EXPECT_NEAR((gradE_feynman_hellmann(gs.vector, m.p, m.grid, m.basis, 2) - m.p.P).norm(), 0.0, 1e-14);
}

TEST(Gradient, RejectsStaleVectors) {
    const Model m(make_params(0.01, Vec3(0.15, 0, 0)));
    const RealVector not_an_eigenvector = vacuum(*m.basis);
    EXPECT_THROW(gradE_feynman_hellmann(not_an_eigenvector, m.p, m.grid, m.basis, 2), DomainError);
}

TEST(Gradient, FiniteDifferencesConvergeQuadratically) {
    const Model m(make_params(0.01, Vec3(0.15, 0, 0)));
    const auto gs = m.ground(2);
    const Vec3 fh = gradE_feynman_hellmann(gs.vector, m.p, m.grid, m.basis, 2);
    EXPECT_LT(fh.norm(), 1.0);
    const FiberFamily family(m.p, m.grid, m.basis, 2);
    LanczosOptions tight;
    tight.tol = 1e-13;
    const double coarse = (gradE_finite_difference(family, m.p.P, 0.04, tight) - fh).norm();
    const double fine = (gradE_finite_difference(family, m.p.P, 0.02, tight) - fh).norm();
    EXPECT_GT(coarse / fine, 3.5);
    EXPECT_LT(coarse / fine, 4.5);
}

TEST(SecondDerivative, DecoupledRoutesGiveOne) {
    const Model m(make_params(0.0, Vec3(0.15, 0, 0)));
    for (int j = 0; j <= 2; ++j) {
        const auto gs = m.ground(j);
        const Contour c = final_contour(m.p, j, gs.energy);
        EXPECT_NEAR(d2E_H_contour(gs.vector, m.p, m.grid, m.basis, j, c), 1.0, 1e-10);
    }
    const FiberFamily family(m.p, m.grid, m.basis, 2);
    EXPECT_NEAR(d2E_finite_difference(family, m.p.P, 0, 5e-3), 1.0, 1e-9);
}

TEST(SecondDerivative, ScaleZeroIsBareMassAtAnyCoupling) {
    const Model m(make_params(2e-3, Vec3(0.15, 0, 0)));
    const auto gs = m.ground(0);
    EXPECT_NEAR(d2E_H_contour(gs.vector, m.p, m.grid, m.basis, 0, final_contour(m.p, 0, gs.energy)), 1.0, 1e-10);

    const CascadeState st = run_cascade(m.p, m.grid, m.basis, permissive());
    const KContourResult k = d2E_K_at_scale(st, m.grid, 0, final_contour(m.p, 0, st.at(0).E));
    EXPECT_NEAR(k.value, 1.0, 1e-10);
    EXPECT_NEAR(k.reduced, 1.0, 1e-10);
}

TEST(SecondDerivative, ContourMatchesFiniteDifference) {
    const Model m(make_params(0.005, Vec3(0.1, 0, 0), 1));
    const auto gs = m.ground(1);
    const double contour = d2E_H_contour(gs.vector, m.p, m.grid, m.basis, 1, final_contour(m.p, 1, gs.energy));
    LanczosOptions tight;
    tight.tol = 1e-13;
    const double fd = d2E_finite_difference(FiberFamily(m.p, m.grid, m.basis, 1), m.p.P, 0, 5e-3, tight);
    EXPECT_LT(std::abs(contour - fd), 1e-5);
    EXPECT_LT(contour, 1.0);
}

TEST(SecondDerivative, KRouteMatchesHRouteOnCascade) {
    Model m(make_params(1e-3, Vec3(0.1, 0, 0), 2), 3);
    const CascadeState st = run_cascade(m.p, m.grid, m.basis, permissive());
    for (int j = 0; j <= st.last(); ++j) {
        const auto& rec = st.at(j);
        const Contour c = final_contour(m.p, j, rec.E);
        const double h = d2E_H_contour(rec.psi, m.p, m.grid, (*st.sectors)[j], j, c);
        const KContourResult k = d2E_K_at_scale(st, m.grid, j, c);
        EXPECT_LT(std::abs(h - k.value), 1e-6) << "j=" << j;
        EXPECT_LT(std::abs(k.value - k.reduced), 1e-8) << "j=" << j;
        EXPECT_LE(k.orthogonality, 1e-10);
    }
}

TEST(SecondDerivative, KRouteRequiresOrthogonality) {
    const Model m(make_params(0.01, Vec3(0.1, 0, 0), 1));
    const RealVector phi = m.ground(1).vector;
    const PiOperators pi = pi_operator(m.p, m.grid, m.basis, 1, Vec3(0.1, 0, 0));
    const GammaOperators off = gamma_with_shift(pi, Vec3(0.05, 0, 0));
    const CanonicalK K = assemble_K_canonical(m.p, m.grid, m.basis, 1, Vec3(0.1, 0, 0), Vec3(0.05, 0, 0));
    EXPECT_THROW(d2E_K_contour(phi, off, K.K, 0, 0.1, final_contour(m.p, 1, 0.005)), DomainError);
}

TEST(MassScan, DecoupledFamilyHasUnitMass) {
    const Model m(make_params(0.0, Vec3(0.1, 0, 0), 2));
    MassScanOptions o;
    o.cascade = permissive();
    const MassScanResult r = mass_scan({0.0}, {m.p.P}, m.p, m.grid, m.basis, o);
    ASSERT_EQ(r.families.size(), 1u);
    ASSERT_EQ(r.rows.size(), 3u);
    for (const auto& row : r.rows) {
        EXPECT_TRUE(row.error.empty()) << row.error;
        EXPECT_NEAR(row.d2E_H, 1.0, 1e-10);
        EXPECT_NEAR(row.d2E_K, 1.0, 1e-10);
        EXPECT_NEAR(row.m_r, 1.0, 1e-10);
    }
    EXPECT_NEAR(r.families[0].limit_estimate, 1.0, 1e-10);
    EXPECT_THROW(mass_scan({}, {m.p.P}, m.p, m.grid, m.basis, o), ParameterError);

    std::ostringstream csv;
    write_mass_scan_csv(csv, r, "h");
    EXPECT_EQ(csv.str().rfind("alpha,j,sigma,Px,Py,Pz,E,", 0), 0u);
    EXPECT_NE(csv.str().find("# config_hash=h"), std::string::npos);
}

TEST(MassScan, FailingPairIsAnnotated) {
    const Model m(make_params(0.0, Vec3(0.1, 0, 0), 2));
    MassScanOptions o;
    o.cascade = permissive();
    const MassScanResult r = mass_scan({0.0}, {Vec3(0.5, 0, 0)}, m.p, m.grid, m.basis, o);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].j, -1);
    EXPECT_FALSE(r.rows[0].error.empty());
}

TEST(SoftPhoton, DecoupledVacuumHasNoPhotons) {
    const Model m(make_params(0.0, Vec3(0.1, 0, 0)));
    const SoftPhotonTable t = soft_photon_probe(m.ground(2).vector, m.p, m.grid, m.basis, 2);
    for (const auto& e : t.entries) EXPECT_LT(e.occupation_norm, 1e-14);
    EXPECT_LT(t.constant, 1e-10);
}

TEST(SoftPhoton, MatchesFirstOrderPerturbationTheory) {
    // one-photon amplitude: alpha^{1/2} (P.eps) sqrt(w/|k|) / (|k| - P.k + k^2/2)
    const Model m(make_params(1e-6, Vec3(0.2, 0, 0), 1));
    const SoftPhotonTable t = soft_photon_probe(m.ground(1).vector, m.p, m.grid, m.basis, 1);
    int checked = 0;
    for (const auto& e : t.entries) {
        const PhotonMode& mode = m.grid[e.mode];
        const double coupling = std::sqrt(m.p.alpha) * std::abs(m.p.P.dot(mode.eps)) * std::sqrt(mode.weight / mode.knorm);
        const double denom = mode.knorm - m.p.P.dot(mode.k) + 0.5 * mode.k.squaredNorm();
        const double predicted = coupling / denom;
        if (predicted < 1e-12) {
            EXPECT_LT(e.occupation_norm, 10.0 * m.p.alpha);
            continue;
        }
        EXPECT_NEAR(e.occupation_norm / predicted, 1.0, 1e-2) << "mode " << e.mode;
        ++checked;
    }
    EXPECT_GT(checked, 0);
}

TEST(PullThrough, DecoupledResidualIsZero) {
    const Model m(make_params(0.0, Vec3(0.1, 0, 0), 1));
    const auto gs = m.ground(1);
    EXPECT_EQ(pull_through_max(gs.vector, gs.energy, m.p, m.grid, m.basis, 1), 0.0);
    EXPECT_THROW(pull_through_probe(gs.vector, gs.energy, m.p, m.grid, m.basis, 0, 0), DomainError);
}

TEST(PullThrough, ResidualShrinksWithTruncation) {
    std::vector<double> residual;
    for (int n_max : {2, 3}) {
        const Model m(make_params(0.005, Vec3(0.1, 0, 0), 1), n_max);
        const auto gs = m.ground(1);
        residual.push_back(pull_through_max(gs.vector, gs.energy, m.p, m.grid, m.basis, 1));
    }
    EXPECT_LT(residual[1], residual[0]);
    EXPECT_LT(residual[1], 0.05);
}

TEST(CAlpha, DecoupledProbeIsFreeDispersion) {
    const Model m(make_params(0.0, Vec3(0.3, 0, 0), 2));
    const std::vector<Vec3> momenta{Vec3(0.1, 0, 0), Vec3(0.3, 0, 0)};
    const double free = c_alpha_free(m.grid, momenta);
    EXPECT_LE(free, 1.0 / 3.0 + 1e-10);
    EXPECT_NEAR(c_alpha_sup(m.p, m.grid, m.basis, 2, momenta).value, free, 1e-10);
}

TEST(Bounds, DecoupledLeftSidesVanish) {
    const Model m(make_params(0.0, Vec3(0.1, 0, 0), 2));
    const CascadeState st = run_cascade(m.p, m.grid, m.basis, permissive());
    const BoundsReport r = bounds_probe_B(st, m.grid);
    for (const auto& s : r.scales) {
        EXPECT_NEAR(s.energy_shift, 0.0, 1e-14);
        EXPECT_NEAR(s.grad_shift, 0.0, 1e-14);
        EXPECT_EQ(s.theorem_lhs, 0.0);
    }
}

TEST(Bounds, ResolventConstantsAndScaleZeroQuantity) {
    const Model m(make_params(1e-3, Vec3(0.1, 0, 0), 2));
    const CascadeState st = run_cascade(m.p, m.grid, m.basis, permissive());
    const BoundsReport r = bounds_probe_B(st, m.grid);
    ASSERT_EQ(r.scales.size(), 2u);
    EXPECT_EQ(r.scales[0].theorem_lhs, 0.0);
    EXPECT_GE(r.C3, 1.0);
    EXPECT_GE(r.scales[1].C3, 1.0);
    EXPECT_GE(r.scales[1].C5, 1.0);
    std::ostringstream out;
    r.print(out);
    EXPECT_NE(out.str().find("[Induction]"), std::string::npos);

    BoundsOptions tiny;
    tiny.dense_limit = 10;
    EXPECT_TRUE(bounds_probe_B(st, m.grid, tiny).scales[1].resolvent_bounds_skipped);
}

TEST(Symmetry, CoordinatePermutationPreservesEnergy) {
    const Model m(make_params(0.02, Vec3(0.1, 0, 0), 2));
    const FiberFamily family(m.p, m.grid, m.basis, 2);
    const double ex = fiber_energy(family, Vec3(0.12, 0, 0));
    EXPECT_NEAR(fiber_energy(family, Vec3(0, 0.12, 0)), ex, 1e-10);
    EXPECT_NEAR(fiber_energy(family, Vec3(0, 0, -0.12)), ex, 1e-10);
}
