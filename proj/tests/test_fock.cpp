#include <gtest/gtest.h>

#include <functional>
#include <set>
#include <vector>

#include "fqed/fock.hpp"

using namespace fqed;

namespace {

// Independent count: odometer over all occupation vectors with entries <= c_max.
std::size_t brute_force_count(std::size_t modes, int n_max, int c_max) {
    std::vector<int> occ(modes, 0);
    std::size_t count = 0;
    while (true) {
        int total = 0;
        for (int n : occ) total += n;
        if (total <= n_max) ++count;
        std::size_t m = 0;
        while (m < modes && occ[m] == c_max) occ[m++] = 0;
        if (m == modes) break;
        ++occ[m];
    }
    return count;
}

ModeGrid small_grid(int J = 1) { return build_grid(CutoffSequence(1.0, 0.25, J), 1, AngularSet::Octahedral6); }

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(FockBasis, SmallEnumerations) {
    const auto b = enumerate_basis(2, 1, 1);
    ASSERT_EQ(b->size(), 3u);
    EXPECT_EQ(b->occupation(0, 0) + b->occupation(0, 1), 0);
    EXPECT_EQ(b->occupation(1, 0), 1);
    EXPECT_EQ(b->occupation(1, 1), 0);
    EXPECT_EQ(b->occupation(2, 0), 0);
    EXPECT_EQ(b->occupation(2, 1), 1);
    EXPECT_EQ(enumerate_basis(2, 2, 2)->size(), 6u);
}

TEST(FockBasis, CountsMatchBruteForce) {
    EXPECT_EQ(enumerate_basis(12, 2, 2)->size(), 91u);
    EXPECT_EQ(brute_force_count(12, 2, 2), 91u);
    for (std::size_t M : {1u, 3u, 5u, 7u})
        for (int n = 0; n <= 3; ++n)
            for (int c = 1; c <= 3; ++c)
                EXPECT_EQ(enumerate_basis(M, n, c)->size(), brute_force_count(M, n, c)) << M << ' ' << n << ' ' << c;
}

TEST(FockBasis, GradedOrderAndUniqueness) {
    const auto b = enumerate_basis(5, 3, 2);
    std::set<std::vector<int>> seen;
    int prev_total = 0;
    for (std::size_t s = 0; s < b->size(); ++s) {
        std::vector<int> occ(5);
        for (std::size_t m = 0; m < 5; ++m) occ[m] = b->occupation(s, m);
        EXPECT_TRUE(seen.insert(occ).second);
        EXPECT_GE(b->total(s), prev_total);
        prev_total = b->total(s);
        EXPECT_EQ(b->find(b->state(s)), static_cast<std::ptrdiff_t>(s));
    }
}

TEST(FockBasis, LimitIsEnforced) { EXPECT_THROW(enumerate_basis(40, 3, 3, 1000), ResourceError); }

TEST(Ladder, CreateOnVacuum) {
    const auto b = enumerate_basis(1, 2, 2);
    const Ladder l = ladder(b, 0);
    const RealVector one = l.create.apply(vacuum(*b));
    EXPECT_EQ(one[1], 1.0);
    EXPECT_EQ(one[0], 0.0);
    EXPECT_EQ(one[2], 0.0);
}

TEST(Ladder, NumberOperatorOnTwoQuanta) {
    const auto b = enumerate_basis(1, 2, 2);
    const Ladder l = ladder(b, 0);
    RealVector two = RealVector::Zero(3);
    two[2] = 1.0;
    const RealVector out = l.create.apply(l.annihilate.apply(two));
    EXPECT_NEAR(out[2], 2.0, 1e-15);
}

TEST(Ladder, CanonicalCommutationRelations) {
    const auto b = enumerate_basis(3, 3, 2);
    std::vector<Ladder> ls;
    for (std::size_t m = 0; m < 3; ++m) ls.push_back(ladder(b, m));
    for (std::size_t m = 0; m < 3; ++m) {
        EXPECT_EQ(max_abs(ls[m].create.dense() - ls[m].annihilate.dense().transpose()), 0.0);
        for (std::size_t n = 0; n < 3; ++n) {
            const Eigen::MatrixXd a = ls[m].annihilate.dense(), an = ls[n].annihilate.dense();
            const Eigen::MatrixXd c = ls[n].create.dense();
            EXPECT_LT(max_abs(a * an - an * a), 1e-14);
            const Eigen::MatrixXd comm = a * c - c * a;
            for (std::size_t s = 0; s < b->size(); ++s) {
                const bool uncapped = b->total(s) < b->n_max() && b->occupation(s, m) < b->c_max();
                if (!uncapped) continue;
                // column s: CCR holds exactly on states that can accept another quantum
                for (std::size_t t = 0; t < b->size(); ++t) {
                    const double expect = (m == n && s == t) ? 1.0 : 0.0;
                    EXPECT_NEAR(comm(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)), expect, 1e-14);
                }
            }
        }
    }
}

TEST(WeightedNumberSum, Examples) {
    const ModeGrid grid = small_grid();
    const auto b = enumerate_basis(grid.size(), 2, 2);
    const FockOperator Hf = weighted_number_sum(b, grid, [](const PhotonMode& m) { return m.knorm; });
    EXPECT_EQ(Hf.apply(vacuum(*b)).norm(), 0.0);
    const FockOperator N = weighted_number_sum(b, grid, [](const PhotonMode&) { return 1.0; });
    for (std::size_t s = 0; s < b->size(); ++s)
        EXPECT_EQ(N.matrix().coeff(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)), b->total(s));
}

TEST(WeightedNumberSum, IsLinearInTheWeight) {
    const ModeGrid grid = small_grid();
    const auto b = enumerate_basis(grid.size(), 2, 2);
    auto f = [](const PhotonMode& m) { return m.knorm; };
    auto g = [](const PhotonMode& m) { return m.k.x() + 0.3 * m.eps.y(); };
    const FockOperator sum = weighted_number_sum(b, grid, [&](const PhotonMode& m) { return f(m) + g(m); });
    const FockOperator parts = weighted_number_sum(b, grid, f) + weighted_number_sum(b, grid, g);
    EXPECT_LT(max_abs(sum.dense() - parts.dense()), 1e-15);
}

TEST(DiagonalSpectrum, TwoModeExample) {
    // two modes with |k| = 0.5 and 0.3 at n_max = 1: eigenvalues {0, 0.3, 0.5}
    std::vector<PhotonMode> modes(2);
    modes[0].knorm = 0.5;
    modes[1].knorm = 0.3;
    const ModeGrid grid(CutoffSequence(1.0, 0.25, 1), 1, AngularSet::Octahedral6, modes);
    const auto b = enumerate_basis(2, 1, 1);
    const Eigen::MatrixXd H = weighted_number_sum(b, grid, [](const PhotonMode& m) { return m.knorm; }).dense();
    Eigen::VectorXd d = H.diagonal();
    std::sort(d.data(), d.data() + d.size());
    EXPECT_EQ(d[0], 0.0);
    EXPECT_EQ(d[1], 0.3);
    EXPECT_EQ(d[2], 0.5);
}

TEST(Embedding, LeadingModesAreALiteralSubspace) {
    const auto child = enumerate_basis(3, 2, 2);
    const auto parent = enumerate_basis(6, 2, 2);
    const auto map = embedding(*child, *parent);
    EXPECT_EQ(map.front(), 0u);
    EXPECT_TRUE(std::is_sorted(map.begin(), map.end()));
    RealVector v = RealVector::LinSpaced(static_cast<Eigen::Index>(child->size()), 1.0, 2.0);
    const RealVector up = embed(v, map, parent->size());
    EXPECT_EQ(up.norm(), v.norm());
    EXPECT_EQ((restrict_vector(up, map) - v).norm(), 0.0);
    EXPECT_THROW(embedding(*enumerate_basis(3, 3, 2), *parent), MismatchError);
}

TEST(FockOperator, ProductAndTransposeRespectBasis) {
    const auto b = enumerate_basis(2, 2, 2);
    const Ladder l = ladder(b, 1);
    const FockOperator n = l.create * l.annihilate;
    EXPECT_TRUE(n.check_symmetric());
    EXPECT_THROW(n + FockOperator::identity(enumerate_basis(3, 2, 2)), MismatchError);
    EXPECT_NEAR(top_sector_weight(*b, RealVector::Ones(6)), 3.0, 0.0);
}
