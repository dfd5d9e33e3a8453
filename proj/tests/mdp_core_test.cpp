#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "semivar/chain.hpp"
#include "semivar/environments.hpp"
#include "semivar/mdp.hpp"
#include "test_util.hpp"

using namespace semivar;

namespace {

TabularMdp two_state_switch_mdp(double p, double q) {
    // single action; switch 0 -> 1 with prob p, 1 -> 0 with prob q
    Matrix t(2, 2);
    t << 1.0 - p, p, q, 1.0 - q;
    Matrix r(2, 1);
    r << 0.0, 1.0;
    return TabularMdp({t}, r);
}

} // namespace

// ---------------------------------------------------------------------------
// Construction and validation
// ---------------------------------------------------------------------------

TEST(TabularMdp, RejectsNonStochasticRow) {
    Matrix t(2, 2);
    t << 0.5, 0.4, 0.5, 0.5;
    Matrix r = Matrix::Zero(2, 1);
    EXPECT_THROW(TabularMdp({t}, r), ValidationError);
}

TEST(TabularMdp, RejectsRewardAboveBound) {
    Matrix t(2, 2);
    t << 0.5, 0.5, 0.5, 0.5;
    Matrix r(2, 1);
    r << 0.0, 3.0;
    EXPECT_THROW(TabularMdp({t}, r, 2.0), ValidationError);
    EXPECT_NO_THROW(TabularMdp({t}, r, 3.0));
}

TEST(TabularMdp, RejectsReducibleUniformChain) {
    // two absorbing halves never communicate
    Matrix t(2, 2);
    t << 1.0, 0.0, 0.0, 1.0;
    Matrix r = Matrix::Zero(2, 1);
    EXPECT_THROW(TabularMdp({t}, r), ValidationError);
}

TEST(TabularMdp, DefaultRmaxIsMaxAbsReward) {
    Matrix t(2, 2);
    t << 0.5, 0.5, 0.5, 0.5;
    Matrix r(2, 1);
    r << -3.0, 1.0;
    EXPECT_DOUBLE_EQ(TabularMdp({t}, r).r_max(), 3.0);
}

TEST(TabularPolicy, SoftmaxRowsSumToOne) {
    TabularPolicy policy = random_policy(4, 3, 7);
    for (int s = 0; s < 4; ++s) {
        EXPECT_NEAR(policy.probs().row(s).sum(), 1.0, 1e-12);
        EXPECT_GT(policy.probs().row(s).minCoeff(), 0.0);
    }
}

TEST(TabularPolicy, ProbsInvariantUnderPerStateShift) {
    TabularPolicy policy = random_policy(3, 4, 11);
    Matrix shifted = policy.logits();
    shifted.row(1).array() += 42.0;
    TabularPolicy other = TabularPolicy::from_logits(shifted);
    EXPECT_LT((policy.probs() - other.probs()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TabularPolicy, FromProbsRoundTrips) {
    Matrix probs(2, 3);
    probs << 0.2, 0.3, 0.5, 1.0, 0.0, 0.0;
    TabularPolicy policy = TabularPolicy::from_probs(probs);
    EXPECT_LT((policy.probs() - probs).cwiseAbs().maxCoeff(), 1e-14);
}

// ---------------------------------------------------------------------------
// induced_chain
// ---------------------------------------------------------------------------

TEST(InducedChain, DeterministicSelection) {
    // deterministic MDP + deterministic policy = permutation-like 0/1 matrix
    Matrix t0(2, 2), t1(2, 2);
    t0 << 0.0, 1.0, 1.0, 0.0;
    t1 << 1.0, 0.0, 0.0, 1.0;
    Matrix r = Matrix::Zero(2, 2);
    TabularMdp mdp({t0, t1}, r);
    Matrix p = induced_chain(mdp, TabularPolicy::deterministic(2, {0, 0}));
    EXPECT_LT((p - t0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InducedChain, IdenticalActionsMarginalizeToThemselves) {
    Matrix t(2, 2);
    t << 0.3, 0.7, 0.6, 0.4;
    Matrix r = Matrix::Zero(2, 2);
    TabularMdp mdp({t, t}, r);
    Matrix p = induced_chain(mdp, TabularPolicy::uniform(2, 2));
    EXPECT_LT((p - t).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InducedChain, Figure1PureLeftWalksLeftCycle) {
    TabularMdp mdp = figure1_mdp();
    Matrix p = induced_chain(mdp, figure1_pure_left());
    Matrix want = Matrix::Zero(5, 5);
    want(0, 1) = want(1, 2) = want(2, 0) = 1.0; // the chosen 3-cycle
    want(3, 4) = want(4, 0) = 1.0;              // other branch drains back
    EXPECT_LT((p - want).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InducedChain, ShapeMismatchThrows) {
    TabularMdp mdp = figure1_mdp();
    EXPECT_THROW(induced_chain(mdp, TabularPolicy::uniform(4, 2)), DimensionError);
}

// ---------------------------------------------------------------------------
// stationary_distribution
// ---------------------------------------------------------------------------

TEST(Stationary, DoublyStochasticIsUniform) {
    Matrix p(3, 3);
    p << 0.2, 0.5, 0.3, 0.5, 0.3, 0.2, 0.3, 0.2, 0.5;
    Vector pi = stationary_distribution(p);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(pi(i), 1.0 / 3.0, 1e-12);
}

TEST(Stationary, TwoStateClosedForm) {
    double p = 0.3, q = 0.6;
    Matrix t(2, 2);
    t << 1.0 - p, p, q, 1.0 - q;
    Vector pi = stationary_distribution(t);
    EXPECT_NEAR(pi(0), q / (p + q), 1e-12); // 2/3
    EXPECT_NEAR(pi(1), p / (p + q), 1e-12); // 1/3
}

TEST(Stationary, PeriodicCycleIsUniform) {
    Matrix p = Matrix::Zero(3, 3);
    p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
    Vector pi = stationary_distribution(p);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(pi(i), 1.0 / 3.0, 1e-12);
}

TEST(Stationary, TransientStatesGetZeroMass) {
    Matrix p(2, 2);
    p << 0.0, 1.0, 0.0, 1.0;
    Vector pi = stationary_distribution(p);
    EXPECT_NEAR(pi(0), 0.0, 1e-14);
    EXPECT_NEAR(pi(1), 1.0, 1e-14);
}

TEST(Stationary, TwoClosedClassesThrowWithBlockNames) {
    Matrix p = Matrix::Identity(2, 2);
    try {
        stationary_distribution(p);
        FAIL() << "expected SingularChainError";
    } catch (const SingularChainError& e) {
        EXPECT_NE(std::string(e.what()).find("{0}"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("{1}"), std::string::npos);
    }
}

TEST(Stationary, FixedPointInvariantOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        TabularMdp mdp = random_ergodic_mdp(2 + static_cast<int>(seed % 7), 3, seed);
        TabularPolicy policy = random_policy(mdp.n_states(), 3, seed + 1000);
        Matrix p = induced_chain(mdp, policy);
        Vector pi = stationary_distribution(p);
        EXPECT_LE((pi.transpose() * p - pi.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
        EXPECT_GE(pi.minCoeff(), 0.0);
    }
}

// ---------------------------------------------------------------------------
// fundamental matrix, Kemeny constant, first passage times
// ---------------------------------------------------------------------------

TEST(Fundamental, RowsEqualToStationaryGiveIdentity) {
    Vector pi(3);
    pi << 0.5, 0.3, 0.2;
    Matrix p = Vector::Ones(3) * pi.transpose();
    FundamentalResult f = fundamental_matrix(p, pi);
    EXPECT_LT((f.z - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(f.kemeny, 3.0, 1e-12);
    EXPECT_FALSE(f.condition_warning);
}

TEST(Fundamental, SymmetricTwoStateKemenyIsTwo) {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Vector pi = stationary_distribution(p);
    EXPECT_NEAR(fundamental_matrix(p, pi).kemeny, 2.0, 1e-12);
}

TEST(Fundamental, DefinitionHolds) {
    Matrix p(2, 2);
    p << 0.7, 0.3, 0.6, 0.4;
    Vector pi = stationary_distribution(p);
    FundamentalResult f = fundamental_matrix(p, pi);
    Matrix m = Matrix::Identity(2, 2) - p + Vector::Ones(2) * pi.transpose();
    EXPECT_LT((m * f.z - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FirstPassage, DeterministicTwoCycle) {
    Matrix p(2, 2);
    p << 0.0, 1.0, 1.0, 0.0;
    Matrix m = mean_first_passage_times(p, stationary_distribution(p));
    EXPECT_NEAR(m(0, 1), 1.0, 1e-12);
    EXPECT_NEAR(m(1, 0), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(m(0, 0), 0.0);
}

TEST(FirstPassage, GeometricExpectation) {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Matrix m = mean_first_passage_times(p, stationary_distribution(p));
    EXPECT_NEAR(m(0, 1), 2.0, 1e-12); // 1 / 0.5
}

TEST(FirstPassage, KemenyRowIndependenceAndTraceAgreement) {
    Matrix p(2, 2);
    p << 0.7, 0.3, 0.6, 0.4;
    Vector pi = stationary_distribution(p);
    Matrix m = mean_first_passage_times(p, pi);
    double kemeny = fundamental_matrix(p, pi).kemeny;
    for (int i = 0; i < 2; ++i) {
        double weighted = 1.0;
        for (int j = 0; j < 2; ++j) weighted += pi(j) * m(i, j);
        EXPECT_NEAR(weighted, kemeny, 1e-10);
    }
}

TEST(FirstPassage, KemenyConsistencySweep) {
    // trace(Z) against the first-passage route on 100 random ergodic chains
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        int n = 2 + static_cast<int>(seed % 7); // up to 8 states
        TabularMdp mdp = random_ergodic_mdp(n, 2, seed + 500);
        TabularPolicy policy = random_policy(n, 2, seed + 1500);
        Matrix p = induced_chain(mdp, policy);
        Vector pi = stationary_distribution(p);
        double kemeny = fundamental_matrix(p, pi).kemeny;
        Matrix m = mean_first_passage_times(p, pi);
        for (int i = 0; i < n; ++i) {
            double weighted = 1.0;
            for (int j = 0; j < n; ++j) weighted += pi(j) * m(i, j);
            EXPECT_NEAR(weighted, kemeny, 1e-6) << "seed " << seed << " row " << i;
        }
    }
}

// ---------------------------------------------------------------------------
// differential values
// ---------------------------------------------------------------------------

TEST(DifferentialValues, ConstantRewardHasZeroValues) {
    TabularMdp mdp = random_ergodic_mdp(4, 2, 3);
    TabularPolicy policy = random_policy(4, 2, 4);
    Matrix reward = Matrix::Constant(4, 2, 2.5);
    DifferentialValues dv = differential_values(mdp, policy, reward);
    EXPECT_NEAR(dv.average, 2.5, 1e-12);
    EXPECT_LT(dv.v.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(dv.adv.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DifferentialValues, PoissonResidualAndCentering) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        int n = 2 + static_cast<int>(seed % 6);
        TabularMdp mdp = random_ergodic_mdp(n, 3, seed + 99);
        TabularPolicy policy = random_policy(n, 3, seed + 199);
        PolicyAnalysis analysis(mdp, policy);
        DifferentialValues dv = differential_values(analysis, mdp.reward_table());

        Vector r_mu = analysis.policy_reward(mdp.reward_table());
        Vector residual = (Matrix::Identity(n, n) - analysis.p_mu()) * dv.v +
                          Vector::Constant(n, dv.average) - r_mu;
        EXPECT_LE(residual.cwiseAbs().maxCoeff(), 1e-8) << "seed " << seed;

        Vector centered = (dv.adv.array() * policy.probs().array()).rowwise().sum();
        EXPECT_LE(centered.cwiseAbs().maxCoeff(), 1e-10) << "seed " << seed;

        EXPECT_LT((dv.adv - (dv.q.colwise() - dv.v)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_NEAR(analysis.pi().dot(dv.v), 0.0, 1e-10); // pinning
    }
}

TEST(DifferentialValues, Figure1AverageIsZero) {
    TabularMdp mdp = figure1_mdp();
    DifferentialValues dv = differential_values(mdp, figure1_pure_left(), mdp.reward_table());
    EXPECT_NEAR(dv.average, 0.0, 1e-12);
}

TEST(DifferentialValues, DifferenceFormulaTwoRoutes) {
    // eta' - eta via the perturbation identity pi'[(P' - P)V + r' - r] and via
    // the advantage expectation; both must match the direct difference.
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        int n = 2 + static_cast<int>(seed % 5);
        TabularMdp mdp = random_ergodic_mdp(n, 3, seed + 7000);
        TabularPolicy mu = random_policy(n, 3, seed + 1);
        TabularPolicy mu_prime = random_policy(n, 3, seed + 2);

        PolicyAnalysis an(mdp, mu);
        PolicyAnalysis an_prime(mdp, mu_prime);
        DifferentialValues dv = differential_values(an, mdp.reward_table());

        double direct = an_prime.average(mdp.reward_table()) - dv.average;

        Vector r_mu = an.policy_reward(mdp.reward_table());
        Vector r_mu_prime = an_prime.policy_reward(mdp.reward_table());
        double perturbation =
            an_prime.pi().dot((an_prime.p_mu() - an.p_mu()) * dv.v + r_mu_prime - r_mu);

        double advantage_form =
            an_prime.pi().dot((dv.adv.array() * mu_prime.probs().array()).rowwise().sum().matrix());

        EXPECT_NEAR(direct, perturbation, 1e-8) << "seed " << seed;
        EXPECT_NEAR(direct, advantage_form, 1e-8) << "seed " << seed;
    }
}

// ---------------------------------------------------------------------------
// policy divergences
// ---------------------------------------------------------------------------

TEST(Divergences, IdenticalPoliciesAreZero) {
    TabularPolicy policy = random_policy(3, 3, 21);
    Vector pi = Vector::Constant(3, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(tv_distance(policy, policy, pi), 0.0);
    EXPECT_DOUBLE_EQ(kl_divergence(policy, policy, pi), 0.0);
}

TEST(Divergences, DisjointDeterministicPoliciesHaveTvOne) {
    TabularPolicy a = TabularPolicy::deterministic(2, {0, 0});
    TabularPolicy b = TabularPolicy::deterministic(2, {1, 1});
    Vector pi(2);
    pi << 0.4, 0.6;
    EXPECT_NEAR(tv_distance(a, b, pi), 1.0, 1e-15);
}

TEST(Divergences, TwoPointKlValue) {
    Matrix pn(1, 2), po(1, 2);
    pn << 0.9, 0.1;
    po << 0.5, 0.5;
    Vector pi = Vector::Ones(1);
    double want = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
    EXPECT_NEAR(kl_divergence(TabularPolicy::from_probs(pn), TabularPolicy::from_probs(po), pi),
                want, 1e-14);
}

TEST(Divergences, PinskerAndGibbsOnRandomPairs) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        TabularPolicy a = random_policy(4, 3, seed);
        TabularPolicy b = random_policy(4, 3, seed + 10000);
        Vector pi = stationary_distribution(
            induced_chain(random_ergodic_mdp(4, 3, seed + 20000), a));
        double tv = tv_distance(a, b, pi);
        double kl = kl_divergence(a, b, pi);
        EXPECT_GE(kl, 0.0);
        EXPECT_LE(tv, std::sqrt(kl / 2.0) + 1e-12) << "seed " << seed;
    }
}

TEST(Divergences, KlThrowsOnMissingSupport) {
    TabularPolicy wide = TabularPolicy::uniform(1, 2);
    TabularPolicy narrow = TabularPolicy::deterministic(2, {0});
    Vector pi = Vector::Ones(1);
    EXPECT_THROW(kl_divergence(wide, narrow, pi), DomainError);
    EXPECT_NO_THROW(kl_divergence(narrow, wide, pi));
}

// ---------------------------------------------------------------------------
// analyze_chain bundle
// ---------------------------------------------------------------------------

TEST(ChainAnalysis, BundleSatisfiesItsInvariants) {
    TabularMdp mdp = random_ergodic_mdp(5, 2, 77);
    TabularPolicy policy = random_policy(5, 2, 78);
    ChainAnalysis ca = analyze_chain(mdp, policy);
    EXPECT_LE((ca.pi.transpose() * ca.p_mu - ca.pi.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(ca.pi.sum(), 1.0, 1e-12);
    Matrix m = Matrix::Identity(5, 5) - ca.p_mu + Vector::Ones(5) * ca.pi.transpose();
    EXPECT_LE((m * ca.fundamental - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(ca.kemeny, ca.fundamental.trace(), 1e-8);
}
