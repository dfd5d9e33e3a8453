#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>

#include "semivar/chain.hpp"
#include "semivar/environments.hpp"
#include "semivar/risk.hpp"

using namespace semivar;

// ---------------------------------------------------------------------------
// numeric helpers
// ---------------------------------------------------------------------------

TEST(NormalQuantile, InvertsTheCdf) {
    for (double p : {1e-8, 1e-4, 0.02, 0.31, 0.5, 0.73, 0.97, 0.9999, 1.0 - 1e-9}) {
        double x = normal_quantile(p);
        EXPECT_NEAR(normal_cdf(x), p, 1e-13 * std::max(1.0, std::abs(x)));
    }
    EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-14);
    EXPECT_THROW(normal_quantile(0.0), DomainError);
    EXPECT_THROW(normal_quantile(1.0), DomainError);
}

TEST(AdaptiveSimpson, PolynomialAndGaussian) {
    auto cubic = [](double x) { return x * x * x - 2.0 * x + 1.0; };
    EXPECT_NEAR(adaptive_simpson(cubic, 0.0, 2.0, 1e-12), 2.0, 1e-10);
    auto gauss = [](double x) { return normal_pdf(x); };
    EXPECT_NEAR(adaptive_simpson(gauss, -8.0, 8.0, 1e-12), 1.0, 1e-10);
}

// ---------------------------------------------------------------------------
// two-path toy MDP
// ---------------------------------------------------------------------------

TEST(Figure1, CaptionStatisticsExact) {
    TabularMdp mdp = figure1_mdp();
    EXPECT_EQ(mdp.n_states(), 5);
    EXPECT_EQ(mdp.n_actions(), 2);
    EXPECT_DOUBLE_EQ(mdp.r_max(), 2.0);

    RiskStats left = risk_stats(mdp, figure1_pure_left());
    RiskStats right = risk_stats(mdp, figure1_pure_right());
    EXPECT_NEAR(left.eta, 0.0, 1e-12);
    EXPECT_NEAR(left.zeta, 2.0, 1e-12);
    EXPECT_NEAR(left.zeta_minus, 4.0 / 3.0, 1e-12);
    EXPECT_NEAR(right.eta, 0.0, 1e-12);
    EXPECT_NEAR(right.zeta, 2.0, 1e-12);
    EXPECT_NEAR(right.zeta_minus, 2.0 / 3.0, 1e-12);
}

TEST(Figure1, DownsideRiskIsMonotoneInLeftProbability) {
    // the only real decision sits at state 0; more mass on the left path can
    // only increase the semivariance while the mean stays 0
    TabularMdp mdp = figure1_mdp();
    double prev = -1.0;
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        TabularPolicy policy = figure1_pure_right().mix(figure1_pure_left(), p);
        RiskStats stats = risk_stats(mdp, policy);
        EXPECT_NEAR(stats.eta, 0.0, 1e-10);
        EXPECT_GT(stats.zeta_minus, prev);
        prev = stats.zeta_minus;
    }
    EXPECT_NEAR(prev, 4.0 / 3.0, 1e-10);
}

// ---------------------------------------------------------------------------
// bandit arms
// ---------------------------------------------------------------------------

TEST(Bandit, ExactStatsOfNormalArms) {
    BanditSpec spec = BanditSpec::standard();
    ArmStats a1 = bandit_exact_stats(spec, 1);
    EXPECT_DOUBLE_EQ(a1.eta, 0.0);
    EXPECT_DOUBLE_EQ(a1.zeta, 4.0);
    EXPECT_DOUBLE_EQ(a1.zeta_minus, 2.0); // symmetric distribution halves its variance
    ArmStats a2 = bandit_exact_stats(spec, 2);
    EXPECT_DOUBLE_EQ(a2.eta, 1.0);
    EXPECT_DOUBLE_EQ(a2.zeta, 9.0);
    EXPECT_DOUBLE_EQ(a2.zeta_minus, 4.5);
}

TEST(Bandit, LognormalArmQuadratureMatchesClosedForm) {
    BanditSpec spec = BanditSpec::standard();
    ArmStats a0 = bandit_exact_stats(spec, 0);
    EXPECT_DOUBLE_EQ(a0.eta, 0.0);
    EXPECT_NEAR(a0.zeta, std::exp(2.0) - std::exp(1.0), 1e-12);
    // independent route: truncated lognormal moments expressed through the
    // normal CDF, E[(X-m)^2 1{X<m}] with m = e^{1/2}
    double m = std::exp(0.5);
    double closed = std::exp(2.0) * normal_cdf(0.5 - 2.0) -
                    2.0 * m * std::exp(0.5) * normal_cdf(0.5 - 1.0) +
                    m * m * normal_cdf(0.5);
    EXPECT_NEAR(a0.zeta_minus, closed, 1e-10);
    EXPECT_NEAR(a0.zeta_minus, 0.695848031698201, 1e-9);
}

TEST(Bandit, RankingsAtBetaOne) {
    BanditSpec spec = BanditSpec::standard();
    double best_msv = -1e18, best_mv = -1e18, best_mean = -1e18;
    int argmax_msv = -1, argmax_mv = -1, argmax_mean = -1;
    for (int arm = 0; arm < 3; ++arm) {
        ArmStats s = bandit_exact_stats(spec, arm);
        if (s.eta - s.zeta_minus > best_msv) { best_msv = s.eta - s.zeta_minus; argmax_msv = arm; }
        if (s.eta - s.zeta > best_mv) { best_mv = s.eta - s.zeta; argmax_mv = arm; }
        if (s.eta > best_mean) { best_mean = s.eta; argmax_mean = arm; }
    }
    EXPECT_EQ(argmax_msv, 0);
    EXPECT_EQ(argmax_mv, 1);
    EXPECT_EQ(argmax_mean, 2);
}

TEST(Bandit, SampleMeansMatchWithinThreeStandardErrors) {
    BanditSpec spec = BanditSpec::standard();
    const int n = 1000000;
    for (int arm : {0, 1}) {
        Rng rng(42 + static_cast<std::uint64_t>(arm));
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            double x = bandit_sample(spec, arm, rng);
            sum += x;
            sum_sq += x * x;
        }
        double mean = sum / n;
        double se = std::sqrt((sum_sq / n - mean * mean) / n);
        EXPECT_LE(std::abs(mean - 0.0), 3.0 * se) << "arm " << arm;
    }
}

TEST(Bandit, LognormalSamplesBoundedBelowByShift) {
    BanditSpec spec = BanditSpec::standard();
    Rng rng(7);
    double lo = std::exp(0.5);
    for (int i = 0; i < 100000; ++i) EXPECT_GT(bandit_sample(spec, 0, rng), -lo);
    EXPECT_THROW(bandit_sample(spec, 3, rng), DomainError);
}

// ---------------------------------------------------------------------------
// discretized bandit
// ---------------------------------------------------------------------------

TEST(BanditMdp, TwoPointSymmetricArmHalvesVariance) {
    BanditSpec spec = BanditSpec::standard();
    ArmStats d = discretized_arm_stats(spec, 1, 2);
    EXPECT_NEAR(d.zeta_minus, 0.5 * d.zeta, 1e-14);
}

TEST(BanditMdp, PureArmPoliciesReproduceDiscretizedStats) {
    BanditSpec spec = BanditSpec::standard();
    const int n = 16;
    TabularMdp mdp = bandit_as_mdp(spec, n);
    EXPECT_EQ(mdp.n_states(), 3 * n);
    for (int arm = 0; arm < 3; ++arm) {
        TabularPolicy pure =
            TabularPolicy::deterministic(3, std::vector<int>(3 * n, arm));
        RiskStats stats = risk_stats(mdp, pure);
        ArmStats want = discretized_arm_stats(spec, arm, n);
        EXPECT_NEAR(stats.eta, want.eta, 1e-10) << "arm " << arm;
        EXPECT_NEAR(stats.zeta, want.zeta, 1e-9) << "arm " << arm;
        EXPECT_NEAR(stats.zeta_minus, want.zeta_minus, 1e-9) << "arm " << arm;
    }
}

TEST(BanditMdp, DiscretizationConvergesAtFirstOrder) {
    BanditSpec spec = BanditSpec::standard();
    for (int arm = 0; arm < 3; ++arm) {
        double exact = bandit_exact_stats(spec, arm).zeta_minus;
        double prev_err = -1.0;
        for (int n : {16, 64, 256, 1024}) {
            double err = std::abs(discretized_arm_stats(spec, arm, n).zeta_minus - exact);
            if (prev_err > 0.0) EXPECT_GE(prev_err / err, 2.5) << "arm " << arm << " n " << n;
            prev_err = err;
        }
    }
    EXPECT_LE(std::abs(discretized_arm_stats(spec, 1, 1024).zeta_minus - 2.0), 0.02);
}

TEST(BanditMdp, MsvArgmaxAtFineDiscretizationIsArmZero) {
    BanditSpec spec = BanditSpec::standard();
    double best = -1e18;
    int argmax = -1;
    for (int arm = 0; arm < 3; ++arm) {
        ArmStats s = discretized_arm_stats(spec, arm, 1024);
        double msv = s.eta - s.zeta_minus;
        if (msv > best) { best = msv; argmax = arm; }
    }
    EXPECT_EQ(argmax, 0);
}

// ---------------------------------------------------------------------------
// portfolio MDP
// ---------------------------------------------------------------------------

TEST(Portfolio, TableChecksumPinned) {
    PortfolioConfig cfg = PortfolioConfig::defaults();
    long long checksum = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            checksum += llround(100.0 * cfg.asset1(i, j)) * (i * 8 + j + 1);
            checksum += llround(100.0 * cfg.asset2(i, j)) * (i * 8 + j + 65);
        }
    EXPECT_EQ(checksum, 103387);
}

TEST(Portfolio, TablesAreRowStochastic) {
    PortfolioConfig cfg = PortfolioConfig::defaults();
    for (int i = 0; i < 8; ++i) {
        EXPECT_NEAR(cfg.asset1.row(i).sum(), 1.0, 1e-12);
        EXPECT_NEAR(cfg.asset2.row(i).sum(), 1.0, 1e-12);
    }
    EXPECT_NO_THROW(validate_portfolio_config(cfg));
    PortfolioConfig bad = cfg;
    bad.asset1(3, 0) += 0.01;
    try {
        validate_portfolio_config(bad);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    }
}

TEST(Portfolio, DimensionsMatchTheProblem) {
    PortfolioConfig cfg = PortfolioConfig::defaults();
    EXPECT_EQ(portfolio_weight_pairs(cfg).size(), 21u);
    TabularMdp mdp = portfolio_mdp(cfg);
    EXPECT_EQ(mdp.n_states(), 1344);
    EXPECT_EQ(mdp.n_actions(), 21);
}

TEST(Portfolio, WeightBookkeepingAndCashPolicy) {
    PortfolioConfig cfg = PortfolioConfig::defaults();
    TabularMdp mdp = portfolio_mdp(cfg);
    auto pairs = portfolio_weight_pairs(cfg);
    const int n_pairs = static_cast<int>(pairs.size());

    // successor states always store the action's weight pair
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        int s = static_cast<int>(rng.raw() % 1344);
        int a = static_cast<int>(rng.raw() % 21);
        const Matrix& row = mdp.transition(a);
        for (int t = 0; t < 1344; ++t) {
            if (row(s, t) == 0.0) continue;
            EXPECT_EQ(t % n_pairs, a);
        }
    }

    // all-cash forever earns the cash return deterministically
    int cash_action = -1;
    for (int a = 0; a < n_pairs; ++a)
        if (pairs[static_cast<std::size_t>(a)] == std::make_pair(0, 0)) cash_action = a;
    ASSERT_GE(cash_action, 0);
    TabularPolicy cash =
        TabularPolicy::deterministic(21, std::vector<int>(1344, cash_action));
    RiskStats stats = risk_stats(mdp, cash);
    EXPECT_NEAR(stats.eta, cfg.cash_return, 1e-12);
    EXPECT_NEAR(stats.zeta, 0.0, 1e-12);
}

TEST(Portfolio, AssetMarginalIsPolicyIndependent) {
    PortfolioConfig cfg = PortfolioConfig::defaults();
    TabularMdp mdp = portfolio_mdp(cfg);
    Vector asset1_pi = stationary_distribution(cfg.asset1);

    TabularPolicy policy = random_policy(1344, 21, 99);
    Vector pi = stationary_distribution(induced_chain(mdp, policy));
    Vector marginal = Vector::Zero(8);
    for (int s = 0; s < 1344; ++s) marginal(s / (8 * 21)) += pi(s);
    EXPECT_LT((marginal - asset1_pi).cwiseAbs().maxCoeff(), 1e-9);
}

// ---------------------------------------------------------------------------
// random instance generator
// ---------------------------------------------------------------------------

TEST(RandomMdp, StrictlyPositiveRowsAndDeterministic) {
    TabularMdp a = random_ergodic_mdp(5, 3, 123);
    TabularMdp b = random_ergodic_mdp(5, 3, 123);
    for (int act = 0; act < 3; ++act) {
        EXPECT_GT(a.transition(act).minCoeff(), 0.0);
        EXPECT_EQ((a.transition(act) - b.transition(act)).cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_EQ((a.reward_table() - b.reward_table()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(RandomMdp, UniformChainIrreducibleForManySeeds) {
    // constructor throws if the uniform-policy chain were reducible
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
        EXPECT_NO_THROW(random_ergodic_mdp(2 + static_cast<int>(seed % 6), 2, seed));
}

TEST(RandomMdp, RewardScaleRespected) {
    TabularMdp mdp = random_ergodic_mdp(6, 2, 9, 0.5);
    EXPECT_LE(mdp.reward_table().cwiseAbs().maxCoeff(), 0.5);
}
