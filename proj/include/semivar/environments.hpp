#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semivar/errors.hpp"
#include "semivar/mdp.hpp"
#include "semivar/rng.hpp"

namespace semivar {

// ---------------------------------------------------------------------------
// Numeric helpers
// ---------------------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

/// Inverse standard normal CDF. Acklam's rational approximation followed by
/// one Halley refinement; absolute error well below 1e-13 over (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must be in (0, 1)");
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    double x;
    if (p < 0.02425) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 0.97575) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double e = normal_cdf(x) - p;
    double u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
template <typename F>
double adaptive_simpson(F&& f, double lo, double hi, double tol, int max_depth = 48) {
    auto simpson = [&](double a, double b, double fa, double fm, double fb) {
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    };
    struct Frame {
        double a, b, fa, fm, fb, whole;
        int depth;
    };
    double m0 = 0.5 * (lo + hi);
    double f_lo = f(lo), f_m = f(m0), f_hi = f(hi);
    std::vector<Frame> stack{{lo, hi, f_lo, f_m, f_hi, simpson(lo, hi, f_lo, f_m, f_hi), 0}};
    double total = 0.0;
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        double m = 0.5 * (fr.a + fr.b);
        double lm = 0.5 * (fr.a + m), rm = 0.5 * (m + fr.b);
        double flm = f(lm), frm = f(rm);
        double left = simpson(fr.a, m, fr.fa, flm, fr.fm);
        double right = simpson(m, fr.b, fr.fm, frm, fr.fb);
        double err = left + right - fr.whole;
        if (std::abs(err) <= 15.0 * tol * std::max(1e-3, (fr.b - fr.a) / (hi - lo))) {
            total += left + right + err / 15.0;
            continue;
        }
        if (fr.depth >= max_depth)
            throw PrecisionError("adaptive_simpson: tolerance not met at max depth");
        stack.push_back({fr.a, m, fr.fa, flm, fr.fm, left, fr.depth + 1});
        stack.push_back({m, fr.b, fr.fm, frm, fr.fb, right, fr.depth + 1});
    }
    return total;
}

// ---------------------------------------------------------------------------
// Two-path toy MDP
// ---------------------------------------------------------------------------

/// Five-state MDP with one decision state (state 0) sitting on two
/// deterministic 3-cycles. Action 0 walks the cycle 0 -> 1 -> 2 -> 0 with
/// rewards (-2, +1, +1); action 1 walks 0 -> 3 -> 4 -> 0 with rewards
/// (+2, -1, -1). Away from state 0 both actions advance the current cycle, so
/// the only real choice is the path taken at the decision state. Both pure
/// policies earn average 0 with variance 2; the left path has downside
/// semivariance 4/3 and the right path 2/3.
inline TabularMdp figure1_mdp() {
    const int S = 5, A = 2;
    std::vector<Matrix> p(A, Matrix::Zero(S, S));
    // successor of every non-decision state is fixed
    for (int a = 0; a < A; ++a) {
        p[a](1, 2) = 1.0;
        p[a](2, 0) = 1.0;
        p[a](3, 4) = 1.0;
        p[a](4, 0) = 1.0;
    }
    p[0](0, 1) = 1.0; // left
    p[1](0, 3) = 1.0; // right

    Matrix r(S, A);
    r.row(0) << -2.0, 2.0;
    r.row(1) << 1.0, 1.0;
    r.row(2) << 1.0, 1.0;
    r.row(3) << -1.0, -1.0;
    r.row(4) << -1.0, -1.0;
    return TabularMdp(std::move(p), std::move(r));
}

inline TabularPolicy figure1_pure_left() { return TabularPolicy::deterministic(2, {0, 0, 0, 0, 0}); }
inline TabularPolicy figure1_pure_right() { return TabularPolicy::deterministic(2, {1, 1, 1, 1, 1}); }

// ---------------------------------------------------------------------------
// Three-armed bandit
// ---------------------------------------------------------------------------

struct BanditArm {
    enum class Kind { shifted_log_normal, normal };
    Kind kind = Kind::normal;
    double log_mu = 0.0;    // parameters of the underlying normal (lognormal arms)
    double log_sigma = 1.0;
    double mean = 0.0;      // closed-form mean of the arm
    double stddev = 1.0;    // normal arms only
    double shift = 0.0;     // subtracted from lognormal draws
};

/// The three reward distributions of the bandit benchmark: a zero-mean
/// shifted lognormal, N(0, 2^2) and N(1, 3^2).
struct BanditSpec {
    std::array<BanditArm, 3> arms;

    static BanditSpec standard() {
        BanditSpec spec;
        BanditArm arm0;
        arm0.kind = BanditArm::Kind::shifted_log_normal;
        arm0.log_mu = 0.0;
        arm0.log_sigma = 1.0;
        arm0.shift = std::exp(0.5); // lognormal(0,1) mean, so the arm mean is 0
        arm0.mean = 0.0;
        BanditArm arm1;
        arm1.kind = BanditArm::Kind::normal;
        arm1.mean = 0.0;
        arm1.stddev = 2.0;
        BanditArm arm2;
        arm2.kind = BanditArm::Kind::normal;
        arm2.mean = 1.0;
        arm2.stddev = 3.0;
        spec.arms = {arm0, arm1, arm2};
        return spec;
    }
};

inline double bandit_sample(const BanditSpec& spec, int arm, Rng& rng) {
    if (arm < 0 || arm >= 3) throw DomainError("bandit_sample: arm must be 0, 1 or 2");
    const BanditArm& d = spec.arms[static_cast<std::size_t>(arm)];
    double z = rng.normal();
    if (d.kind == BanditArm::Kind::shifted_log_normal)
        return std::exp(d.log_mu + d.log_sigma * z) - d.shift;
    return d.mean + d.stddev * z;
}

/// Exact steady statistics of repeatedly pulling one arm.
struct ArmStats {
    double eta = 0.0;
    double zeta = 0.0;
    double zeta_minus = 0.0;
};

/// Closed forms for the normal arms (downside semivariance is half the
/// variance); the lognormal arm's semivariance comes from adaptive quadrature
/// of (x - m)^2 against the lognormal density over (0, m), to 1e-10.
inline ArmStats bandit_exact_stats(const BanditSpec& spec, int arm) {
    if (arm < 0 || arm >= 3) throw DomainError("bandit_exact_stats: arm must be 0, 1 or 2");
    const BanditArm& d = spec.arms[static_cast<std::size_t>(arm)];
    ArmStats out;
    if (d.kind == BanditArm::Kind::normal) {
        out.eta = d.mean;
        out.zeta = d.stddev * d.stddev;
        out.zeta_minus = 0.5 * out.zeta;
        return out;
    }
    double s2 = d.log_sigma * d.log_sigma;
    double raw_mean = std::exp(d.log_mu + 0.5 * s2);
    out.eta = raw_mean - d.shift;
    out.zeta = (std::exp(s2) - 1.0) * std::exp(2.0 * d.log_mu + s2);
    // downside threshold in raw lognormal coordinates
    double m = out.eta + d.shift;
    auto integrand = [&](double x) {
        if (x <= 0.0) return 0.0;
        double z = (std::log(x) - d.log_mu) / d.log_sigma;
        double density = normal_pdf(z) / (x * d.log_sigma);
        double dev = x - m;
        return dev * dev * density;
    };
    out.zeta_minus = adaptive_simpson(integrand, 1e-14, m, 1e-11);
    return out;
}

/// Quantile midpoint of one arm's distribution at probability p.
inline double bandit_quantile(const BanditSpec& spec, int arm, double p) {
    const BanditArm& d = spec.arms[static_cast<std::size_t>(arm)];
    double z = normal_quantile(p);
    if (d.kind == BanditArm::Kind::shifted_log_normal)
        return std::exp(d.log_mu + d.log_sigma * z) - d.shift;
    return d.mean + d.stddev * z;
}

/// Statistics of the n-point quantile-midpoint discretization of one arm.
inline ArmStats discretized_arm_stats(const BanditSpec& spec, int arm, int n_quantiles) {
    if (n_quantiles < 2) throw DomainError("discretized_arm_stats: need n_quantiles >= 2");
    ArmStats out;
    std::vector<double> q(static_cast<std::size_t>(n_quantiles));
    for (int j = 0; j < n_quantiles; ++j)
        q[static_cast<std::size_t>(j)] =
            bandit_quantile(spec, arm, (j + 0.5) / n_quantiles);
    for (double v : q) out.eta += v;
    out.eta /= n_quantiles;
    for (double v : q) {
        double dev = v - out.eta;
        out.zeta += dev * dev;
        double neg = std::min(0.0, dev);
        out.zeta_minus += neg * neg;
    }
    out.zeta /= n_quantiles;
    out.zeta_minus /= n_quantiles;
    return out;
}

/// Tabular realization of the bandit: each arm is a deterministic cycle over
/// n_quantiles outcome states carrying that arm's quantile-midpoint rewards.
/// In any state, action k continues arm k's cycle (entering at its head when
/// switching arms), so a pure-arm policy visits that arm's quantile values
/// uniformly and reproduces the discretized arm statistics exactly.
inline TabularMdp bandit_as_mdp(const BanditSpec& spec, int n_quantiles) {
    if (n_quantiles < 2) throw DomainError("bandit_as_mdp: need n_quantiles >= 2");
    const int S = 3 * n_quantiles, A = 3;
    auto id = [&](int arm, int j) { return arm * n_quantiles + j; };
    std::vector<Matrix> p(A, Matrix::Zero(S, S));
    Matrix r(S, A);
    for (int arm = 0; arm < 3; ++arm) {
        for (int j = 0; j < n_quantiles; ++j) {
            int s = id(arm, j);
            double value = bandit_quantile(spec, arm, (j + 0.5) / n_quantiles);
            for (int a = 0; a < A; ++a) {
                r(s, a) = value;
                if (a == arm)
                    p[a](s, id(arm, (j + 1) % n_quantiles)) = 1.0;
                else
                    p[a](s, id(a, 0)) = 1.0;
            }
        }
    }
    return TabularMdp(std::move(p), std::move(r));
}

// ---------------------------------------------------------------------------
// Portfolio management MDP
// ---------------------------------------------------------------------------

/// Two risky assets plus cash. Asset gains move on an 8-level grid with
/// independent per-asset transition matrices; portfolio weights move on a
/// 6-level grid with at most full allocation; rebalancing pays a proportional
/// transaction cost. State = (gain level of asset 1, gain level of asset 2,
/// committed weight pair); action = the weight pair to hold next. Weights are
/// committed before the gains move, so holding risky assets carries risk.
struct PortfolioConfig {
    double cash_return = 0.01;
    double transaction_cost = 0.05;
    std::vector<double> gains = {-0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<double> weight_levels = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    Matrix asset1;
    Matrix asset2;

    static PortfolioConfig defaults() {
        PortfolioConfig cfg;
        cfg.asset1.resize(8, 8);
        cfg.asset1 << 0.09, 0.05, 0.25, 0.24, 0.18, 0.05, 0.10, 0.04,
                      0.05, 0.02, 0.33, 0.22, 0.17, 0.09, 0.06, 0.06,
                      0.04, 0.03, 0.26, 0.24, 0.18, 0.07, 0.12, 0.06,
                      0.04, 0.04, 0.20, 0.28, 0.26, 0.08, 0.03, 0.07,
                      0.00, 0.02, 0.16, 0.24, 0.27, 0.11, 0.15, 0.05,
                      0.07, 0.02, 0.16, 0.19, 0.25, 0.14, 0.12, 0.05,
                      0.02, 0.04, 0.14, 0.19, 0.18, 0.20, 0.17, 0.06,
                      0.03, 0.03, 0.09, 0.19, 0.23, 0.15, 0.14, 0.14;
        cfg.asset2.resize(8, 8);
        cfg.asset2 << 0.13, 0.10, 0.08, 0.09, 0.20, 0.36, 0.02, 0.02,
                      0.06, 0.11, 0.09, 0.12, 0.17, 0.37, 0.04, 0.04,
                      0.01, 0.06, 0.12, 0.15, 0.25, 0.35, 0.02, 0.04,
                      0.06, 0.06, 0.12, 0.15, 0.22, 0.34, 0.01, 0.04,
                      0.02, 0.04, 0.09, 0.24, 0.23, 0.32, 0.04, 0.02,
                      0.04, 0.07, 0.11, 0.20, 0.26, 0.27, 0.03, 0.02,
                      0.10, 0.11, 0.13, 0.16, 0.17, 0.20, 0.04, 0.09,
                      0.01, 0.10, 0.30, 0.21, 0.16, 0.16, 0.00, 0.06;
        return cfg;
    }
};

/// Feasible weight pairs (index into weight_levels for assets 1 and 2) with
/// total allocation at most 1, enumerated in lexicographic order.
inline std::vector<std::pair<int, int>> portfolio_weight_pairs(const PortfolioConfig& cfg) {
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(cfg.weight_levels.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (cfg.weight_levels[static_cast<std::size_t>(i)] +
                    cfg.weight_levels[static_cast<std::size_t>(j)] <= 1.0 + 1e-12)
                pairs.emplace_back(i, j);
    return pairs;
}

inline int portfolio_state_index(const PortfolioConfig& cfg, int ix1, int ix2, int iw) {
    const int n_gain = static_cast<int>(cfg.gains.size());
    const int n_pairs = static_cast<int>(portfolio_weight_pairs(cfg).size());
    return (ix1 * n_gain + ix2) * n_pairs + iw;
}

inline void validate_portfolio_config(const PortfolioConfig& cfg) {
    const int n_gain = static_cast<int>(cfg.gains.size());
    for (const auto* m : {&cfg.asset1, &cfg.asset2}) {
        std::string name = (m == &cfg.asset1) ? "asset1" : "asset2";
        if (m->rows() != n_gain || m->cols() != n_gain)
            throw ValidationError("portfolio: " + name + " matrix must be " +
                                  std::to_string(n_gain) + "x" + std::to_string(n_gain));
        for (int i = 0; i < n_gain; ++i) {
            double row_sum = m->row(i).sum();
            if (std::abs(row_sum - 1.0) > 1e-12)
                throw ValidationError("portfolio: " + name + " row " + std::to_string(i) +
                                      " sums to " + std::to_string(row_sum));
            for (int j = 0; j < n_gain; ++j)
                if ((*m)(i, j) < 0.0)
                    throw ValidationError("portfolio: " + name + " entry (" + std::to_string(i) +
                                          "," + std::to_string(j) + ") is negative");
        }
    }
}

/// Each step pays the committed weights against the state's gains and
/// charges the rebalance ordered now; the successor state stores the
/// action's weight pair alongside independently moving asset gains.
inline TabularMdp portfolio_mdp(const PortfolioConfig& cfg) {
    validate_portfolio_config(cfg);
    auto pairs = portfolio_weight_pairs(cfg);
    const int n_gain = static_cast<int>(cfg.gains.size());
    const int n_pairs = static_cast<int>(pairs.size());
    const int S = n_gain * n_gain * n_pairs;
    const int A = n_pairs;

    auto level = [&](int pair_index, bool second) {
        const auto& pr = pairs[static_cast<std::size_t>(pair_index)];
        return cfg.weight_levels[static_cast<std::size_t>(second ? pr.second : pr.first)];
    };

    std::vector<Matrix> p(static_cast<std::size_t>(A), Matrix::Zero(S, S));
    Matrix r(S, A);
    for (int ix1 = 0; ix1 < n_gain; ++ix1) {
        for (int ix2 = 0; ix2 < n_gain; ++ix2) {
            for (int iw = 0; iw < n_pairs; ++iw) {
                int s = portfolio_state_index(cfg, ix1, ix2, iw);
                double w1 = level(iw, false);
                double w2 = level(iw, true);
                double w0 = 1.0 - w1 - w2;
                double holding = w0 * cfg.cash_return +
                                 w1 * cfg.gains[static_cast<std::size_t>(ix1)] +
                                 w2 * cfg.gains[static_cast<std::size_t>(ix2)];
                for (int a = 0; a < A; ++a) {
                    double n1 = level(a, false);
                    double n2 = level(a, true);
                    r(s, a) = holding - cfg.transaction_cost *
                                            (std::abs(n1 - w1) + std::abs(n2 - w2));
                    for (int jx1 = 0; jx1 < n_gain; ++jx1) {
                        double p1 = cfg.asset1(ix1, jx1);
                        if (p1 == 0.0) continue;
                        for (int jx2 = 0; jx2 < n_gain; ++jx2) {
                            double p2 = cfg.asset2(ix2, jx2);
                            if (p2 == 0.0) continue;
                            p[static_cast<std::size_t>(a)](s, portfolio_state_index(cfg, jx1, jx2, a)) = p1 * p2;
                        }
                    }
                }
            }
        }
    }
    return TabularMdp(std::move(p), std::move(r));
}

// ---------------------------------------------------------------------------
// Random test instances
// ---------------------------------------------------------------------------

/// Random MDP with strictly positive transition rows (flat Dirichlet), so
/// every policy induces an irreducible chain. Rewards are uniform in
/// [-reward_scale, reward_scale]. Fully determined by the seed.
inline TabularMdp random_ergodic_mdp(int n_states, int n_actions, std::uint64_t seed,
                                     double reward_scale = 1.0) {
    if (n_states < 1 || n_actions < 1)
        throw DomainError("random_ergodic_mdp: need at least one state and action");
    Rng rng(seed);
    std::vector<Matrix> p(static_cast<std::size_t>(n_actions), Matrix(n_states, n_states));
    for (int a = 0; a < n_actions; ++a) {
        for (int s = 0; s < n_states; ++s) {
            double total = 0.0;
            for (int t = 0; t < n_states; ++t) {
                double e = rng.exponential();
                p[static_cast<std::size_t>(a)](s, t) = e;
                total += e;
            }
            p[static_cast<std::size_t>(a)].row(s) /= total;
        }
    }
    Matrix r(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) r(s, a) = rng.uniform(-reward_scale, reward_scale);
    return TabularMdp(std::move(p), std::move(r));
}

/// Random softmax policy with logits uniform in [-scale, scale].
inline TabularPolicy random_policy(int n_states, int n_actions, std::uint64_t seed,
                                   double scale = 1.0) {
    Rng rng(seed);
    Matrix logits(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) logits(s, a) = rng.uniform(-scale, scale);
    return TabularPolicy::from_logits(std::move(logits));
}

} // namespace semivar
