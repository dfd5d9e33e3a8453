#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "semivar/chain.hpp"
#include "semivar/errors.hpp"
#include "semivar/mdp.hpp"

namespace semivar {

/// Negative part: min(0, x). Exactly zero at x = 0, so rewards equal to the
/// mean contribute nothing to the downside statistics.
inline double neg_part(double x) { return std::min(0.0, x); }

/// Steady-state statistics of the reward distribution under a policy:
/// mean, variance, downside semivariance and semimean.
struct RiskStats {
    double eta = 0.0;        // long-run average reward
    double zeta = 0.0;       // long-run variance
    double zeta_minus = 0.0; // long-run downside semivariance
    double eta_minus = 0.0;  // semimean, always <= 0
};

/// Risk trade-off parameters: beta weights the semivariance penalty, eps_mu
/// is the trust-region radius used by the constrained solvers.
struct RiskParams {
    double beta = 1.0;
    double eps_mu = 0.05;
};

inline RiskStats risk_stats(const PolicyAnalysis& analysis) {
    const TabularMdp& mdp = analysis.mdp();
    const Matrix& probs = analysis.policy().probs();
    const Vector& pi = analysis.pi();

    RiskStats out;
    out.eta = analysis.average(mdp.reward_table());
    for (int s = 0; s < mdp.n_states(); ++s) {
        if (pi(s) == 0.0) continue;
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double rho = pi(s) * probs(s, a);
            if (rho == 0.0) continue;
            double dev = mdp.reward(s, a) - out.eta;
            double neg = neg_part(dev);
            out.zeta += rho * dev * dev;
            out.zeta_minus += rho * neg * neg;
            out.eta_minus += rho * neg;
        }
    }
    return out;
}

inline RiskStats risk_stats(const TabularMdp& mdp, const TabularPolicy& policy) {
    return risk_stats(PolicyAnalysis(mdp, policy));
}

/// Mean-semivariance criterion eta - beta * zeta_minus.
inline double msv_value(const RiskStats& stats, double beta) {
    if (beta < 0.0) throw DomainError("msv_value: beta must be >= 0");
    return stats.eta - beta * stats.zeta_minus;
}

/// Mean-variance criterion eta - beta * zeta.
inline double mv_value(const RiskStats& stats, double beta) {
    if (beta < 0.0) throw DomainError("mv_value: beta must be >= 0");
    return stats.eta - beta * stats.zeta;
}

inline double msv_value(const TabularMdp& mdp, const TabularPolicy& policy, double beta) {
    return msv_value(risk_stats(mdp, policy), beta);
}

inline double mv_value(const TabularMdp& mdp, const TabularPolicy& policy, double beta) {
    return mv_value(risk_stats(mdp, policy), beta);
}

/// Pseudo reward with a frozen threshold: f(s,a) = r - beta * (r - lambda)_-^2.
inline Matrix surrogate_f(const TabularMdp& mdp, double lambda, double beta) {
    if (beta < 0.0) throw DomainError("surrogate_f: beta must be >= 0");
    Matrix f = mdp.reward_table();
    for (int s = 0; s < f.rows(); ++s)
        for (int a = 0; a < f.cols(); ++a) {
            double neg = neg_part(f(s, a) - lambda);
            f(s, a) -= beta * neg * neg;
        }
    return f;
}

/// Policy-dependent surrogate reward
///   g(s,a) = (1 + 2 beta eta_minus) r - beta (r - eta)_-^2,
/// whose advantage function drives both the gradient and trust-region
/// updates. `stats` must belong to the policy the surrogate is built at.
inline Matrix surrogate_g(const TabularMdp& mdp, const RiskStats& stats, double beta) {
    if (beta < 0.0) throw DomainError("surrogate_g: beta must be >= 0");
    double scale = 1.0 + 2.0 * beta * stats.eta_minus;
    Matrix g = mdp.reward_table();
    for (int s = 0; s < g.rows(); ++s)
        for (int a = 0; a < g.cols(); ++a) {
            double neg = neg_part(g(s, a) - stats.eta);
            g(s, a) = scale * g(s, a) - beta * neg * neg;
        }
    return g;
}

/// steady-state average of the surrogate: (1 + 2 beta eta_minus) eta - beta zeta_minus.
inline double surrogate_g_average(const RiskStats& stats, double beta) {
    return (1.0 + 2.0 * beta * stats.eta_minus) * stats.eta - beta * stats.zeta_minus;
}

/// Pseudo reward of the mean-variance baseline: r - beta (r - eta)^2.
inline Matrix mv_pseudo_reward(const TabularMdp& mdp, double eta, double beta) {
    Matrix h = mdp.reward_table();
    for (int s = 0; s < h.rows(); ++s)
        for (int a = 0; a < h.cols(); ++a) {
            double dev = h(s, a) - eta;
            h(s, a) -= beta * dev * dev;
        }
    return h;
}

/// Both sides of the exact mean-semivariance difference identity between two
/// policies. lhs is evaluated from two independent steady-state analyses;
/// rhs decomposes into a pseudo-reward advantage term and a mean-shift term.
/// The two must agree to 1e-8; disagreement signals broken linear algebra,
/// not bad input.
struct MsvDiffReport {
    double lhs = 0.0;
    double advantage_term = 0.0;
    double mean_shift_term = 0.0;
    double rhs = 0.0;
};

inline MsvDiffReport msv_difference_exact(const TabularMdp& mdp, const TabularPolicy& policy_old,
                                          const TabularPolicy& policy_new, double beta) {
    if (beta < 0.0) throw DomainError("msv_difference_exact: beta must be >= 0");
    PolicyAnalysis old_an(mdp, policy_old);
    PolicyAnalysis new_an(mdp, policy_new);
    RiskStats old_stats = risk_stats(old_an);
    RiskStats new_stats = risk_stats(new_an);

    MsvDiffReport out;
    out.lhs = msv_value(new_stats, beta) - msv_value(old_stats, beta);

    Matrix f = surrogate_f(mdp, old_stats.eta, beta);
    Matrix adv_f = differential_values(old_an, f).adv;

    const Vector& pi_new = new_an.pi();
    const Matrix& probs_new = policy_new.probs();
    for (int s = 0; s < mdp.n_states(); ++s) {
        if (pi_new(s) == 0.0) continue;
        for (int a = 0; a < mdp.n_actions(); ++a) {
            double rho = pi_new(s) * probs_new(s, a);
            if (rho == 0.0) continue;
            double r = mdp.reward(s, a);
            double neg_new = neg_part(r - new_stats.eta);
            double neg_old = neg_part(r - old_stats.eta);
            out.advantage_term += rho * adv_f(s, a);
            out.mean_shift_term -= beta * rho * (neg_new * neg_new - neg_old * neg_old);
        }
    }
    out.rhs = out.advantage_term + out.mean_shift_term;
    if (std::abs(out.lhs - out.rhs) > 1e-8)
        throw ConsistencyError("msv_difference_exact: identity violated by " +
                               std::to_string(std::abs(out.lhs - out.rhs)));
    return out;
}

/// Advantage table of the surrogate reward g at the given policy.
inline Matrix surrogate_advantages(const PolicyAnalysis& analysis, double beta) {
    RiskStats stats = risk_stats(analysis);
    Matrix g = surrogate_g(analysis.mdp(), stats, beta);
    return differential_values(analysis, g).adv;
}

/// Derivative of the MSV criterion along the probability mixture
/// (1 - nu) policy + nu direction, at nu = 0. Equals the expectation of the
/// surrogate advantage under (pi of policy, direction).
inline double msv_directional_derivative(const TabularMdp& mdp, const TabularPolicy& policy,
                                         const TabularPolicy& direction, double beta) {
    PolicyAnalysis analysis(mdp, policy);
    Matrix adv_g = surrogate_advantages(analysis, beta);
    Vector per_state = (adv_g.array() * direction.probs().array()).rowwise().sum();
    return analysis.pi().dot(per_state);
}

/// Exact gradient of the MSV criterion with respect to every softmax logit:
/// d xi / d theta(s, a) = pi(s) mu(a|s) adv_g(s, a). The gradient is centered
/// per state (softmax gauge invariance).
inline Matrix msv_policy_gradient_exact(const TabularMdp& mdp, const TabularPolicy& policy,
                                        double beta) {
    PolicyAnalysis analysis(mdp, policy);
    Matrix adv_g = surrogate_advantages(analysis, beta);
    return analysis.pi().asDiagonal() * (policy.probs().array() * adv_g.array()).matrix();
}

/// max over (s, a) of the surrogate advantage; <= 0 (up to tolerance) exactly
/// at local optima of the MSV criterion.
inline double optimality_residual(const TabularMdp& mdp, const TabularPolicy& policy,
                                  double beta) {
    PolicyAnalysis analysis(mdp, policy);
    return surrogate_advantages(analysis, beta).maxCoeff();
}

} // namespace semivar
