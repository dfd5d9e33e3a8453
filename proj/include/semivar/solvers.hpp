#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "semivar/chain.hpp"
#include "semivar/errors.hpp"
#include "semivar/mdp.hpp"
#include "semivar/risk.hpp"

namespace semivar {

struct SolverConfig {
    double beta = 1.0;
    double eps_mu = 0.05;              // KL trust-region radius per step
    int max_iters = 2000;
    double convergence_tol_xi = 1e-8;  // on the criterion change between steps
    double convergence_tol_tv = 1e-6;  // on the policy change between steps
    double convergence_tol_residual = 1e-5; // on the local optimality residual
    double dual_lo = 1e-6;             // temperature bracket
    double dual_hi = 1e6;
    double dual_tol = 1e-10;           // relative bracket width at termination
    // Tighten the per-step radius to the current optimality residual once it
    // falls below eps_mu. Near a mixed local optimum the quadratic slack of
    // the improvement bound would otherwise allow chattering around it.
    bool adaptive_radius = true;
    // Kemeny-dependent bound terms cost an extra matrix inverse per step, so
    // they are recorded only on chains up to this size unless forced.
    int bound_terms_max_states = 64;
    bool force_bound_terms = false;

    void validate() const {
        if (beta < 0.0) throw ValidationError("solver config: beta must be >= 0");
        if (eps_mu <= 0.0) throw ValidationError("solver config: eps_mu must be > 0");
        if (max_iters < 1) throw ValidationError("solver config: max_iters must be >= 1");
        if (convergence_tol_xi <= 0.0 || convergence_tol_tv <= 0.0 ||
            convergence_tol_residual <= 0.0 || dual_tol <= 0.0)
            throw ValidationError("solver config: tolerances must be > 0");
        if (dual_lo <= 0.0 || dual_lo >= dual_hi)
            throw ValidationError("solver config: dual bracket must satisfy 0 < lo < hi");
    }
};

struct IterationRecord {
    double eta = 0.0;
    double zeta_minus = 0.0;
    double xi_minus = 0.0;
    double kl_step = std::numeric_limits<double>::quiet_NaN();
    double dual_temperature = std::numeric_limits<double>::quiet_NaN();
    double optimality_residual = std::numeric_limits<double>::quiet_NaN();
    double lower_bound_rhs = std::numeric_limits<double>::quiet_NaN();
};

using IterationTrace = std::vector<IterationRecord>;

struct SolveResult {
    TabularPolicy policy;
    IterationTrace trace;
    bool converged = false;
    int iterations = 0;
    RiskStats stats;
    double optimality_residual = 0.0;
};

namespace detail {

/// Exponentiated tilt of one policy row at temperature upsilon, with the
/// row maximum shifted out of the exponent.
inline void tilt_row(const Matrix& probs, const Matrix& adv, int s, double upsilon,
                     Matrix& out) {
    const int A = static_cast<int>(probs.cols());
    double m = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a)
        if (probs(s, a) > 0.0) m = std::max(m, adv(s, a));
    double z = 0.0;
    for (int a = 0; a < A; ++a) {
        double w = probs(s, a) > 0.0 ? probs(s, a) * std::exp((adv(s, a) - m) / upsilon) : 0.0;
        out(s, a) = w;
        z += w;
    }
    out.row(s) /= z;
}

inline Matrix tilt_policy(const Matrix& probs, const Matrix& adv, double upsilon) {
    Matrix out(probs.rows(), probs.cols());
    for (int s = 0; s < probs.rows(); ++s) tilt_row(probs, adv, s, upsilon, out);
    return out;
}

/// Expected KL(tilted || policy) under pi at temperature upsilon, using
/// KL = (E_tilt[A] - max A)/upsilon - log Z per state.
inline double tilt_kl(const Matrix& probs, const Matrix& adv, const Vector& pi,
                      double upsilon) {
    const int S = static_cast<int>(probs.rows());
    const int A = static_cast<int>(probs.cols());
    double total = 0.0;
    for (int s = 0; s < S; ++s) {
        if (pi(s) == 0.0) continue;
        double m = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a)
            if (probs(s, a) > 0.0) m = std::max(m, adv(s, a));
        double z = 0.0, mean_adv = 0.0;
        for (int a = 0; a < A; ++a) {
            if (probs(s, a) <= 0.0) continue;
            double w = probs(s, a) * std::exp((adv(s, a) - m) / upsilon);
            z += w;
            mean_adv += w * adv(s, a);
        }
        mean_adv /= z;
        total += pi(s) * ((mean_adv - m) / upsilon - std::log(z));
    }
    return std::max(total, 0.0);
}

/// Dual objective L(upsilon) = upsilon eps + upsilon sum_s pi(s) log Z_s.
inline double dual_value(const Matrix& probs, const Matrix& adv, const Vector& pi,
                         double eps_mu, double upsilon) {
    const int S = static_cast<int>(probs.rows());
    const int A = static_cast<int>(probs.cols());
    double total = upsilon * eps_mu;
    for (int s = 0; s < S; ++s) {
        if (pi(s) == 0.0) continue;
        double m = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a)
            if (probs(s, a) > 0.0) m = std::max(m, adv(s, a));
        double z = 0.0;
        for (int a = 0; a < A; ++a)
            if (probs(s, a) > 0.0) z += probs(s, a) * std::exp((adv(s, a) - m) / upsilon);
        total += pi(s) * (m + upsilon * std::log(z));
    }
    return total;
}

} // namespace detail

/// Temperature of the KL-constrained exponentiated policy update.
///
/// Minimizes the convex dual
///   L(upsilon) = upsilon eps_mu + upsilon sum_s pi(s) log sum_a mu(a|s)
///                exp(A(s,a)/upsilon)
/// over a log-spaced bracket: golden-section narrowing followed by a sign
/// bisection on dL/dupsilon = eps_mu - KL(upsilon). When even the sharpest
/// bracketed tilt stays inside the KL ball the lower edge is returned (the
/// constraint is slack, the update degenerates to a greedy step, and for a
/// zero advantage table to the identity). A minimizer pinned at the upper
/// edge means the bracket cannot satisfy the constraint and is an error.
inline double solve_dual_temperature(const Matrix& adv, const Vector& pi,
                                     const TabularPolicy& policy, double eps_mu,
                                     const SolverConfig& config) {
    if (eps_mu <= 0.0) throw ValidationError("solve_dual_temperature: eps_mu must be > 0");
    if (!adv.allFinite()) throw ValidationError("solve_dual_temperature: advantages not finite");
    const Matrix& probs = policy.probs();
    auto slope = [&](double u) { return eps_mu - detail::tilt_kl(probs, adv, pi, u); };

    double lo = config.dual_lo, hi = config.dual_hi;
    if (slope(lo) >= 0.0) return lo;
    if (slope(hi) < 0.0)
        throw BracketError("solve_dual_temperature: dual minimizer at the upper bracket edge "
                           "(KL still above eps_mu at upsilon=" + std::to_string(hi) +
                           "); widen dual_bracket");

    // golden-section on log(upsilon) narrows around the minimum of L
    const double inv_phi = 0.6180339887498949;
    double a = std::log(lo), b = std::log(hi);
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = detail::dual_value(probs, adv, pi, eps_mu, std::exp(c));
    double fd = detail::dual_value(probs, adv, pi, eps_mu, std::exp(d));
    for (int it = 0; it < 64 && (b - a) > 0.5; ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = detail::dual_value(probs, adv, pi, eps_mu, std::exp(c));
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = detail::dual_value(probs, adv, pi, eps_mu, std::exp(d));
        }
    }
    lo = std::max(config.dual_lo, std::exp(a) * 0.5);
    hi = std::min(config.dual_hi, std::exp(b) * 2.0);
    if (slope(lo) >= 0.0) return lo;
    while (slope(hi) < 0.0) {
        hi *= 2.0;
        if (hi > config.dual_hi * 4.0)
            throw BracketError("solve_dual_temperature: refinement left the bracket");
    }

    // bisection on the dual slope; KL(upsilon) is decreasing in upsilon
    while (hi - lo > config.dual_tol * hi) {
        double mid = std::sqrt(lo * hi);
        if (slope(mid) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

struct StepDiagnostics {
    double realized_kl = 0.0;
    double surrogate_improvement = 0.0; // L_g at the new policy, >= 0
    double dual_temperature = 0.0;
};

namespace detail {

/// One trust-region step from an already-analyzed policy. The exponentiated
/// update mu' ~ mu exp(A/upsilon) is applied in logit space, so actions whose
/// probabilities underflow keep accumulating score and can recover when the
/// surrogate later favors them.
inline std::pair<TabularPolicy, StepDiagnostics> msvtrpi_step_from(
    const PolicyAnalysis& analysis, const Matrix& adv_g, const SolverConfig& config) {
    const TabularPolicy& policy = analysis.policy();
    const Vector& pi = analysis.pi();

    StepDiagnostics diag;
    diag.dual_temperature =
        solve_dual_temperature(adv_g, pi, policy, config.eps_mu, config);
    diag.realized_kl = tilt_kl(policy.probs(), adv_g, pi, diag.dual_temperature);

    // the dual solve leaves realized KL within tolerance of eps_mu; nudge the
    // temperature up if floating error left it above the ceiling
    double ceiling = config.eps_mu * (1.0 + 1e-6);
    while (diag.realized_kl > ceiling) {
        diag.dual_temperature *= 1.01;
        diag.realized_kl = tilt_kl(policy.probs(), adv_g, pi, diag.dual_temperature);
    }

    TabularPolicy next =
        TabularPolicy::from_logits(policy.logits() + adv_g / diag.dual_temperature);
    Vector gain = (adv_g.array() * next.probs().array()).rowwise().sum();
    diag.surrogate_improvement = pi.dot(gain);
    return {std::move(next), diag};
}

} // namespace detail

/// One closed-form trust-region update: exponentiate the surrogate advantage
/// at the dual temperature and renormalize per state. The realized KL step
/// never exceeds eps_mu (up to 1e-6 relative) and the surrogate improvement
/// is nonnegative.
inline std::pair<TabularPolicy, StepDiagnostics> msvtrpi_step(const TabularMdp& mdp,
                                                              const TabularPolicy& policy,
                                                              const SolverConfig& config) {
    config.validate();
    PolicyAnalysis analysis(mdp, policy);
    Matrix adv_g = surrogate_advantages(analysis, config.beta);
    return detail::msvtrpi_step_from(analysis, adv_g, config);
}

namespace detail {

inline bool record_bounds(const SolverConfig& config, int n_states) {
    return config.force_bound_terms || n_states <= config.bound_terms_max_states;
}

/// Kemeny's constant from a chain analysis pair; trace((I - P + e w^T)^-1)
/// is independent of the probability row w, so the new policy's analysis
/// matrix gives it directly.
inline double kemeny_of(const PolicyAnalysis& analysis) {
    const int n = static_cast<int>(analysis.p_mu().rows());
    Vector w = Vector::Constant(n, 1.0 / n);
    Matrix m = Matrix::Identity(n, n) - analysis.p_mu() + Vector::Ones(n) * w.transpose();
    return Eigen::PartialPivLU<Matrix>(m).inverse().trace();
}

} // namespace detail

/// Trust-region policy iteration for the mean-semivariance criterion.
///
/// Rebuilds the surrogate reward at the current policy each iteration and
/// takes the closed-form KL-constrained step. Convergence requires the
/// criterion change, the policy movement and the local optimality residual
/// to all fall below their tolerances, and the returned policy is the one
/// whose residual was verified. On non-convergence the best policy seen is
/// returned with `converged` false.
inline SolveResult msvtrpi(const TabularMdp& mdp, const SolverConfig& config,
                           std::optional<TabularPolicy> initial = std::nullopt) {
    config.validate();
    TabularPolicy policy =
        initial.value_or(TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()));

    SolveResult result{policy, {}, false, 0, {}, 0.0};
    auto analysis = std::make_unique<PolicyAnalysis>(mdp, policy);
    RiskStats stats = risk_stats(*analysis);
    double xi = msv_value(stats, config.beta);
    double prev_xi = std::numeric_limits<double>::quiet_NaN();
    double tv_from_prev = std::numeric_limits<double>::quiet_NaN();

    TabularPolicy best = policy;
    double best_xi = xi;
    RiskStats best_stats = stats;
    double residual = 0.0;

    for (int k = 0; k <= config.max_iters; ++k) {
        Matrix adv_g = surrogate_advantages(*analysis, config.beta);
        residual = adv_g.maxCoeff();

        if (k > 0 && std::abs(xi - prev_xi) < config.convergence_tol_xi &&
            tv_from_prev < config.convergence_tol_tv &&
            residual < config.convergence_tol_residual) {
            result.converged = true;
            break;
        }
        if (k == config.max_iters) break;

        SolverConfig step_config = config;
        if (config.adaptive_radius)
            step_config.eps_mu = std::min(config.eps_mu, std::max(1e-9, residual));
        auto [next_policy, diag] = detail::msvtrpi_step_from(*analysis, adv_g, step_config);
        auto next_analysis = std::make_unique<PolicyAnalysis>(mdp, next_policy);
        RiskStats next_stats = risk_stats(*next_analysis);
        double next_xi = msv_value(next_stats, config.beta);

        IterationRecord rec;
        rec.eta = stats.eta;
        rec.zeta_minus = stats.zeta_minus;
        rec.xi_minus = xi;
        rec.kl_step = diag.realized_kl;
        rec.dual_temperature = diag.dual_temperature;
        rec.optimality_residual = residual;
        if (detail::record_bounds(config, mdp.n_states())) {
            Vector gain = (adv_g.array() * next_policy.probs().array()).rowwise().sum();
            double eps_g = gain.cwiseAbs().maxCoeff();
            double eps_tv = std::sqrt(diag.realized_kl / 2.0);
            double kappa = detail::kemeny_of(*next_analysis);
            rec.lower_bound_rhs = diag.surrogate_improvement -
                                  2.0 * (kappa - 1.0) * eps_g * eps_tv -
                                  12.0 * config.beta * kappa * kappa * mdp.r_max() *
                                      mdp.r_max() * eps_tv * eps_tv;
        }
        result.trace.push_back(rec);
        ++result.iterations;

        tv_from_prev = tv_distance(next_policy, policy, analysis->pi());
        prev_xi = xi;
        policy = next_policy;
        analysis = std::move(next_analysis);
        stats = next_stats;
        xi = next_xi;

        if (xi > best_xi) {
            best_xi = xi;
            best = policy;
            best_stats = stats;
        }
    }

    if (result.converged || xi >= best_xi) {
        result.policy = policy;
        result.stats = stats;
        result.optimality_residual = residual;
    } else {
        result.policy = best;
        result.stats = best_stats;
        result.optimality_residual =
            surrogate_advantages(PolicyAnalysis(mdp, best), config.beta).maxCoeff();
    }
    return result;
}

/// Mean-variance policy iteration baseline: evaluate the current policy,
/// rebuild the pseudo reward r - beta (r - eta)^2, and improve greedily
/// (lowest action index wins ties). Stops when the greedy policy repeats;
/// a revisit of an older policy counts as cycling and returns the best
/// criterion value seen, flagged not converged.
inline SolveResult mvpi(const TabularMdp& mdp, const SolverConfig& config) {
    config.validate();
    TabularPolicy policy = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());

    SolveResult result{policy, {}, false, 0, {}, 0.0};
    std::set<std::vector<int>> seen;
    std::vector<int> current_actions; // empty until the first greedy step
    TabularPolicy best = policy;
    double best_value = -std::numeric_limits<double>::infinity();
    RiskStats best_stats;

    for (int k = 0; k < config.max_iters; ++k) {
        PolicyAnalysis analysis(mdp, policy);
        RiskStats stats = risk_stats(analysis);
        double value = mv_value(stats, config.beta);

        Matrix pseudo = mv_pseudo_reward(mdp, stats.eta, config.beta);
        DifferentialValues dv = differential_values(analysis, pseudo);

        IterationRecord rec;
        rec.eta = stats.eta;
        rec.zeta_minus = stats.zeta_minus;
        rec.xi_minus = msv_value(stats, config.beta);
        rec.optimality_residual = dv.adv.maxCoeff();
        result.trace.push_back(rec);
        ++result.iterations;

        if (value > best_value) {
            best_value = value;
            best = policy;
            best_stats = stats;
        }

        std::vector<int> greedy(static_cast<std::size_t>(mdp.n_states()));
        for (int s = 0; s < mdp.n_states(); ++s) {
            int arg = 0;
            for (int a = 1; a < mdp.n_actions(); ++a)
                if (dv.q(s, a) > dv.q(s, arg)) arg = a;
            greedy[static_cast<std::size_t>(s)] = arg;
        }

        if (!current_actions.empty() && greedy == current_actions) {
            result.converged = true;
            break;
        }
        if (!seen.insert(greedy).second) break; // cycling: keep best-so-far
        current_actions = greedy;
        policy = TabularPolicy::deterministic(mdp.n_actions(), greedy);
    }

    if (result.converged) {
        result.policy = policy;
        result.stats = risk_stats(PolicyAnalysis(mdp, policy));
    } else {
        result.policy = best;
        result.stats = best_stats;
    }
    // residual of the baseline's own pseudo reward at the final policy
    PolicyAnalysis final_analysis(mdp, result.policy);
    Matrix final_pseudo = mv_pseudo_reward(mdp, result.stats.eta, config.beta);
    result.optimality_residual =
        differential_values(final_analysis, final_pseudo).adv.maxCoeff();
    return result;
}

/// Exact-gradient ascent on the softmax logits, re-evaluating the surrogate
/// each step.
inline SolveResult msvpg_ascent(const TabularMdp& mdp, const TabularPolicy& initial,
                                const SolverConfig& config, double learning_rate, int iters) {
    config.validate();
    if (learning_rate < 0.0) throw ValidationError("msvpg_ascent: learning rate must be >= 0");
    TabularPolicy policy = initial;
    SolveResult result{policy, {}, false, 0, {}, 0.0};

    for (int k = 0; k < iters; ++k) {
        PolicyAnalysis analysis(mdp, policy);
        RiskStats stats = risk_stats(analysis);
        Matrix adv_g = surrogate_advantages(analysis, config.beta);

        IterationRecord rec;
        rec.eta = stats.eta;
        rec.zeta_minus = stats.zeta_minus;
        rec.xi_minus = msv_value(stats, config.beta);
        rec.optimality_residual = adv_g.maxCoeff();
        result.trace.push_back(rec);
        ++result.iterations;

        Matrix grad =
            analysis.pi().asDiagonal() * (policy.probs().array() * adv_g.array()).matrix();
        policy = TabularPolicy::from_logits(policy.logits() + learning_rate * grad);
    }
    result.policy = policy;
    result.stats = risk_stats(mdp, policy);
    result.optimality_residual = optimality_residual(mdp, policy, config.beta);
    result.converged = true;
    return result;
}

/// Both sides of the trust-region improvement guarantee for a realized step,
/// plus the steady state-action distribution shift and its Kemeny bound.
/// eps_mu is recovered from the realized KL through Pinsker's inequality.
struct TrustRegionBoundReport {
    double lhs = 0.0;             // xi'_- - xi_-
    double surrogate_gain = 0.0;  // L_g(mu')
    double eps_g = 0.0;           // max_s |E_{a ~ mu'} adv_g|
    double eps_mu_tv = 0.0;       // sqrt(realized KL / 2)
    double kappa_new = 0.0;       // Kemeny's constant under mu'
    double r_max = 0.0;
    double rhs = 0.0;
    double rho_l1 = 0.0;          // || rho' - rho ||_1
    double rho_l1_bound = 0.0;    // 2 kappa' eps_mu
    bool bound_holds = false;
    bool lemma_holds = false;
};

inline TrustRegionBoundReport trust_region_bound_report(const TabularMdp& mdp,
                                                        const TabularPolicy& policy_old,
                                                        const TabularPolicy& policy_new,
                                                        double beta) {
    if (beta < 0.0) throw DomainError("trust_region_bound_report: beta must be >= 0");
    PolicyAnalysis old_an(mdp, policy_old);
    PolicyAnalysis new_an(mdp, policy_new);
    RiskStats old_stats = risk_stats(old_an);
    RiskStats new_stats = risk_stats(new_an);

    TrustRegionBoundReport out;
    out.r_max = mdp.r_max();
    out.lhs = msv_value(new_stats, beta) - msv_value(old_stats, beta);

    Matrix adv_g = surrogate_advantages(old_an, beta);
    Vector gain = (adv_g.array() * policy_new.probs().array()).rowwise().sum();
    out.surrogate_gain = old_an.pi().dot(gain);
    out.eps_g = gain.cwiseAbs().maxCoeff();

    double kl = kl_divergence(policy_new, policy_old, old_an.pi());
    out.eps_mu_tv = std::sqrt(kl / 2.0);
    out.kappa_new = detail::kemeny_of(new_an);
    out.rhs = out.surrogate_gain - 2.0 * (out.kappa_new - 1.0) * out.eps_g * out.eps_mu_tv -
              12.0 * beta * out.kappa_new * out.kappa_new * out.r_max * out.r_max *
                  out.eps_mu_tv * out.eps_mu_tv;

    Matrix rho_old = old_an.pi().asDiagonal() * policy_old.probs();
    Matrix rho_new = new_an.pi().asDiagonal() * policy_new.probs();
    out.rho_l1 = (rho_new - rho_old).cwiseAbs().sum();
    out.rho_l1_bound = 2.0 * out.kappa_new * out.eps_mu_tv;

    out.bound_holds = out.lhs >= out.rhs - 1e-10;
    out.lemma_holds = out.rho_l1 <= out.rho_l1_bound + 1e-12;
    return out;
}

} // namespace semivar
