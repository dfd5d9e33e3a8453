#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semivar/environments.hpp"
#include "semivar/errors.hpp"
#include "semivar/mdp.hpp"
#include "semivar/rng.hpp"
#include "semivar/risk.hpp"

namespace semivar {

/// Sign convention of the temporal-difference residual inside the advantage
/// estimator. `standard` uses g - g_bar + V(next) - V(current); `paper`
/// flips the value terms.
enum class GaeSign { standard, paper };

/// Which per-step surrogate drives the actor: the policy-corrected reward g
/// or the plain downside-penalized reward f.
enum class ActorReward { g, f };

struct SamplingConfig {
    double beta = 1.0;
    double alpha = 0.01;      // running-estimator mixing rate
    double policy_lr = 3e-4;
    double value_lr = 3e-4;
    double gae_lambda = 0.95;
    GaeSign gae_sign = GaeSign::standard;
    double clip = 0.2;        // ratio clip half-width
    int epochs = 10;          // optimization epochs per batch
    int batch_size = 256;
    double avc_coef = 0.3;    // value recentering strength
    ActorReward actor_reward = ActorReward::g;

    void validate() const {
        if (beta < 0.0) throw ValidationError("sampling config: beta must be >= 0");
        if (alpha <= 0.0 || alpha > 1.0)
            throw ValidationError("sampling config: alpha must be in (0, 1]");
        if (gae_lambda < 0.0 || gae_lambda > 1.0)
            throw ValidationError("sampling config: gae_lambda must be in [0, 1]");
        if (clip <= 0.0) throw ValidationError("sampling config: clip must be > 0");
        if (epochs < 1) throw ValidationError("sampling config: epochs must be >= 1");
        if (batch_size < 1) throw ValidationError("sampling config: batch_size must be >= 1");
    }
};

/// Exponentially mixed estimates of the steady reward statistics.
struct RunningStats {
    double eta_hat = 0.0;
    double eta_minus_hat = 0.0;  // <= 0
    double zeta_minus_hat = 0.0; // >= 0
    double alpha = 0.01;
};

struct Transition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

/// Ordered rollout segment; consecutive transitions chain.
struct Batch {
    std::vector<Transition> steps;
    std::uint64_t seed = 0;

    void validate() const {
        for (std::size_t n = 0; n + 1 < steps.size(); ++n)
            if (steps[n].next_state != steps[n + 1].state)
                throw ValidationError("batch: transitions do not chain at step " +
                                      std::to_string(n));
    }
};

/// Stateful trajectory sampler with a deterministic stream per seed.
class Simulator {
public:
    Simulator(const TabularMdp& mdp, std::uint64_t seed, int start_state = 0)
        : mdp_(&mdp), rng_(seed), seed_(seed), state_(start_state) {
        if (start_state < 0 || start_state >= mdp.n_states())
            throw DimensionError("simulator: start state out of range");
    }

    int state() const { return state_; }

    Batch run(const TabularPolicy& policy, int n_steps) {
        if (policy.n_states() != mdp_->n_states() || policy.n_actions() != mdp_->n_actions())
            throw DimensionError("simulator: policy shape does not match mdp");
        if (n_steps < 1) throw ValidationError("simulator: n_steps must be >= 1");
        Batch batch;
        batch.seed = seed_;
        batch.steps.reserve(static_cast<std::size_t>(n_steps));
        for (int n = 0; n < n_steps; ++n) {
            int a = rng_.categorical(policy.probs().row(state_));
            int next = rng_.categorical(mdp_->transition(a).row(state_));
            batch.steps.push_back({state_, a, mdp_->reward(state_, a), next});
            state_ = next;
        }
        return batch;
    }

    void burn_in(const TabularPolicy& policy, int n_steps) {
        if (n_steps > 0) run(policy, n_steps);
    }

private:
    const TabularMdp* mdp_;
    Rng rng_;
    std::uint64_t seed_;
    int state_;
};

/// One-shot trajectory; bit-reproducible for a fixed seed.
inline Batch simulate(const TabularMdp& mdp, const TabularPolicy& policy, int n_steps,
                      std::uint64_t seed, int start_state = 0) {
    Simulator sim(mdp, seed, start_state);
    return sim.run(policy, n_steps);
}

/// Repeated pulls of the bandit as a single-state process with continuous
/// rewards. states and next_states are all zero.
inline Batch bandit_rollout(const BanditSpec& spec, const TabularPolicy& policy, int n_steps,
                            std::uint64_t seed) {
    if (policy.n_states() != 1 || policy.n_actions() != 3)
        throw DimensionError("bandit_rollout: policy must be 1 state x 3 actions");
    if (n_steps < 1) throw ValidationError("bandit_rollout: n_steps must be >= 1");
    Rng rng(seed);
    Batch batch;
    batch.seed = seed;
    batch.steps.reserve(static_cast<std::size_t>(n_steps));
    for (int n = 0; n < n_steps; ++n) {
        int arm = rng.categorical(policy.probs().row(0));
        batch.steps.push_back({0, arm, bandit_sample(spec, arm, rng), 0});
    }
    return batch;
}

/// Three mixing updates in order: the mean first, then the semimean and the
/// semivariance against the freshly updated mean.
inline RunningStats update_running_stats(RunningStats stats, const Batch& batch) {
    if (batch.steps.empty()) throw ValidationError("update_running_stats: empty batch");
    const double n = static_cast<double>(batch.steps.size());
    double mean = 0.0;
    for (const Transition& t : batch.steps) mean += t.reward;
    mean /= n;
    stats.eta_hat = (1.0 - stats.alpha) * stats.eta_hat + stats.alpha * mean;

    double mean_neg = 0.0, mean_neg_sq = 0.0;
    for (const Transition& t : batch.steps) {
        double neg = neg_part(t.reward - stats.eta_hat);
        mean_neg += neg;
        mean_neg_sq += neg * neg;
    }
    stats.eta_minus_hat =
        (1.0 - stats.alpha) * stats.eta_minus_hat + stats.alpha * mean_neg / n;
    stats.zeta_minus_hat =
        (1.0 - stats.alpha) * stats.zeta_minus_hat + stats.alpha * mean_neg_sq / n;
    return stats;
}

/// Per-step surrogate values built from the sampled rewards and the running
/// estimates; equals a table lookup when rewards are deterministic per
/// state-action pair.
inline Vector surrogate_steps(const Batch& batch, const RunningStats& stats, double beta,
                              ActorReward kind) {
    Vector g(static_cast<Eigen::Index>(batch.steps.size()));
    double scale = kind == ActorReward::g ? 1.0 + 2.0 * beta * stats.eta_minus_hat : 1.0;
    for (std::size_t n = 0; n < batch.steps.size(); ++n) {
        double r = batch.steps[n].reward;
        double neg = neg_part(r - stats.eta_hat);
        g(static_cast<Eigen::Index>(n)) = scale * r - beta * neg * neg;
    }
    return g;
}

/// Average of the surrogate under the running estimates.
inline double surrogate_bar(const RunningStats& stats, double beta, ActorReward kind) {
    double scale = kind == ActorReward::g ? 1.0 + 2.0 * beta * stats.eta_minus_hat : 1.0;
    return scale * stats.eta_hat - beta * stats.zeta_minus_hat;
}

/// Backward-recursive advantage estimates over one rollout segment:
/// A_n = delta_n + lambda A_{n+1}, truncated at the batch end.
inline Vector gae_advantages(const Batch& batch, const Vector& values, const Vector& g_steps,
                             double g_bar, double lambda,
                             GaeSign sign = GaeSign::standard) {
    if (lambda < 0.0 || lambda > 1.0)
        throw ValidationError("gae_advantages: lambda must be in [0, 1]");
    const Eigen::Index n = static_cast<Eigen::Index>(batch.steps.size());
    if (g_steps.size() != n) throw DimensionError("gae_advantages: g_steps length mismatch");
    Vector adv(n);
    double acc = 0.0;
    for (Eigen::Index k = n - 1; k >= 0; --k) {
        const Transition& t = batch.steps[static_cast<std::size_t>(k)];
        double dv = values(t.next_state) - values(t.state);
        if (sign == GaeSign::paper) dv = -dv;
        double delta = g_steps(k) - g_bar + dv;
        acc = delta + lambda * acc;
        adv(k) = acc;
    }
    return adv;
}

/// Table-lookup variant for deterministic rewards.
inline Vector gae_advantages(const Batch& batch, const Vector& values, const Matrix& g_table,
                             double g_bar, double lambda,
                             GaeSign sign = GaeSign::standard) {
    Vector g(static_cast<Eigen::Index>(batch.steps.size()));
    for (std::size_t k = 0; k < batch.steps.size(); ++k)
        g(static_cast<Eigen::Index>(k)) = g_table(batch.steps[k].state, batch.steps[k].action);
    return gae_advantages(batch, values, g, g_bar, lambda, sign);
}

/// Tabular state-value estimate with its own learning rate.
struct ValueTable {
    Vector v;
    double lr = 3e-4;

    static ValueTable zeros(int n_states, double lr = 3e-4) {
        return ValueTable{Vector::Zero(n_states), lr};
    }
};

/// Half mean-squared error against the bootstrapped targets V + A, followed
/// by a per-state move of lr times the mean advantage at that state. Returns
/// the pre-update loss.
inline double value_loss_and_update(ValueTable& values, const Batch& batch,
                                    const Vector& advantages) {
    const Eigen::Index n = static_cast<Eigen::Index>(batch.steps.size());
    if (advantages.size() != n)
        throw DimensionError("value_loss_and_update: advantages length mismatch");
    double loss = 0.5 * advantages.squaredNorm() / static_cast<double>(n);

    std::vector<double> sum(static_cast<std::size_t>(values.v.size()), 0.0);
    std::vector<int> count(static_cast<std::size_t>(values.v.size()), 0);
    for (Eigen::Index k = 0; k < n; ++k) {
        sum[static_cast<std::size_t>(batch.steps[static_cast<std::size_t>(k)].state)] +=
            advantages(k);
        count[static_cast<std::size_t>(batch.steps[static_cast<std::size_t>(k)].state)] += 1;
    }
    for (Eigen::Index s = 0; s < values.v.size(); ++s)
        if (count[static_cast<std::size_t>(s)] > 0)
            values.v(s) += values.lr * sum[static_cast<std::size_t>(s)] /
                           count[static_cast<std::size_t>(s)];
    return loss;
}

namespace detail {

/// Recenters the value table to (approximately) zero visitation-weighted
/// mean; the differential value is defined only up to a constant.
inline void recenter_values(ValueTable& values, const Batch& batch, double coef) {
    if (coef <= 0.0) return;
    Vector freq = Vector::Zero(values.v.size());
    for (const Transition& t : batch.steps) freq(t.state) += 1.0;
    freq /= static_cast<double>(batch.steps.size());
    values.v.array() -= coef * freq.dot(values.v);
}

/// Score-function policy gradient (1/N) sum_n grad log mu(a_n|s_n) A_n for
/// softmax logits.
inline Matrix score_gradient(const TabularPolicy& policy, const Batch& batch,
                             const Vector& advantages) {
    Matrix grad = Matrix::Zero(policy.n_states(), policy.n_actions());
    const double n = static_cast<double>(batch.steps.size());
    for (std::size_t k = 0; k < batch.steps.size(); ++k) {
        const Transition& t = batch.steps[k];
        double a_hat = advantages(static_cast<Eigen::Index>(k));
        grad.row(t.state) -= (a_hat / n) * policy.probs().row(t.state);
        grad(t.state, t.action) += a_hat / n;
    }
    return grad;
}

} // namespace detail

/// Clipped-ratio surrogate objective and its logits gradient over a frozen
/// batch. `old_probs(n)` is the behavior probability of the sampled action.
inline std::pair<double, Matrix> clip_objective_and_gradient(const TabularPolicy& policy,
                                                             const Batch& batch,
                                                             const Vector& old_probs,
                                                             const Vector& advantages,
                                                             double clip) {
    const Eigen::Index n = static_cast<Eigen::Index>(batch.steps.size());
    if (old_probs.size() != n || advantages.size() != n)
        throw DimensionError("clip objective: length mismatch");
    double value = 0.0;
    Matrix grad = Matrix::Zero(policy.n_states(), policy.n_actions());
    for (Eigen::Index k = 0; k < n; ++k) {
        const Transition& t = batch.steps[static_cast<std::size_t>(k)];
        double ratio = policy.probs()(t.state, t.action) / old_probs(k);
        double a_hat = advantages(k);
        double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
        value += std::min(ratio * a_hat, clipped * a_hat);
        bool active = (a_hat >= 0.0 && ratio <= 1.0 + clip) ||
                      (a_hat < 0.0 && ratio >= 1.0 - clip);
        if (active) {
            // d ratio / d logits(s, .) = ratio * (e_a - mu(.|s))
            grad.row(t.state) -= ratio * a_hat * policy.probs().row(t.state);
            grad(t.state, t.action) += ratio * a_hat;
        }
    }
    value /= static_cast<double>(n);
    grad /= static_cast<double>(n);
    return {value, grad};
}

/// One actor-critic update: refresh the running statistics, build the
/// per-step surrogate, estimate advantages, take one score-function policy
/// step and one value step, then recenter the values.
struct SampleUpdateResult {
    TabularPolicy policy;
    ValueTable values;
    RunningStats stats;
    double value_loss = 0.0;
    Matrix policy_gradient; // estimate used for the step
};

inline SampleUpdateResult msvac_update(const TabularPolicy& policy, const ValueTable& values,
                                       const RunningStats& stats, const Batch& batch,
                                       const SamplingConfig& config) {
    config.validate();
    batch.validate();
    SampleUpdateResult out{policy, values, update_running_stats(stats, batch), 0.0, {}};

    Vector g = surrogate_steps(batch, out.stats, config.beta, config.actor_reward);
    double g_bar = surrogate_bar(out.stats, config.beta, config.actor_reward);
    Vector adv =
        gae_advantages(batch, out.values.v, g, g_bar, config.gae_lambda, config.gae_sign);

    out.policy_gradient = detail::score_gradient(policy, batch, adv);
    out.policy =
        TabularPolicy::from_logits(policy.logits() + config.policy_lr * out.policy_gradient);

    out.values.lr = config.value_lr;
    out.value_loss = value_loss_and_update(out.values, batch, adv);
    detail::recenter_values(out.values, batch, config.avc_coef);
    return out;
}

/// One clipped-surrogate update: same estimators as the actor-critic, then
/// several epochs of ascent on the clipped importance-ratio objective over
/// the frozen batch, then the same number of value epochs.
inline SampleUpdateResult msvpo_update(const TabularPolicy& policy, const ValueTable& values,
                                       const RunningStats& stats, const Batch& batch,
                                       const SamplingConfig& config) {
    config.validate();
    batch.validate();
    SampleUpdateResult out{policy, values, update_running_stats(stats, batch), 0.0, {}};

    Vector g = surrogate_steps(batch, out.stats, config.beta, config.actor_reward);
    double g_bar = surrogate_bar(out.stats, config.beta, config.actor_reward);
    Vector adv =
        gae_advantages(batch, out.values.v, g, g_bar, config.gae_lambda, config.gae_sign);

    Vector old_probs(static_cast<Eigen::Index>(batch.steps.size()));
    for (std::size_t k = 0; k < batch.steps.size(); ++k)
        old_probs(static_cast<Eigen::Index>(k)) =
            policy.probs()(batch.steps[k].state, batch.steps[k].action);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto [value, grad] =
            clip_objective_and_gradient(out.policy, batch, old_probs, adv, config.clip);
        out.policy_gradient = grad;
        out.policy =
            TabularPolicy::from_logits(out.policy.logits() + config.policy_lr * grad);
    }

    out.values.lr = config.value_lr;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        out.value_loss = value_loss_and_update(out.values, batch, adv);
        detail::recenter_values(out.values, batch, config.avc_coef);
    }
    return out;
}

} // namespace semivar
