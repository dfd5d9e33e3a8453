#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semivar/errors.hpp"

namespace semivar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

/// True iff every state communicates with every other state in the directed
/// support graph. `edge(s, t)` must say whether s -> t has positive mass.
template <typename EdgeFn>
bool strongly_connected(int n, EdgeFn edge) {
    auto reach_all = [&](bool forward) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            int s = stack.back();
            stack.pop_back();
            for (int t = 0; t < n; ++t) {
                if (seen[t]) continue;
                bool has = forward ? edge(s, t) : edge(t, s);
                if (has) {
                    seen[t] = 1;
                    ++count;
                    stack.push_back(t);
                }
            }
        }
        return count == n;
    };
    return reach_all(true) && reach_all(false);
}

} // namespace detail

/// Finite MDP with dense transition tensor and bounded reward table.
///
/// Transitions are stored per action: `transition(a)(s, s')` is the
/// probability of moving to s' when taking action a in state s. Rewards are
/// `reward(s, a)`, bounded by `r_max` in absolute value. The chain induced by
/// the uniform policy must be irreducible; this is checked at construction.
class TabularMdp {
public:
    TabularMdp(std::vector<Matrix> transition, Matrix reward,
               std::optional<double> r_max = std::nullopt)
        : transition_(std::move(transition)), reward_(std::move(reward)) {
        n_actions_ = static_cast<int>(transition_.size());
        if (n_actions_ < 1) throw ValidationError("mdp: needs at least one action");
        n_states_ = static_cast<int>(transition_[0].rows());
        if (n_states_ < 1) throw ValidationError("mdp: needs at least one state");
        for (int a = 0; a < n_actions_; ++a) {
            if (transition_[a].rows() != n_states_ || transition_[a].cols() != n_states_)
                throw DimensionError("mdp: transition matrix for action " + std::to_string(a) +
                                     " is not n_states x n_states");
        }
        if (reward_.rows() != n_states_ || reward_.cols() != n_actions_)
            throw DimensionError("mdp: reward table must be n_states x n_actions");

        for (int a = 0; a < n_actions_; ++a) {
            for (int s = 0; s < n_states_; ++s) {
                double row_sum = transition_[a].row(s).sum();
                if (std::abs(row_sum - 1.0) > 1e-12)
                    throw ValidationError("mdp: transition row (s=" + std::to_string(s) +
                                          ", a=" + std::to_string(a) + ") sums to " +
                                          std::to_string(row_sum));
                if (transition_[a].row(s).minCoeff() < 0.0)
                    throw ValidationError("mdp: negative transition probability in row (s=" +
                                          std::to_string(s) + ", a=" + std::to_string(a) + ")");
            }
        }

        double max_abs_reward = reward_.cwiseAbs().maxCoeff();
        r_max_ = r_max.value_or(max_abs_reward);
        if (max_abs_reward > r_max_ + 1e-12)
            throw ValidationError("mdp: |reward| exceeds r_max (" + std::to_string(max_abs_reward) +
                                  " > " + std::to_string(r_max_) + ")");

        auto edge = [this](int s, int t) {
            for (int a = 0; a < n_actions_; ++a)
                if (transition_[a](s, t) > 0.0) return true;
            return false;
        };
        if (!detail::strongly_connected(n_states_, edge))
            throw ValidationError("mdp: chain under the uniform policy is not irreducible");
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    const Matrix& transition(int a) const { return transition_[a]; }
    const std::vector<Matrix>& transitions() const { return transition_; }
    double reward(int s, int a) const { return reward_(s, a); }
    const Matrix& reward_table() const { return reward_; }
    double r_max() const { return r_max_; }

private:
    std::vector<Matrix> transition_; // transition_[a](s, s')
    Matrix reward_;                  // reward_(s, a)
    int n_states_ = 0;
    int n_actions_ = 0;
    double r_max_ = 0.0;
};

/// Stochastic policy stored as logits with a per-state softmax.
///
/// Probabilities are invariant under adding a per-state constant to the
/// logits. Logits may be -inf to express (numerically) deterministic
/// policies; every row must keep at least one finite logit.
class TabularPolicy {
public:
    static TabularPolicy from_logits(Matrix logits) { return TabularPolicy(std::move(logits)); }

    static TabularPolicy uniform(int n_states, int n_actions) {
        return TabularPolicy(Matrix::Zero(n_states, n_actions));
    }

    /// Logits are log-probabilities; zero probabilities map to -inf.
    static TabularPolicy from_probs(const Matrix& probs) {
        const double inf = std::numeric_limits<double>::infinity();
        Matrix logits(probs.rows(), probs.cols());
        for (int s = 0; s < probs.rows(); ++s) {
            double row_sum = probs.row(s).sum();
            if (std::abs(row_sum - 1.0) > 1e-12)
                throw ValidationError("policy: probability row " + std::to_string(s) +
                                      " sums to " + std::to_string(row_sum));
            for (int a = 0; a < probs.cols(); ++a) {
                double p = probs(s, a);
                if (p < 0.0)
                    throw ValidationError("policy: negative probability at (s=" +
                                          std::to_string(s) + ", a=" + std::to_string(a) + ")");
                logits(s, a) = p > 0.0 ? std::log(p) : -inf;
            }
        }
        return TabularPolicy(std::move(logits));
    }

    /// One chosen action per state, realized with a large logit gap.
    static TabularPolicy deterministic(int n_actions, const std::vector<int>& actions) {
        int n_states = static_cast<int>(actions.size());
        Matrix logits = Matrix::Constant(n_states, n_actions, -1e4);
        for (int s = 0; s < n_states; ++s) {
            if (actions[s] < 0 || actions[s] >= n_actions)
                throw DimensionError("policy: action index out of range at state " +
                                     std::to_string(s));
            logits(s, actions[s]) = 0.0;
        }
        return TabularPolicy(std::move(logits));
    }

    int n_states() const { return static_cast<int>(logits_.rows()); }
    int n_actions() const { return static_cast<int>(logits_.cols()); }
    const Matrix& logits() const { return logits_; }
    const Matrix& probs() const { return probs_; }

    /// Probability-space mixture (1 - nu) * this + nu * other.
    TabularPolicy mix(const TabularPolicy& other, double nu) const {
        if (other.n_states() != n_states() || other.n_actions() != n_actions())
            throw DimensionError("policy: mix shape mismatch");
        Matrix p = (1.0 - nu) * probs_ + nu * other.probs_;
        return from_probs(p);
    }

private:
    explicit TabularPolicy(Matrix logits) : logits_(std::move(logits)) {
        const int S = static_cast<int>(logits_.rows());
        const int A = static_cast<int>(logits_.cols());
        if (S < 1 || A < 1) throw ValidationError("policy: empty logits");
        probs_.resize(S, A);
        for (int s = 0; s < S; ++s) {
            double m = logits_.row(s).maxCoeff();
            if (!std::isfinite(m))
                throw ValidationError("policy: state " + std::to_string(s) +
                                      " has no finite logit");
            double z = 0.0;
            for (int a = 0; a < A; ++a) {
                probs_(s, a) = std::exp(logits_(s, a) - m);
                z += probs_(s, a);
            }
            probs_.row(s) /= z;
        }
    }

    Matrix logits_;
    Matrix probs_;
};

} // namespace semivar
