#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "semivar/errors.hpp"
#include "semivar/mdp.hpp"

namespace semivar {

namespace detail {

/// Closed communicating classes of the support graph of a row-stochastic
/// matrix (Tarjan SCC, iterative; a class is closed when no edge leaves it).
inline std::vector<std::vector<int>> closed_classes(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on_stack(n, 0);
    std::vector<int> stack;
    int next_index = 0, n_comps = 0;

    // Iterative Tarjan; frame = (node, next child to scan).
    std::vector<std::pair<int, int>> frames;
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        frames.emplace_back(root, 0);
        while (!frames.empty()) {
            auto& [v, child] = frames.back();
            if (child == 0) {
                index[v] = low[v] = next_index++;
                stack.push_back(v);
                on_stack[v] = 1;
            }
            bool descended = false;
            while (child < n) {
                int w = child++;
                if (p(v, w) <= 0.0) continue;
                if (index[w] == -1) {
                    frames.emplace_back(w, 0);
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            if (low[v] == index[v]) {
                while (true) {
                    int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = n_comps;
                    if (w == v) break;
                }
                ++n_comps;
            }
            int finished = v;
            frames.pop_back();
            if (!frames.empty())
                low[frames.back().first] = std::min(low[frames.back().first], low[finished]);
        }
    }

    std::vector<char> leaves(n_comps, 0);
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t)
            if (p(s, t) > 0.0 && comp[s] != comp[t]) leaves[comp[s]] = 1;

    std::vector<std::vector<int>> closed;
    for (int c = 0; c < n_comps; ++c) {
        if (leaves[c]) continue;
        std::vector<int> members;
        for (int s = 0; s < n; ++s)
            if (comp[s] == c) members.push_back(s);
        closed.push_back(std::move(members));
    }
    return closed;
}

inline std::string format_states(const std::vector<int>& states, std::size_t limit = 8) {
    std::string out = "{";
    for (std::size_t i = 0; i < states.size() && i < limit; ++i) {
        if (i) out += ", ";
        out += std::to_string(states[i]);
    }
    if (states.size() > limit) out += ", ...";
    return out + "}";
}

/// A unique stationary distribution exists iff exactly one closed class.
inline void require_unichain(const Matrix& p_mu) {
    auto closed = closed_classes(p_mu);
    if (closed.size() <= 1) return;
    throw SingularChainError(
        "chain has " + std::to_string(closed.size()) +
        " closed communicating classes, e.g. " + format_states(closed[0]) + " and " +
        format_states(closed[1]) + "; stationary distribution is not unique");
}

} // namespace detail

/// State-to-state transition matrix of the chain a policy induces:
/// entry (s, s') = sum_a mu(a|s) P(s'|s, a).
inline Matrix induced_chain(const TabularMdp& mdp, const TabularPolicy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw DimensionError("induced_chain: policy shape does not match mdp");
    const int S = mdp.n_states();
    Matrix p = Matrix::Zero(S, S);
    for (int a = 0; a < mdp.n_actions(); ++a)
        p.noalias() += policy.probs().col(a).asDiagonal() * mdp.transition(a);
    return p;
}

/// Unique stationary distribution pi with pi P = pi and sum(pi) = 1.
///
/// Solved as a dense linear system: one redundant balance equation of
/// (P^T - I) x = 0 is replaced by the normalization constraint. Chains with a
/// single closed class (transient states allowed) are accepted; anything
/// else throws SingularChainError naming two of the closed classes.
inline Vector stationary_distribution(const Matrix& p_mu) {
    const int n = static_cast<int>(p_mu.rows());
    if (p_mu.cols() != n) throw DimensionError("stationary_distribution: matrix not square");
    detail::require_unichain(p_mu);

    Matrix m = p_mu.transpose() - Matrix::Identity(n, n);
    m.row(0).setOnes();
    Vector b = Vector::Zero(n);
    b(0) = 1.0;
    Vector pi = Eigen::PartialPivLU<Matrix>(m).solve(b);

    double residual = (pi.transpose() * p_mu - pi.transpose()).cwiseAbs().maxCoeff();
    if (!pi.allFinite() || residual > 1e-9)
        throw SingularChainError("stationary_distribution: solve failed (residual " +
                                 std::to_string(residual) + ")");
    for (int i = 0; i < n; ++i) {
        if (pi(i) < -1e-9)
            throw SingularChainError("stationary_distribution: negative mass at state " +
                                     std::to_string(i));
        pi(i) = std::max(pi(i), 0.0);
    }
    pi /= pi.sum();
    return pi;
}

struct FundamentalResult {
    Matrix z;               // (I - P + e pi^T)^-1
    double kemeny = 0.0;    // trace(z); counts the origin state
    bool condition_warning = false;
};

/// Fundamental matrix Z = (I - P + e pi^T)^-1 and Kemeny's constant
/// kappa = trace(Z). A 1-norm condition estimate above 1e12 raises the
/// warning flag on the result instead of failing.
inline FundamentalResult fundamental_matrix(const Matrix& p_mu, const Vector& pi) {
    const int n = static_cast<int>(p_mu.rows());
    if (p_mu.cols() != n || pi.size() != n)
        throw DimensionError("fundamental_matrix: shape mismatch");
    Matrix m = Matrix::Identity(n, n) - p_mu + Vector::Ones(n) * pi.transpose();
    FundamentalResult out;
    out.z = Eigen::PartialPivLU<Matrix>(m).inverse();
    if (!out.z.allFinite())
        throw SingularChainError("fundamental_matrix: singular system");
    out.kemeny = out.z.trace();
    double cond = m.cwiseAbs().colwise().sum().maxCoeff() *
                  out.z.cwiseAbs().colwise().sum().maxCoeff();
    out.condition_warning = cond > 1e12;
    return out;
}

/// Expected first-passage times m(i, j), with m(i, i) = 0.
///
/// Computed per target state from its own (n-1)-dimensional linear system,
/// independently of the fundamental matrix, so the two routes to Kemeny's
/// constant can be checked against each other.
inline Matrix mean_first_passage_times(const Matrix& p_mu, const Vector& pi) {
    const int n = static_cast<int>(p_mu.rows());
    if (p_mu.cols() != n || pi.size() != n)
        throw DimensionError("mean_first_passage_times: shape mismatch");
    detail::require_unichain(p_mu);

    Matrix m = Matrix::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        // m(i,j) = 1 + sum_{k != j} P(i,k) m(k,j) over all i != j.
        Matrix a = Matrix::Identity(n - 1, n - 1);
        Vector b = Vector::Ones(n - 1);
        for (int i = 0, bi = 0; i < n; ++i) {
            if (i == j) continue;
            for (int k = 0, bk = 0; k < n; ++k) {
                if (k == j) continue;
                a(bi, bk) -= p_mu(i, k);
                ++bk;
            }
            ++bi;
        }
        Vector sol = Eigen::PartialPivLU<Matrix>(a).solve(b);
        if (!sol.allFinite() || (a * sol - b).cwiseAbs().maxCoeff() > 1e-8)
            throw SingularChainError("mean_first_passage_times: singular system for target " +
                                     std::to_string(j));
        for (int i = 0, bi = 0; i < n; ++i) {
            if (i == j) continue;
            m(i, j) = sol(bi++);
        }
    }
    return m;
}

/// Cached LU view of one policy's chain. A single factorization of
/// M = I - P + e w^T (w uniform) yields the stationary distribution, any
/// number of Poisson solves, and cheap averages; this keeps per-iteration
/// solver costs at one decomposition. The policy is copied in; the MDP must
/// outlive the analysis.
class PolicyAnalysis {
public:
    PolicyAnalysis(const TabularMdp& mdp, const TabularPolicy& policy)
        : mdp_(&mdp), policy_(policy), p_mu_(induced_chain(mdp, policy)) {
        const int n = mdp.n_states();
        detail::require_unichain(p_mu_);
        Vector w = Vector::Constant(n, 1.0 / n);
        Matrix m = Matrix::Identity(n, n) - p_mu_ + Vector::Ones(n) * w.transpose();
        lu_.compute(m);
        // pi solves M^T pi = w and is automatically normalized.
        pi_ = lu_.transpose().solve(w);
        double residual = (pi_.transpose() * p_mu_ - pi_.transpose()).cwiseAbs().maxCoeff();
        if (!pi_.allFinite() || residual > 1e-9)
            throw SingularChainError("chain analysis: stationary solve failed (residual " +
                                     std::to_string(residual) + ")");
        for (int i = 0; i < n; ++i) pi_(i) = std::max(pi_(i), 0.0);
        pi_ /= pi_.sum();
    }

    const TabularMdp& mdp() const { return *mdp_; }
    const TabularPolicy& policy() const { return policy_; }
    const Matrix& p_mu() const { return p_mu_; }
    const Vector& pi() const { return pi_; }

    /// Policy-weighted reward vector r_mu(s) = sum_a mu(a|s) r(s, a).
    Vector policy_reward(const Matrix& reward_table) const {
        return (reward_table.array() * policy_.probs().array()).rowwise().sum();
    }

    /// steady-state average of a reward table under this policy.
    double average(const Matrix& reward_table) const {
        return pi_.dot(policy_reward(reward_table));
    }

    /// Differential value vector pinned to pi . v = 0; solves the Poisson
    /// equation (I - P) v + average * e = r_mu.
    Vector values(const Matrix& reward_table, double average) const {
        Vector rhs = policy_reward(reward_table).array() - average;
        Vector y = lu_.solve(rhs);
        return y.array() - pi_.dot(y);
    }

private:
    const TabularMdp* mdp_;
    TabularPolicy policy_;
    Matrix p_mu_;
    Eigen::PartialPivLU<Matrix> lu_;
    Vector pi_;
};

/// Average, differential state values, action values and advantages of a
/// reward table under a policy.
struct DifferentialValues {
    double average = 0.0;
    Vector v;   // per state, pinned to pi . v = 0
    Matrix q;   // per (state, action)
    Matrix adv; // q - v, policy expectation is 0 in every state
};

inline DifferentialValues differential_values(const PolicyAnalysis& analysis,
                                              const Matrix& reward_table) {
    const TabularMdp& mdp = analysis.mdp();
    if (reward_table.rows() != mdp.n_states() || reward_table.cols() != mdp.n_actions())
        throw DimensionError("differential_values: reward table shape mismatch");
    DifferentialValues out;
    out.average = analysis.average(reward_table);
    out.v = analysis.values(reward_table, out.average);
    out.q.resize(mdp.n_states(), mdp.n_actions());
    for (int a = 0; a < mdp.n_actions(); ++a)
        out.q.col(a) = reward_table.col(a).array() - out.average +
                       (mdp.transition(a) * out.v).array();
    out.adv = out.q.colwise() - out.v;
    return out;
}

inline DifferentialValues differential_values(const TabularMdp& mdp, const TabularPolicy& policy,
                                              const Matrix& reward_table) {
    PolicyAnalysis analysis(mdp, policy);
    return differential_values(analysis, reward_table);
}

/// Bundle of the chain quantities for one policy.
struct ChainAnalysis {
    Matrix p_mu;
    Vector pi;
    Matrix fundamental;
    double kemeny = 0.0;
    bool condition_warning = false;
};

inline ChainAnalysis analyze_chain(const TabularMdp& mdp, const TabularPolicy& policy) {
    ChainAnalysis out;
    out.p_mu = induced_chain(mdp, policy);
    out.pi = stationary_distribution(out.p_mu);
    FundamentalResult f = fundamental_matrix(out.p_mu, out.pi);
    out.fundamental = std::move(f.z);
    out.kemeny = f.kemeny;
    out.condition_warning = f.condition_warning;
    return out;
}

/// Expected total-variation distance sum_s pi(s) * (1/2) sum_a |a - b|.
inline double tv_distance(const TabularPolicy& policy_a, const TabularPolicy& policy_b,
                          const Vector& pi) {
    if (policy_a.n_states() != policy_b.n_states() ||
        policy_a.n_actions() != policy_b.n_actions() || pi.size() != policy_a.n_states())
        throw DimensionError("tv_distance: shape mismatch");
    Vector per_state = 0.5 * (policy_a.probs() - policy_b.probs()).cwiseAbs().rowwise().sum();
    return pi.dot(per_state);
}

/// Expected KL divergence sum_s pi(s) KL(new(.|s) || old(.|s)).
inline double kl_divergence(const TabularPolicy& policy_new, const TabularPolicy& policy_old,
                            const Vector& pi) {
    if (policy_new.n_states() != policy_old.n_states() ||
        policy_new.n_actions() != policy_old.n_actions() || pi.size() != policy_new.n_states())
        throw DimensionError("kl_divergence: shape mismatch");
    double total = 0.0;
    for (int s = 0; s < policy_new.n_states(); ++s) {
        double kl = 0.0;
        for (int a = 0; a < policy_new.n_actions(); ++a) {
            double p = policy_new.probs()(s, a);
            if (p <= 0.0) continue;
            double q = policy_old.probs()(s, a);
            if (q <= 0.0)
                throw DomainError("kl_divergence: new policy has mass where old policy has none "
                                  "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")");
            kl += p * std::log(p / q);
        }
        total += pi(s) * kl;
    }
    return std::max(total, 0.0);
}

} // namespace semivar
