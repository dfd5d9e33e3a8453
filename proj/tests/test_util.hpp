#pragma once

#include <cmath>
#include <cstdint>

#include "semivar/chain.hpp"
#include "semivar/environments.hpp"
#include "semivar/mdp.hpp"
#include "semivar/risk.hpp"

namespace semivar::testing {

/// Central finite difference of the MSV criterion along the probability
/// mixture (1 - nu) policy + nu direction. Independent oracle for the exact
/// directional derivative.
inline double fd_directional_derivative(const TabularMdp& mdp, const TabularPolicy& policy,
                                        const TabularPolicy& direction, double beta,
                                        double h = 1e-5) {
    double plus = msv_value(mdp, policy.mix(direction, h), beta);
    double minus = msv_value(mdp, policy.mix(direction, -h), beta);
    return (plus - minus) / (2.0 * h);
}

/// Central finite differences of the MSV criterion over every softmax logit.
inline Matrix fd_policy_gradient(const TabularMdp& mdp, const TabularPolicy& policy, double beta,
                                 double h = 1e-6) {
    Matrix grad(policy.n_states(), policy.n_actions());
    for (int s = 0; s < policy.n_states(); ++s) {
        for (int a = 0; a < policy.n_actions(); ++a) {
            Matrix up = policy.logits();
            Matrix dn = policy.logits();
            up(s, a) += h;
            dn(s, a) -= h;
            double plus = msv_value(mdp, TabularPolicy::from_logits(up), beta);
            double minus = msv_value(mdp, TabularPolicy::from_logits(dn), beta);
            grad(s, a) = (plus - minus) / (2.0 * h);
        }
    }
    return grad;
}

inline double rel_error_inf(const Matrix& got, const Matrix& want) {
    double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-12);
    return (got - want).cwiseAbs().maxCoeff() / scale;
}

} // namespace semivar::testing
