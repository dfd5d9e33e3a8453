#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

#include "semivar/errors.hpp"

namespace semivar {

/// Seeded random source with explicitly-coded distributions, so that the
/// same seed yields the same stream on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a log argument.
    double uniform_positive() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (cosine branch only).
    double normal() {
        double u1 = uniform_positive();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double exponential() { return -std::log(uniform_positive()); }

    /// Index drawn from an unnormalized nonnegative weight vector.
    template <typename Derived>
    int categorical(const Eigen::MatrixBase<Derived>& weights) {
        double total = weights.sum();
        double u = uniform() * total;
        double acc = 0.0;
        int last = 0;
        for (int i = 0; i < weights.size(); ++i) {
            if (weights(i) <= 0.0) continue;
            acc += weights(i);
            last = i;
            if (u < acc) return i;
        }
        return last;
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

} // namespace semivar
