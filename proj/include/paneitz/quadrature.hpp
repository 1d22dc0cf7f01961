#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>

#include "paneitz/errors.hpp"

namespace paneitz {

/// One-dimensional quadrature rule: sum_j weights[j] * f(nodes[j]).
struct Rule1D {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

/**
 * Gauss-Legendre rule on [-1,1], exact for polynomials of degree <= 2n-1.
 * Nodes found by Newton iteration on the three-term recurrence, seeded with
 * the Chebyshev-angle approximation.
 */
inline Rule1D gauss_legendre(int n) {
    if (n < 1) throw ConfigError("gauss_legendre: need n >= 1");
    Rule1D rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
            double p0 = 1.0, p1 = x;
            for (int k = 1; k < n; ++k) {
                double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

/// Gauss-Chebyshev rule of the second kind: integrates f(t)*sqrt(1-t^2) on
/// [-1,1], exact for f of degree <= 2n-1. Closed-form nodes and weights.
inline Rule1D gauss_chebyshev2(int n) {
    if (n < 1) throw ConfigError("gauss_chebyshev2: need n >= 1");
    Rule1D rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int j = 1; j <= n; ++j) {
        double a = j * std::numbers::pi / (n + 1);
        rule.nodes[j - 1] = std::cos(a);
        rule.weights[j - 1] = std::numbers::pi / (n + 1) * std::sin(a) * std::sin(a);
    }
    return rule;
}

/// Uniform rule on [0, period): exact for trigonometric polynomials of
/// degree <= n-1.
inline Rule1D uniform_periodic(int n, double period) {
    if (n < 1) throw ConfigError("uniform_periodic: need n >= 1");
    Rule1D rule;
    rule.nodes.resize(n);
    rule.weights.setConstant(n, period / n);
    for (int j = 0; j < n; ++j) rule.nodes[j] = period * j / n;
    return rule;
}

} // namespace paneitz
