#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "paneitz/errors.hpp"
#include "paneitz/operator.hpp"

namespace paneitz {

/// Partition of eigenvalue indices into multiplicity groups. Indices are
/// 1-based, matching the eigenvalue numbering lambda_1 <= lambda_2 <= ...
struct ClusterSet {
    std::vector<std::pair<int, int>> groups; // inclusive [first, last], 1-based
    double tolerance = 1e-6;
    double min_gap = std::numeric_limits<double>::infinity(); // smallest inter-cluster gap
    std::vector<int> ambiguous_gaps; // left index of gaps within 10x of the tolerance

    /// Group containing the 1-based eigenvalue index k.
    std::pair<int, int> group_of(int k) const {
        for (const auto& g : groups)
            if (k >= g.first && k <= g.second) return g;
        throw UsageError("ClusterSet: index outside the computed spectrum");
    }
};

/// Greedy multiplicity grouping: adjacent eigenvalues join a cluster when
/// their gap is at most tolerance * max(1, |lambda|). Near-tolerance gaps
/// are reported in ambiguous_gaps rather than merged.
inline ClusterSet cluster(const Eigen::VectorXd& eigenvalues, double tolerance) {
    ClusterSet cs;
    cs.tolerance = tolerance;
    const int n = static_cast<int>(eigenvalues.size());
    if (n == 0) return cs;
    int start = 1;
    for (int i = 0; i + 1 < n; ++i) {
        double gap = eigenvalues[i + 1] - eigenvalues[i];
        double scale = std::max(1.0, std::max(std::abs(eigenvalues[i]), std::abs(eigenvalues[i + 1])));
        if (gap <= tolerance * scale) continue;
        cs.groups.emplace_back(start, i + 1);
        cs.min_gap = std::min(cs.min_gap, gap);
        if (gap <= 10 * tolerance * scale) cs.ambiguous_gaps.push_back(i + 1);
        start = i + 2;
    }
    cs.groups.emplace_back(start, n);
    return cs;
}

/**
 * Solution of the generalized symmetric eigenproblem K v = lambda M_w v.
 * Eigenvalues ascend with 1-based indexing; eigenvector columns are
 * M_w-orthonormal.
 */
struct SpectrumResult {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors; // column i pairs with eigenvalues[i]
    ClusterSet clusters;
    Eigen::VectorXd residual_norms; // ||K v - lambda M v||_2 per pair
};

/// Lowest `count` eigenpairs via dense reduction to standard form. Each
/// Galerkin eigenvalue is a min-max value over the trial space, hence an
/// upper bound for the true eigenvalue when K >= 0.
inline SpectrumResult solve(const PaneitzSystem& system, int count, double cluster_tol = 1e-6) {
    const int nb = static_cast<int>(system.energy.rows());
    if (count < 0 || count > nb)
        throw UsageError("solve: count must lie in [0, basis_dim]");
    SpectrumResult res;
    if (count == 0) {
        res.clusters.tolerance = cluster_tol;
        return res;
    }

    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mass_es(system.mass,
                                                               Eigen::EigenvaluesOnly);
        double lo = mass_es.eigenvalues().minCoeff();
        double hi = mass_es.eigenvalues().maxCoeff();
        if (lo <= 0 || hi / lo > 1e12)
            throw NumericalError("solve: mass matrix is numerically singular");
    }

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(system.energy, system.mass);
    if (ges.info() != Eigen::Success) throw NumericalError("solve: eigensolver failed");

    res.eigenvalues = ges.eigenvalues().head(count);
    res.eigenvectors = ges.eigenvectors().leftCols(count);
    res.clusters = cluster(res.eigenvalues, cluster_tol);
    res.residual_norms.resize(count);
    for (int i = 0; i < count; ++i)
        res.residual_norms[i] = (system.energy * res.eigenvectors.col(i) -
                                 res.eigenvalues[i] * system.mass * res.eigenvectors.col(i))
                                    .norm();
    return res;
}

/// Rayleigh quotient (c^T K c) / (c^T M_w c).
inline double rayleigh(const PaneitzSystem& system, const Eigen::VectorXd& coeffs) {
    if (coeffs.size() != system.energy.rows())
        throw UsageError("rayleigh: coefficient count mismatch");
    double denom = coeffs.dot(system.mass * coeffs);
    if (coeffs.norm() == 0 || denom == 0) throw UsageError("rayleigh: zero vector");
    return coeffs.dot(system.energy * coeffs) / denom;
}

/// Dimension of the numerical kernel (|lambda| <= tol).
inline int kernel_dimension(const Eigen::VectorXd& eigenvalues, double tol = 1e-8) {
    int n = 0;
    for (int i = 0; i < eigenvalues.size(); ++i)
        if (std::abs(eigenvalues[i]) <= tol) ++n;
    return n;
}

/// Count of negative eigenvalues (lambda < -tol).
inline int negative_count(const Eigen::VectorXd& eigenvalues, double tol = 1e-8) {
    int n = 0;
    for (int i = 0; i < eigenvalues.size(); ++i)
        if (eigenvalues[i] < -tol) ++n;
    return n;
}

} // namespace paneitz
