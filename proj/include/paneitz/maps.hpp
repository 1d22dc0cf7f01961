#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "paneitz/errors.hpp"
#include "paneitz/operator.hpp"
#include "paneitz/spectrum.hpp"

namespace paneitz {

/// Map into the round sphere S^{p-1}, stored as p coefficient vectors in the
/// backend basis. The pointwise constraint sum_i U_i^2 = 1 is checked at the
/// nodes by the operations; no projection is ever applied.
struct SphereValuedMap {
    std::vector<Eigen::VectorXd> components;

    int p() const { return static_cast<int>(components.size()); }
};

namespace detail {

/// P_g applied pointwise through the Laplace eigenstructure; sphere and
/// torus only (closed-form symbols mu(mu + 2/r^2) and mu^2).
inline Eigen::VectorXd paneitz_multipliers(const ManifoldBackend& backend) {
    Eigen::ArrayXd mu = backend.laplace_eigenvalue.array();
    switch (backend.kind) {
        case BackendKind::Sphere4: {
            const double r2 = backend.sphere->radius * backend.sphere->radius;
            return (mu * (mu + 2.0 / r2)).matrix();
        }
        case BackendKind::Torus4:
            return mu.square().matrix();
        default:
            throw UnsupportedBackendError(
                "pointwise Paneitz application needs the sphere or torus backend");
    }
}

inline void check_on_sphere(const ManifoldBackend& backend, const SphereValuedMap& map,
                            double tol) {
    if (map.p() < 2) throw UsageError("sphere-valued maps need at least 2 components");
    Eigen::VectorXd norm2 = Eigen::VectorXd::Zero(backend.num_nodes());
    for (const auto& c : map.components) {
        if (c.size() != backend.basis_dim)
            throw UsageError("map component coefficient count mismatch");
        norm2 += (backend.values.transpose() * c).cwiseAbs2();
    }
    double dev = (norm2.array() - 1.0).abs().maxCoeff();
    if (dev > tol)
        throw InvalidMapError("map leaves the unit sphere at the nodes (max deviation " +
                              std::to_string(dev) + ")");
}

} // namespace detail

/// Max-norm residual of the fourth-order critical-map system
/// P_g(U) = e_g(U) U over all nodes and components.
inline double paneitz_map_residual(const ManifoldBackend& backend, const SphereValuedMap& map) {
    detail::check_on_sphere(backend, map, 1e-6);
    Eigen::VectorXd mult = detail::paneitz_multipliers(backend);
    Eigen::VectorXd e = density(backend, map.components);
    double residual = 0.0;
    for (const auto& c : map.components) {
        Eigen::VectorXd pu = backend.values.transpose() * mult.cwiseProduct(c);
        Eigen::VectorXd u = backend.values.transpose() * c;
        residual = std::max(residual, (pu - e.cwiseProduct(u)).cwiseAbs().maxCoeff());
    }
    return residual;
}

/**
 * Outcome of turning a critical map with positive density into a metric:
 * w = (1/4) log e_g(U), under which the components become eigenfunctions
 * with eigenvalue one.
 */
struct MetricFromMapResult {
    ConformalFactor w;
    int k = 0;              // 1-based index where eigenvalue 1 enters the spectrum
    int multiplicity = 0;   // size of its cluster
    double component_residual = 0.0; // max ||K c - M c|| over components
    SpectrumResult spectrum;
};

inline MetricFromMapResult metric_from_map(const ManifoldBackend& backend,
                                           const SphereValuedMap& map,
                                           double eigen_tol = 1e-6) {
    detail::check_on_sphere(backend, map, 1e-6);
    Eigen::VectorXd e = density(backend, map.components);
    int worst = 0;
    double emin = e.minCoeff(&worst);
    if (emin <= 0)
        throw HypothesisViolationError(
            "metric_from_map: energy density is not positive (min " + std::to_string(emin) +
                " at node " + std::to_string(worst) + ")",
            worst);

    MetricFromMapResult out;
    out.w = ConformalFactor::from_node_values(0.25 * e.array().log().matrix());

    PaneitzSystem sys;
    sys.energy = assemble_energy(backend);
    sys.mass = assemble_mass(backend, e); // e^{4w} = e exactly
    sys.conformal_factor = out.w;

    for (const auto& c : map.components) {
        double res = (sys.energy * c - sys.mass * c).norm();
        out.component_residual = std::max(out.component_residual, res);
    }
    double scale = 1.0; // components are node-normalized, K c has unit-order entries
    if (out.component_residual > eigen_tol * scale)
        throw NumericalError("metric_from_map: components are not eigenvectors of the "
                             "re-weighted problem (residual " +
                             std::to_string(out.component_residual) + ")");

    int count = std::min(backend.basis_dim, 2 * map.p() + 8);
    while (true) {
        out.spectrum = solve(sys, count);
        // cluster containing the eigenvalue nearest 1
        int nearest = 0;
        (out.spectrum.eigenvalues.array() - 1.0).abs().minCoeff(&nearest);
        auto group = out.spectrum.clusters.group_of(nearest + 1);
        if (group.second < count || count == backend.basis_dim) {
            out.k = group.first;
            out.multiplicity = group.second - group.first + 1;
            break;
        }
        count = std::min(backend.basis_dim, 2 * count);
    }
    return out;
}

} // namespace paneitz
