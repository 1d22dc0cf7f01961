#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <thread>
#include <vector>

#include "paneitz/errors.hpp"
#include "paneitz/geometry.hpp"

namespace paneitz {

namespace detail {

// Node ranges are split into a fixed chunk count so that the floating-point
// reduction order is independent of how many threads actually run.
constexpr int kAssemblyChunks = 16;

/// A * diag(d) * A^T over a node slice, assembled exactly symmetric by
/// splitting d by sign and using self-adjoint rank updates.
inline Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& a, const Eigen::VectorXd& d) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd pos = d.cwiseMax(0.0).cwiseSqrt();
    Eigen::VectorXd neg = (-d).cwiseMax(0.0).cwiseSqrt();
    if (pos.maxCoeff() > 0)
        out.selfadjointView<Eigen::Lower>().rankUpdate(a * pos.asDiagonal(), 1.0);
    if (neg.maxCoeff() > 0)
        out.selfadjointView<Eigen::Lower>().rankUpdate(a * neg.asDiagonal(), -1.0);
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

/// Evaluates chunk_fn over kAssemblyChunks contiguous node ranges in
/// parallel and reduces the partial matrices in fixed chunk order.
template <typename ChunkFn>
Eigen::MatrixXd chunked_assembly(int num_nodes, int dim, ChunkFn&& chunk_fn) {
    const int nchunks = std::min(kAssemblyChunks, std::max(1, num_nodes));
    std::vector<Eigen::MatrixXd> partial(nchunks);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int c = next.fetch_add(1); c < nchunks; c = next.fetch_add(1)) {
            int begin = static_cast<int>(static_cast<long long>(num_nodes) * c / nchunks);
            int end = static_cast<int>(static_cast<long long>(num_nodes) * (c + 1) / nchunks);
            partial[c] = chunk_fn(begin, end - begin);
        }
    };
    unsigned nthreads = std::min<unsigned>(std::thread::hardware_concurrency(),
                                           static_cast<unsigned>(nchunks));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim, dim);
    for (int c = 0; c < nchunks; ++c) sum += partial[c];
    return sum;
}

/// Ricci weight of ambient gradient component v (the shipped backends have
/// diagonal Ricci in the ambient frame).
inline double ricci_component_weight(const ManifoldBackend& be, int v) {
    switch (be.kind) {
        case BackendKind::Sphere4: {
            double r = be.sphere->radius;
            return 3.0 / (r * r);
        }
        case BackendKind::Torus4:
            return 0.0;
        case BackendKind::S2xS2: {
            double a = be.product->radius_a, b = be.product->radius_b;
            return v < 3 ? 1.0 / (a * a) : 1.0 / (b * b);
        }
    }
    return 0.0;
}

} // namespace detail

/**
 * Galerkin data for the Paneitz eigenproblem: the conformally invariant
 * energy matrix K_ab = int { Dphi_a Dphi_b + (2/3) R <grad_a, grad_b>
 * - 2 Ric(grad_a, grad_b) } dv_g, and the weighted mass matrix
 * (M_w)_ab = int e^{4w} phi_a phi_b dv_g. All conformal dependence lives in
 * the mass matrix.
 */
struct PaneitzSystem {
    Eigen::MatrixXd energy; // K, symmetric, base-metric only
    Eigen::MatrixXd mass;   // M_w, symmetric positive definite
    ConformalFactor conformal_factor;
};

/// Energy matrix of the base metric (independent of any conformal factor).
inline Eigen::MatrixXd assemble_energy(const ManifoldBackend& backend) {
    const int nb = backend.basis_dim;
    const int nq = backend.num_nodes();
    return detail::chunked_assembly(nq, nb, [&](int begin, int len) {
        Eigen::MatrixXd part = detail::weighted_gram(backend.laplacians.middleCols(begin, len),
                                                     backend.weights.segment(begin, len));
        for (int v = 0; v < backend.ambient_dim(); ++v) {
            double rw = detail::ricci_component_weight(backend, v);
            Eigen::VectorXd d =
                backend.weights.segment(begin, len).array() *
                ((2.0 / 3.0) * backend.scalar_curvature.segment(begin, len).array() - 2.0 * rw);
            part += detail::weighted_gram(backend.gradients[v].middleCols(begin, len), d);
        }
        return part;
    });
}

/// Mass matrix with node-level volume density e^{4w}.
inline Eigen::MatrixXd assemble_mass(const ManifoldBackend& backend,
                                     const Eigen::VectorXd& density4) {
    if (density4.size() != backend.weights.size())
        throw UsageError("assemble_mass: density node count does not match quadrature");
    const int nb = backend.basis_dim;
    return detail::chunked_assembly(backend.num_nodes(), nb, [&](int begin, int len) {
        Eigen::VectorXd d = backend.weights.segment(begin, len).cwiseProduct(
            density4.segment(begin, len));
        return detail::weighted_gram(backend.values.middleCols(begin, len), d);
    });
}

inline PaneitzSystem assemble(const ManifoldBackend& backend, const ConformalFactor& w) {
    if (w.node_values.size() != backend.num_nodes())
        throw UsageError("assemble: conformal factor lives on a different node set");
    PaneitzSystem sys;
    sys.energy = assemble_energy(backend);
    sys.mass = assemble_mass(backend, w.density4());
    sys.conformal_factor = w;
    return sys;
}

/// P_{g_r} phi on the sphere backend in coefficient space: each Laplace mode
/// is scaled by mu (mu + 2/r^2).
inline Eigen::VectorXd apply_paneitz_sphere(const ManifoldBackend& backend,
                                            const Eigen::VectorXd& coeffs) {
    if (backend.kind != BackendKind::Sphere4)
        throw UnsupportedBackendError("apply_paneitz_sphere: sphere backend required");
    if (coeffs.size() != backend.basis_dim)
        throw UsageError("apply_paneitz_sphere: coefficient count mismatch");
    const double r2 = backend.sphere->radius * backend.sphere->radius;
    Eigen::ArrayXd mu = backend.laplace_eigenvalue.array();
    return (mu * (mu + 2.0 / r2) * coeffs.array()).matrix();
}

/// L2 projection of node values onto the (orthonormal) basis.
inline Eigen::VectorXd project_to_basis(const ManifoldBackend& backend,
                                        const Eigen::VectorXd& node_values) {
    if (node_values.size() != backend.weights.size())
        throw UsageError("project_to_basis: node count mismatch");
    return backend.values * backend.weights.cwiseProduct(node_values);
}

namespace detail {

/// Projects node values into the basis, insisting the function is actually
/// representable there (used where truncation would silently corrupt).
inline Eigen::VectorXd project_exactly(const ManifoldBackend& backend,
                                       const Eigen::VectorXd& node_values, int required_degree,
                                       const char* what) {
    Eigen::VectorXd c = project_to_basis(backend, node_values);
    Eigen::VectorXd back = backend.values.transpose() * c;
    double scale = std::max(1.0, node_values.cwiseAbs().maxCoeff());
    if ((back - node_values).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw TruncationError(std::string(what) + ": function leaves the truncated basis",
                              required_degree);
    return c;
}

} // namespace detail

/**
 * Max-norm residual between the two sides of the product rule for P_g on the
 * sphere: the left side applies P to the projected product, the right side
 * is evaluated term by term from node data. Requires deg(phi) + deg(psi)
 * within the truncation.
 */
inline double leibniz_residual(const ManifoldBackend& backend, const Eigen::VectorXd& phi_coeffs,
                               const Eigen::VectorXd& psi_coeffs) {
    if (backend.kind != BackendKind::Sphere4)
        throw UnsupportedBackendError("leibniz_residual: sphere backend required");
    if (phi_coeffs.size() != backend.basis_dim || psi_coeffs.size() != backend.basis_dim)
        throw UsageError("leibniz_residual: coefficient count mismatch");

    int deg_phi = 0, deg_psi = 0;
    for (int b = 0; b < backend.basis_dim; ++b) {
        if (std::abs(phi_coeffs[b]) > 1e-14) deg_phi = std::max(deg_phi, backend.degree_label[b]);
        if (std::abs(psi_coeffs[b]) > 1e-14) deg_psi = std::max(deg_psi, backend.degree_label[b]);
    }
    const int required = deg_phi + deg_psi;
    if (required > backend.sphere->max_degree)
        throw TruncationError("leibniz_residual: product degree exceeds truncation", required);

    const double r2 = backend.sphere->radius * backend.sphere->radius;
    const Eigen::ArrayXd mu = backend.laplace_eigenvalue.array();

    auto node_vals = [&](const Eigen::VectorXd& c) -> Eigen::VectorXd {
        return backend.values.transpose() * c;
    };

    Eigen::VectorXd phi = node_vals(phi_coeffs), psi = node_vals(psi_coeffs);

    // Left side: P applied to the product.
    Eigen::VectorXd prod = phi.cwiseProduct(psi);
    Eigen::VectorXd prod_coeffs = detail::project_exactly(backend, prod, required, "leibniz");
    Eigen::VectorXd left = node_vals(apply_paneitz_sphere(backend, prod_coeffs));

    // Right side, term by term.
    Eigen::VectorXd p_phi = node_vals(apply_paneitz_sphere(backend, phi_coeffs));
    Eigen::VectorXd p_psi = node_vals(apply_paneitz_sphere(backend, psi_coeffs));
    Eigen::VectorXd lap_phi = backend.laplacians.transpose() * phi_coeffs;
    Eigen::VectorXd lap_psi = backend.laplacians.transpose() * psi_coeffs;

    Eigen::VectorXd grad_inner = Eigen::VectorXd::Zero(backend.num_nodes());
    Eigen::VectorXd gdlap_psi = Eigen::VectorXd::Zero(backend.num_nodes()); // <grad(Dphi), grad psi>
    Eigen::VectorXd gdlap_phi = Eigen::VectorXd::Zero(backend.num_nodes()); // <grad(Dpsi), grad phi>
    Eigen::VectorXd dphi_c = (-mu * phi_coeffs.array()).matrix();
    Eigen::VectorXd dpsi_c = (-mu * psi_coeffs.array()).matrix();
    for (int v = 0; v < backend.ambient_dim(); ++v) {
        Eigen::VectorXd gp = backend.gradients[v].transpose() * phi_coeffs;
        Eigen::VectorXd gq = backend.gradients[v].transpose() * psi_coeffs;
        grad_inner += gp.cwiseProduct(gq);
        gdlap_psi += (backend.gradients[v].transpose() * dphi_c).cwiseProduct(gq);
        gdlap_phi += (backend.gradients[v].transpose() * dpsi_c).cwiseProduct(gp);
    }
    Eigen::VectorXd gi_coeffs = detail::project_exactly(backend, grad_inner, required, "leibniz");
    Eigen::VectorXd lap_grad_inner =
        backend.values.transpose() * (-mu * gi_coeffs.array()).matrix();

    const double scal = 12.0 / r2;          // R_g
    const double ric = 3.0 / r2;            // Ric = (3/r^2) g on gradients
    Eigen::VectorXd right = psi.cwiseProduct(p_phi) + phi.cwiseProduct(p_psi) +
                            2.0 * lap_phi.cwiseProduct(lap_psi) + 2.0 * gdlap_psi +
                            2.0 * gdlap_phi + 2.0 * lap_grad_inner -
                            (4.0 / 3.0) * scal * grad_inner + 4.0 * ric * grad_inner;

    return (left - right).cwiseAbs().maxCoeff();
}

/**
 * Pointwise fourth-order energy density of a multi-component map whose
 * components lie in the basis:
 *   e_g(U)(x) = sum_i { U_i D^2 U_i + (2/3) R |grad U_i|^2
 *                       - 2 Ric(grad U_i, grad U_i) }(x).
 * D^2 U_i uses the Laplace eigenstructure (mu^2 per mode).
 */
inline Eigen::VectorXd density(const ManifoldBackend& backend,
                               const std::vector<Eigen::VectorXd>& map_components) {
    if (map_components.size() < 2)
        throw UsageError("density: sphere-valued maps need at least 2 components");
    const int nq = backend.num_nodes();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(nq);
    Eigen::ArrayXd mu2 = backend.laplace_eigenvalue.array().square();
    for (const Eigen::VectorXd& c : map_components) {
        if (c.size() != backend.basis_dim) throw UsageError("density: coefficient count mismatch");
        Eigen::VectorXd u = backend.values.transpose() * c;
        Eigen::VectorXd bilap = backend.values.transpose() * (mu2 * c.array()).matrix();
        e += u.cwiseProduct(bilap);
        for (int v = 0; v < backend.ambient_dim(); ++v) {
            Eigen::VectorXd g = backend.gradients[v].transpose() * c;
            double rw = detail::ricci_component_weight(backend, v);
            e.array() += g.array().square() *
                         ((2.0 / 3.0) * backend.scalar_curvature.array() - 2.0 * rw);
        }
    }
    return e;
}

} // namespace paneitz
