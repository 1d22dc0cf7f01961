#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "paneitz/errors.hpp"
#include "paneitz/harmonic.hpp"
#include "paneitz/quadrature.hpp"

namespace paneitz {

enum class BackendKind { Sphere4, Torus4, S2xS2 };

inline const char* backend_kind_name(BackendKind k) {
    switch (k) {
        case BackendKind::Sphere4: return "sphere";
        case BackendKind::Torus4: return "torus";
        case BackendKind::S2xS2: return "s2xs2";
    }
    return "?";
}

/// One orthonormalized block of restricted harmonic polynomials of a fixed
/// degree: rows of `coeffs` are coefficient vectors over `mono`.
struct HarmonicBlock {
    int degree = 0;
    int offset = 0; // index of the first basis function of this block
    MonomialSet mono;
    Eigen::MatrixXd coeffs;
};

struct SphereInfo {
    double radius = 1.0;
    int max_degree = 0;
    std::vector<HarmonicBlock> blocks;
};

struct TorusInfo {
    Eigen::Vector4d periods;
    int max_freq = 0;
    int nodes_per_axis = 0;
    std::vector<Eigen::Vector4i> freq; // per basis function
    std::vector<int> phase;            // 0 = cos (constant for k = 0), 1 = sin
};

struct ProductInfo {
    double radius_a = 1.0, radius_b = 1.0;
    int max_degree = 0;
    std::vector<std::pair<int, int>> factor_index;   // per basis fn: index into each factor basis
    std::vector<std::pair<int, int>> factor_degrees; // per basis fn: (l1, l2)
};

/**
 * Discretization substrate for one model 4-manifold: quadrature nodes and
 * weights for the base metric, a Laplace eigenbasis evaluated at the nodes
 * together with tangential gradients and Laplacians, and the constant
 * curvature data of the backend. Immutable after construction.
 *
 * Conventions: geometer's Laplacian (trace of the Hessian), so
 * laplacians.row(a) == -laplace_eigenvalue[a] * values.row(a) with
 * laplace_eigenvalue >= 0. Gradients are ambient tangential components
 * (5 for the sphere, 4 coordinate components for the torus, 3+3 for S2xS2);
 * the dot product of two gradient columns is the metric inner product.
 */
struct ManifoldBackend {
    BackendKind kind = BackendKind::Sphere4;

    Eigen::MatrixXd nodes;   // ambient_dim x num_nodes
    Eigen::VectorXd weights; // num_nodes, positive, sums to base volume
    int basis_dim = 0;

    Eigen::MatrixXd values;                // basis_dim x num_nodes
    std::vector<Eigen::MatrixXd> gradients; // one matrix per ambient component
    Eigen::MatrixXd laplacians;            // basis_dim x num_nodes
    Eigen::VectorXd laplace_eigenvalue;    // mu_a >= 0
    std::vector<Eigen::MatrixXd> hessians; // torus only: components (i<=j), else empty
    Eigen::VectorXd scalar_curvature;      // per node (constant on these backends)
    std::vector<int> degree_label;         // sphere: l; torus: |k|_inf; s2xs2: l1+l2

    double volume = 0.0;

    std::optional<SphereInfo> sphere;
    std::optional<TorusInfo> torus;
    std::optional<ProductInfo> product;

    int ambient_dim() const { return static_cast<int>(nodes.rows()); }
    int num_nodes() const { return static_cast<int>(nodes.cols()); }

    /// Ric_g(u, v) at node q for ambient tangential vectors u, v.
    double ricci(int q, const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        (void)q; // the shipped backends have node-independent Ricci curvature
        switch (kind) {
            case BackendKind::Sphere4: {
                double r = sphere->radius;
                return 3.0 / (r * r) * u.dot(v);
            }
            case BackendKind::Torus4:
                return 0.0;
            case BackendKind::S2xS2: {
                double a = product->radius_a, b = product->radius_b;
                return u.head(3).dot(v.head(3)) / (a * a) + u.tail(3).dot(v.tail(3)) / (b * b);
            }
        }
        return 0.0;
    }

    static constexpr std::array<std::pair<int, int>, 10> hessian_components() {
        return {{{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}, {3, 3}}};
    }
};

/// Quadrature sum of node values against the backend weights.
inline double integrate(const ManifoldBackend& backend, const Eigen::VectorXd& node_values) {
    if (node_values.size() != backend.weights.size())
        throw UsageError("integrate: node value count does not match quadrature size");
    return backend.weights.dot(node_values);
}

namespace detail {

/// Symmetric inverse square root via eigendecomposition.
inline Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    if (es.eigenvalues().minCoeff() <= 0)
        throw NumericalError("gram matrix is not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

/**
 * Orthonormalized restricted-harmonic basis data for a round sphere S^{d-1}
 * in d ambient variables, evaluated on the supplied nodes: per-degree
 * coefficient blocks plus stacked values, ambient tangential gradients and
 * Laplacians. mu(l) supplies the Laplace eigenvalue per degree.
 */
struct SphereBasisResult {
    std::vector<HarmonicBlock> blocks;
    Eigen::MatrixXd values;
    std::vector<Eigen::MatrixXd> gradients;
    Eigen::MatrixXd laplacians;
    Eigen::VectorXd laplace_eigenvalue;
    std::vector<int> degree;
};

inline SphereBasisResult build_sphere_basis(int nvars, int max_degree, double radius,
                                            const Eigen::MatrixXd& nodes,
                                            const Eigen::VectorXd& weights) {
    const int nq = static_cast<int>(nodes.cols());
    SphereBasisResult out;

    int total = 0;
    std::vector<Eigen::MatrixXd> block_values;
    for (int l = 0; l <= max_degree; ++l) {
        HarmonicBlock block;
        block.degree = l;
        block.offset = total;
        block.mono = monomials(nvars, l);
        Eigen::MatrixXd raw = harmonic_coefficients(nvars, l);
        Eigen::MatrixXd mono_vals = monomial_values(block.mono, nodes);
        Eigen::MatrixXd vraw = raw * mono_vals;
        Eigen::MatrixXd scaled = vraw * weights.cwiseSqrt().asDiagonal();
        Eigen::MatrixXd gram = scaled * scaled.transpose();
        block.coeffs = inverse_sqrt(gram) * raw;
        block_values.push_back(block.coeffs * mono_vals);
        total += static_cast<int>(block.coeffs.rows());
        out.blocks.push_back(std::move(block));
    }

    out.values.resize(total, nq);
    out.laplacians.resize(total, nq);
    out.laplace_eigenvalue.resize(total);
    out.gradients.assign(nvars, Eigen::MatrixXd::Zero(total, nq));
    out.degree.resize(total);

    const double r2 = radius * radius;
    for (size_t bi = 0; bi < out.blocks.size(); ++bi) {
        const HarmonicBlock& block = out.blocks[bi];
        const int l = block.degree;
        const int rows = static_cast<int>(block.coeffs.rows());
        const double mu = l * (l + nvars - 2) / r2; // l(l+d-1) on S^{d} in d+1 vars
        out.values.middleRows(block.offset, rows) = block_values[bi];
        out.laplacians.middleRows(block.offset, rows) = -mu * block_values[bi];
        out.laplace_eigenvalue.segment(block.offset, rows).setConstant(mu);
        for (int b = 0; b < rows; ++b) out.degree[block.offset + b] = l;

        if (l > 0) {
            MonomialSet lower = monomials(nvars, l - 1);
            Eigen::MatrixXd lower_vals = monomial_values(lower, nodes);
            for (int v = 0; v < nvars; ++v) {
                Eigen::MatrixXd dmat = derivative_matrix(block.mono, lower, v);
                Eigen::MatrixXd ambient = (block.coeffs * dmat.transpose()) * lower_vals;
                // tangential part: subtract the radial component (l/r^2) p x_v
                ambient.noalias() -=
                    (double(l) / r2) *
                    (block_values[bi] * nodes.row(v).asDiagonal());
                out.gradients[v].middleRows(block.offset, rows) = ambient;
            }
        }
    }
    return out;
}

/// Tensor-product quadrature on S^2(r): Gauss-Legendre in cos(theta), uniform
/// in phi. Exact for polynomials of total degree <= exactness.
inline void s2_quadrature(double radius, int exactness, Eigen::MatrixXd& nodes,
                          Eigen::VectorXd& weights) {
    const int nt = (exactness + 2) / 2; // 2*nt - 1 >= exactness
    const int nphi = exactness + 1;
    Rule1D gl = gauss_legendre(nt);
    Rule1D az = uniform_periodic(nphi, 2 * std::numbers::pi);
    const int nq = nt * nphi;
    nodes.resize(3, nq);
    weights.resize(nq);
    int q = 0;
    for (int i = 0; i < nt; ++i) {
        double t = gl.nodes[i];
        double s = std::sqrt(1.0 - t * t);
        for (int j = 0; j < nphi; ++j, ++q) {
            double phi = az.nodes[j];
            nodes.col(q) << radius * s * std::cos(phi), radius * s * std::sin(phi), radius * t;
            weights[q] = radius * radius * gl.weights[i] * az.weights[j];
        }
    }
}

} // namespace detail

struct SphereOptions {
    /// Polynomial exactness of the quadrature; 0 means the default
    /// 4 * max_degree + 4 (covers quartic products of basis functions).
    int exactness = 0;
};

/**
 * Round 4-sphere of the given radius with the real spherical harmonics
 * through `max_degree`, realized as restrictions of harmonic homogeneous
 * polynomials in the five ambient coordinates. The quadrature is a tensor
 * product of Gauss-Legendre rules in the polar angles (Chebyshev second
 * kind where the area element leaves a half-integer power) and a uniform
 * rule in the periodic angle.
 */
inline ManifoldBackend build_sphere(double radius, int max_degree, SphereOptions opts = {}) {
    if (max_degree < 2)
        throw ConfigError("build_sphere: max_degree must be >= 2 (cannot represent E_2)");
    if (radius <= 0) throw ConfigError("build_sphere: radius must be positive");

    const int exact = opts.exactness > 0 ? opts.exactness : 4 * max_degree + 4;
    const int n1 = (exact + 4) / 2;   // sin^3 jacobian adds degree 2: 2*n1-1 >= exact+2
    const int n2 = (exact + 2) / 2;   // Chebyshev-U absorbs sin^2: 2*n2-1 >= exact
    const int n3 = (exact + 2) / 2;
    const int nphi = exact + 1;

    Rule1D g1 = gauss_legendre(n1);
    Rule1D c2 = gauss_chebyshev2(n2);
    Rule1D g3 = gauss_legendre(n3);
    Rule1D az = uniform_periodic(nphi, 2 * std::numbers::pi);

    ManifoldBackend be;
    be.kind = BackendKind::Sphere4;
    const int nq = n1 * n2 * n3 * nphi;
    be.nodes.resize(5, nq);
    be.weights.resize(nq);
    const double r4 = radius * radius * radius * radius;

    int q = 0;
    for (int i = 0; i < n1; ++i) {
        const double t1 = g1.nodes[i];
        const double s1 = std::sqrt(1.0 - t1 * t1);
        const double w1 = g1.weights[i] * (1.0 - t1 * t1);
        for (int j = 0; j < n2; ++j) {
            const double t2 = c2.nodes[j];
            const double s2 = std::sqrt(1.0 - t2 * t2);
            const double w2 = c2.weights[j];
            for (int k = 0; k < n3; ++k) {
                const double t3 = g3.nodes[k];
                const double s3 = std::sqrt(1.0 - t3 * t3);
                const double w3 = g3.weights[k];
                for (int p = 0; p < nphi; ++p, ++q) {
                    const double phi = az.nodes[p];
                    be.nodes.col(q) << radius * t1, radius * s1 * t2, radius * s1 * s2 * t3,
                        radius * s1 * s2 * s3 * std::cos(phi),
                        radius * s1 * s2 * s3 * std::sin(phi);
                    be.weights[q] = r4 * w1 * w2 * w3 * az.weights[p];
                }
            }
        }
    }

    detail::SphereBasisResult basis =
        detail::build_sphere_basis(5, max_degree, radius, be.nodes, be.weights);
    be.basis_dim = static_cast<int>(basis.values.rows());
    be.values = std::move(basis.values);
    be.gradients = std::move(basis.gradients);
    be.laplacians = std::move(basis.laplacians);
    be.laplace_eigenvalue = std::move(basis.laplace_eigenvalue);
    be.degree_label = std::move(basis.degree);
    be.scalar_curvature = Eigen::VectorXd::Constant(nq, 12.0 / (radius * radius));
    be.volume = be.weights.sum();

    SphereInfo info;
    info.radius = radius;
    info.max_degree = max_degree;
    info.blocks = std::move(basis.blocks);
    be.sphere = std::move(info);
    return be;
}

struct TorusOptions {
    /// Uniform nodes per axis; 0 picks 4*max_freq+5 for max_freq 1 (quartic
    /// products plus smooth-weight margin) and 2*max_freq+5 above that.
    int nodes_per_axis = 0;
    bool with_hessians = true;
};

/// Flat 4-torus with the stated periods and the real Fourier basis through
/// |k_j| <= max_freq. R = 0, Ric = 0; coordinate Hessians are closed-form.
inline ManifoldBackend build_torus(const Eigen::Vector4d& periods, int max_freq,
                                   TorusOptions opts = {}) {
    if (max_freq < 1) throw ConfigError("build_torus: max_freq must be >= 1");
    if (periods.minCoeff() <= 0) throw ConfigError("build_torus: periods must be positive");

    const int nax = opts.nodes_per_axis > 0
                        ? opts.nodes_per_axis
                        : (max_freq == 1 ? 4 * max_freq + 5 : 2 * max_freq + 5);

    ManifoldBackend be;
    be.kind = BackendKind::Torus4;
    const int nq = nax * nax * nax * nax;
    const double vol = periods.prod();
    be.nodes.resize(4, nq);
    be.weights = Eigen::VectorXd::Constant(nq, vol / nq);
    {
        int q = 0;
        for (int a = 0; a < nax; ++a)
            for (int b = 0; b < nax; ++b)
                for (int c = 0; c < nax; ++c)
                    for (int d = 0; d < nax; ++d, ++q)
                        be.nodes.col(q) << periods[0] * a / nax, periods[1] * b / nax,
                            periods[2] * c / nax, periods[3] * d / nax;
    }

    // Canonical half-lattice: k = 0 once, otherwise first nonzero entry > 0.
    std::vector<Eigen::Vector4i> reps;
    for (int k0 = -max_freq; k0 <= max_freq; ++k0)
        for (int k1 = -max_freq; k1 <= max_freq; ++k1)
            for (int k2 = -max_freq; k2 <= max_freq; ++k2)
                for (int k3 = -max_freq; k3 <= max_freq; ++k3) {
                    Eigen::Vector4i k(k0, k1, k2, k3);
                    if (k.isZero()) continue;
                    int lead = 0;
                    while (k[lead] == 0) ++lead;
                    if (k[lead] > 0) reps.push_back(k);
                }

    TorusInfo info;
    info.periods = periods;
    info.max_freq = max_freq;
    info.nodes_per_axis = nax;
    info.freq.push_back(Eigen::Vector4i::Zero());
    info.phase.push_back(0);
    for (const auto& k : reps) {
        info.freq.push_back(k);
        info.phase.push_back(0);
        info.freq.push_back(k);
        info.phase.push_back(1);
    }

    const int nb = static_cast<int>(info.freq.size());
    be.basis_dim = nb;
    be.values.resize(nb, nq);
    be.laplacians.resize(nb, nq);
    be.laplace_eigenvalue.resize(nb);
    be.gradients.assign(4, Eigen::MatrixXd::Zero(nb, nq));
    be.degree_label.resize(nb);
    if (opts.with_hessians) be.hessians.assign(10, Eigen::MatrixXd(nb, nq));

    const double amp = std::sqrt(2.0 / vol);
    for (int b = 0; b < nb; ++b) {
        const Eigen::Vector4i& k = info.freq[b];
        Eigen::Vector4d omega;
        for (int v = 0; v < 4; ++v) omega[v] = 2 * std::numbers::pi * k[v] / periods[v];
        const double mu = omega.squaredNorm();
        be.laplace_eigenvalue[b] = mu;
        be.degree_label[b] = k.cwiseAbs().maxCoeff();

        Eigen::RowVectorXd theta = omega.transpose() * be.nodes;
        Eigen::RowVectorXd f, df; // f = value, df = "derivative profile"
        if (k.isZero()) {
            f = Eigen::RowVectorXd::Constant(nq, 1.0 / std::sqrt(vol));
            df = Eigen::RowVectorXd::Zero(nq);
        } else if (info.phase[b] == 0) {
            f = amp * theta.array().cos();
            df = -amp * theta.array().sin();
        } else {
            f = amp * theta.array().sin();
            df = amp * theta.array().cos();
        }
        be.values.row(b) = f;
        be.laplacians.row(b) = -mu * f;
        for (int v = 0; v < 4; ++v) be.gradients[v].row(b) = omega[v] * df;
        if (opts.with_hessians) {
            auto comps = ManifoldBackend::hessian_components();
            for (size_t c = 0; c < comps.size(); ++c) {
                auto [i, j] = comps[c];
                be.hessians[c].row(b) = -omega[i] * omega[j] * f;
            }
        }
    }
    be.scalar_curvature = Eigen::VectorXd::Zero(nq);
    be.volume = vol;
    be.torus = std::move(info);
    return be;
}

struct ProductOptions {
    /// Per-factor quadrature exactness; 0 means 4*max_degree+4 through
    /// max_degree 2 and 2*max_degree+4 above (node-count budget).
    int exactness = 0;
};

/// S^2(a) x S^2(b) with tensor products of per-factor spherical harmonics,
/// truncated to total degree l1 + l2 <= max_degree. Ricci curvature is
/// anisotropic: 1/a^2 on factor-a directions, 1/b^2 on factor-b.
inline ManifoldBackend build_s2xs2(double radius_a, double radius_b, int max_degree,
                                   ProductOptions opts = {}) {
    if (radius_a <= 0 || radius_b <= 0) throw ConfigError("build_s2xs2: radii must be positive");
    if (max_degree < 1) throw ConfigError("build_s2xs2: max_degree must be >= 1");

    const int exact = opts.exactness > 0
                          ? opts.exactness
                          : (max_degree <= 2 ? 4 * max_degree + 4 : 2 * max_degree + 4);

    Eigen::MatrixXd nodes_a, nodes_b;
    Eigen::VectorXd w_a, w_b;
    detail::s2_quadrature(radius_a, exact, nodes_a, w_a);
    detail::s2_quadrature(radius_b, exact, nodes_b, w_b);

    detail::SphereBasisResult fa = detail::build_sphere_basis(3, max_degree, radius_a, nodes_a, w_a);
    detail::SphereBasisResult fb = detail::build_sphere_basis(3, max_degree, radius_b, nodes_b, w_b);

    const int nqa = static_cast<int>(nodes_a.cols());
    const int nqb = static_cast<int>(nodes_b.cols());
    const int nq = nqa * nqb;

    ManifoldBackend be;
    be.kind = BackendKind::S2xS2;
    be.nodes.resize(6, nq);
    be.weights.resize(nq);
    for (int i = 0; i < nqa; ++i)
        for (int j = 0; j < nqb; ++j) {
            int q = i * nqb + j;
            be.nodes.col(q) << nodes_a.col(i), nodes_b.col(j);
            be.weights[q] = w_a[i] * w_b[j];
        }

    ProductInfo info;
    info.radius_a = radius_a;
    info.radius_b = radius_b;
    info.max_degree = max_degree;
    for (int ia = 0; ia < fa.values.rows(); ++ia)
        for (int ib = 0; ib < fb.values.rows(); ++ib)
            if (fa.degree[ia] + fb.degree[ib] <= max_degree) {
                info.factor_index.emplace_back(ia, ib);
                info.factor_degrees.emplace_back(fa.degree[ia], fb.degree[ib]);
            }

    const int nb = static_cast<int>(info.factor_index.size());
    be.basis_dim = nb;
    be.values.resize(nb, nq);
    be.laplacians.resize(nb, nq);
    be.laplace_eigenvalue.resize(nb);
    be.gradients.assign(6, Eigen::MatrixXd(nb, nq));
    be.degree_label.resize(nb);

    for (int b = 0; b < nb; ++b) {
        auto [ia, ib] = info.factor_index[b];
        const double mu = fa.laplace_eigenvalue[ia] + fb.laplace_eigenvalue[ib];
        be.laplace_eigenvalue[b] = mu;
        be.degree_label[b] = fa.degree[ia] + fb.degree[ib];
        for (int i = 0; i < nqa; ++i) {
            const double va = fa.values(ia, i);
            for (int v = 0; v < 3; ++v) {
                be.gradients[v].row(b).segment(i * nqb, nqb) =
                    fa.gradients[v](ia, i) * fb.values.row(ib);
                be.gradients[3 + v].row(b).segment(i * nqb, nqb) = va * fb.gradients[v].row(ib);
            }
            be.values.row(b).segment(i * nqb, nqb) = va * fb.values.row(ib);
        }
        be.laplacians.row(b) = -mu * be.values.row(b);
    }

    be.scalar_curvature = Eigen::VectorXd::Constant(
        nq, 2.0 / (radius_a * radius_a) + 2.0 / (radius_b * radius_b));
    be.volume = be.weights.sum();
    be.product = std::move(info);
    return be;
}

/**
 * The conformal exponent w defining g_w = e^{2w} g. Either basis-backed
 * (coefficients in the backend's basis, node values cached) or node-valued
 * only, which is how pulled-back factors are represented.
 */
struct ConformalFactor {
    Eigen::VectorXd coeffs;      // empty for node-valued factors
    Eigen::VectorXd node_values; // w(x_q)

    bool has_coeffs() const { return coeffs.size() > 0; }

    static ConformalFactor zero(const ManifoldBackend& backend) {
        ConformalFactor w;
        w.coeffs = Eigen::VectorXd::Zero(backend.basis_dim);
        w.node_values = Eigen::VectorXd::Zero(backend.num_nodes());
        return w;
    }

    static ConformalFactor from_coeffs(const ManifoldBackend& backend, Eigen::VectorXd c) {
        if (c.size() != backend.basis_dim)
            throw UsageError("ConformalFactor: coefficient count does not match basis");
        ConformalFactor w;
        w.node_values = backend.values.transpose() * c;
        w.coeffs = std::move(c);
        if (!w.node_values.allFinite())
            throw NumericalError("ConformalFactor: non-finite node values");
        return w;
    }

    static ConformalFactor from_node_values(Eigen::VectorXd v) {
        ConformalFactor w;
        w.node_values = std::move(v);
        if (!w.node_values.allFinite())
            throw NumericalError("ConformalFactor: non-finite node values");
        return w;
    }

    /// e^{4w} at the nodes (the conformal volume density in dimension four).
    Eigen::VectorXd density4() const { return (4.0 * node_values.array()).exp(); }
};

/// Values of every basis function at arbitrary ambient points; sphere only
/// (the basis there is polynomial, so off-node evaluation is exact).
inline Eigen::MatrixXd evaluate_basis_at(const ManifoldBackend& backend,
                                         const Eigen::MatrixXd& points) {
    if (backend.kind != BackendKind::Sphere4)
        throw UnsupportedBackendError("evaluate_basis_at: only the sphere basis is polynomial");
    const int npts = static_cast<int>(points.cols());
    Eigen::MatrixXd out(backend.basis_dim, npts);
    for (const HarmonicBlock& block : backend.sphere->blocks) {
        Eigen::MatrixXd mono_vals = monomial_values(block.mono, points);
        out.middleRows(block.offset, block.coeffs.rows()) = block.coeffs * mono_vals;
    }
    return out;
}

/// w evaluated at arbitrary sphere points (requires a basis-backed factor).
/// The coefficients are folded into one polynomial per degree block first,
/// so the cost is one monomial evaluation pass rather than one per basis
/// function.
inline Eigen::VectorXd evaluate_factor_at(const ManifoldBackend& backend,
                                          const ConformalFactor& w,
                                          const Eigen::MatrixXd& points) {
    if (backend.kind != BackendKind::Sphere4)
        throw UnsupportedBackendError("evaluate_factor_at: only the sphere basis is polynomial");
    if (!w.has_coeffs())
        throw UsageError("evaluate_factor_at: factor has no basis coefficients");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(points.cols());
    for (const HarmonicBlock& block : backend.sphere->blocks) {
        const int rows = static_cast<int>(block.coeffs.rows());
        Eigen::RowVectorXd poly =
            w.coeffs.segment(block.offset, rows).transpose() * block.coeffs;
        if (poly.cwiseAbs().maxCoeff() == 0.0) continue;
        out += (poly * monomial_values(block.mono, points)).transpose();
    }
    return out;
}

} // namespace paneitz
