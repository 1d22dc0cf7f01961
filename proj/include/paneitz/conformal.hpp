#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "paneitz/errors.hpp"
#include "paneitz/geometry.hpp"
#include "paneitz/operator.hpp"

namespace paneitz {

/// Total volume of g_w = e^{2w} g by quadrature.
inline double conformal_volume(const ManifoldBackend& backend, const ConformalFactor& w) {
    return integrate(backend, w.density4());
}

/**
 * Shifts w by a constant so that Vol(M, g_w) equals the base volume:
 * w' = w - (1/4) log( int e^{4w} dv_g / V_target ). Basis-backed factors stay
 * basis-backed (the constant mode absorbs the shift).
 */
inline ConformalFactor normalize_volume(const ManifoldBackend& backend, const ConformalFactor& w,
                                        double target_volume = 0.0) {
    const double target = target_volume > 0 ? target_volume : backend.volume;
    const double shift = -0.25 * std::log(conformal_volume(backend, w) / target);
    if (w.has_coeffs()) {
        Eigen::VectorXd c = w.coeffs;
        // constant basis function has value 1/sqrt(V)
        c[0] += shift * std::sqrt(backend.volume);
        return ConformalFactor::from_coeffs(backend, c);
    }
    return ConformalFactor::from_node_values(w.node_values.array() + shift);
}

// ---------------------------------------------------------------------------
// Conformal curvature of e^{2w} g on the flat torus
// ---------------------------------------------------------------------------

/**
 * Curvature and metric data of ghat = e^{2w} g on the flat 4-torus, computed
 * from node values, gradients and coordinate Hessians of w:
 *   Rhat      = -6 e^{-2w} (Dw + |grad w|^2)
 *   Rhat_ij   = -2 (w_ij - w_i w_j) - (Dw + 2 |grad w|^2) delta_ij  (frame components)
 *   Dhat(phi) = e^{-2w} (Dphi + 2 <grad w, grad phi>)
 * plus the volume density e^{4w} and the gradient inner-product scale
 * e^{-2w}. Everything a fresh energy assembly in ghat needs.
 */
struct TorusConformalData {
    Eigen::VectorXd scalar_curvature;       // Rhat at nodes
    std::vector<Eigen::VectorXd> ricci;     // 10 components (i<=j order) at nodes
    Eigen::VectorXd volume_weights;         // e^{4w}
    Eigen::VectorXd gradient_scale;         // e^{-2w}, for <grad,grad>_ghat
    Eigen::MatrixXd laplacians_hat;         // Dhat(phi_a) at nodes, basis_dim x nq

    double ricci_at(int q, const Eigen::Vector4d& u, const Eigen::Vector4d& v) const {
        auto comps = ManifoldBackend::hessian_components();
        double s = 0;
        for (size_t c = 0; c < comps.size(); ++c) {
            auto [i, j] = comps[c];
            double term = ricci[c][q] * u[i] * v[j];
            s += (i == j) ? term : term + ricci[c][q] * u[j] * v[i];
        }
        return s;
    }
};

inline TorusConformalData conformal_curvature_torus(const ManifoldBackend& backend,
                                                    const ConformalFactor& w) {
    if (backend.kind != BackendKind::Torus4 || backend.hessians.empty())
        throw UnsupportedBackendError("conformal_curvature_torus: needs a torus backend with Hessians");
    if (!w.has_coeffs())
        throw UsageError("conformal_curvature_torus: factor must be basis-backed");

    const int nq = backend.num_nodes();
    TorusConformalData data;

    Eigen::VectorXd lap_w = backend.laplacians.transpose() * w.coeffs;
    std::vector<Eigen::VectorXd> grad_w(4);
    Eigen::VectorXd grad_w2 = Eigen::VectorXd::Zero(nq);
    for (int v = 0; v < 4; ++v) {
        grad_w[v] = backend.gradients[v].transpose() * w.coeffs;
        grad_w2.array() += grad_w[v].array().square();
    }

    Eigen::ArrayXd e2w = (2.0 * w.node_values.array()).exp();
    data.volume_weights = (4.0 * w.node_values.array()).exp();
    data.gradient_scale = e2w.inverse();
    data.scalar_curvature =
        (-6.0 * e2w.inverse() * (lap_w.array() + grad_w2.array())).matrix();

    auto comps = ManifoldBackend::hessian_components();
    data.ricci.resize(comps.size());
    for (size_t c = 0; c < comps.size(); ++c) {
        auto [i, j] = comps[c];
        Eigen::VectorXd hess_w = backend.hessians[c].transpose() * w.coeffs;
        Eigen::VectorXd r =
            -2.0 * (hess_w - grad_w[i].cwiseProduct(grad_w[j]));
        if (i == j) r -= lap_w + 2.0 * grad_w2;
        data.ricci[c] = r;
    }

    data.laplacians_hat.resize(backend.basis_dim, nq);
    for (int b = 0; b < backend.basis_dim; ++b) {
        Eigen::VectorXd corr = Eigen::VectorXd::Zero(nq);
        for (int v = 0; v < 4; ++v)
            corr += grad_w[v].cwiseProduct(backend.gradients[v].row(b).transpose());
        data.laplacians_hat.row(b) =
            (e2w.inverse() * (backend.laplacians.row(b).transpose() + 2.0 * corr).array())
                .matrix()
                .transpose();
    }
    return data;
}

/**
 * Independent Paneitz energy assembly in the metric ghat = e^{2w} g from the
 * conformal-curvature data alone. By conformal invariance of the energy this
 * must reproduce the base-metric matrix; nothing here is simplified
 * symbolically, so the agreement is a genuine check.
 */
inline Eigen::MatrixXd assemble_energy_conformal_torus(const ManifoldBackend& backend,
                                                       const TorusConformalData& data) {
    const int nb = backend.basis_dim;
    const int nq = backend.num_nodes();
    Eigen::VectorXd wq = backend.weights.cwiseProduct(data.volume_weights); // dv_ghat

    Eigen::MatrixXd k = detail::weighted_gram(data.laplacians_hat, wq);

    // (2/3) Rhat <grad, grad>_ghat dv_ghat
    Eigen::VectorXd d2 = wq.array() * (2.0 / 3.0) * data.scalar_curvature.array() *
                         data.gradient_scale.array();
    for (int v = 0; v < 4; ++v) k += detail::weighted_gram(backend.gradients[v], d2);

    // -2 Richat(gradhat, gradhat) dv_ghat; hatted gradients contribute e^{-4w}
    auto comps = ManifoldBackend::hessian_components();
    Eigen::ArrayXd e4w_inv = data.volume_weights.array().inverse();
    for (size_t c = 0; c < comps.size(); ++c) {
        auto [i, j] = comps[c];
        Eigen::VectorXd d = (-2.0 * wq.array() * e4w_inv * data.ricci[c].array()).matrix();
        Eigen::MatrixXd cross = backend.gradients[i] * d.asDiagonal() * backend.gradients[j].transpose();
        if (i == j) {
            k += cross;
        } else {
            k += cross + cross.transpose();
        }
    }
    // enforce exact symmetry of the mixed terms
    Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
    (void)nq;
    (void)nb;
    return sym;
}

// ---------------------------------------------------------------------------
// Moebius maps of the round S^4 and Hersch balancing
// ---------------------------------------------------------------------------

/// Conformal dilation of S^4: stereographic projection from -center, scalar
/// dilation by t, inverse projection. t = 1 is the identity; t > 1
/// concentrates pullback volume near `center`.
struct MoebiusParams {
    Eigen::Matrix<double, 5, 1> center = (Eigen::Matrix<double, 5, 1>() << 0, 0, 0, 0, 1).finished();
    double dilation = 1.0;
};

namespace detail {

/// phi(x) and the conformal exponent u with phi^* g_r = e^{2u} g_r, for all
/// columns of `points` (unit vectors).
inline void moebius_map(const MoebiusParams& p, const Eigen::MatrixXd& points,
                        Eigen::MatrixXd& mapped, Eigen::VectorXd& exponent) {
    const double t = p.dilation;
    const int n = static_cast<int>(points.cols());
    mapped.resize(5, n);
    exponent.resize(n);
    for (int q = 0; q < n; ++q) {
        Eigen::Matrix<double, 5, 1> x = points.col(q);
        double xc = x.dot(p.center);
        Eigen::Matrix<double, 5, 1> perp = x - xc * p.center;
        // sigma(x) = perp / (1 + x.c), |sigma|^2 = (1 - xc) / (1 + xc)
        Eigen::Matrix<double, 5, 1> y = t / (1.0 + xc) * perp;
        double y2 = y.squaredNorm();
        mapped.col(q) = ((1.0 - y2) * p.center + 2.0 * y) / (1.0 + y2);
        double s2 = (1.0 - xc) / (1.0 + xc); // |sigma(x)|^2
        if (s2 <= 1.0) {
            exponent[q] = std::log(t * (1.0 + s2) / (1.0 + t * t * s2));
        } else { // near the antipode, avoid inf/inf
            double s2inv = (1.0 + xc) / (1.0 - xc);
            exponent[q] = std::log(t * (s2inv + 1.0) / (s2inv + t * t));
        }
    }
}

} // namespace detail

/**
 * Pullback factor w_phi with e^{2 w_phi} g_r = phi^*(e^{2w} g_r):
 * w_phi = w(phi(x)) + u(x). Returned node-valued; the non-polynomial
 * Jacobian factor is never forced through the basis truncation.
 */
inline ConformalFactor moebius_pullback_factor(const ManifoldBackend& backend,
                                               const MoebiusParams& params,
                                               const ConformalFactor& w) {
    if (backend.kind != BackendKind::Sphere4)
        throw UnsupportedBackendError("moebius_pullback_factor: sphere backend required");
    if (params.dilation <= 0) throw ConfigError("moebius_pullback_factor: dilation must be > 0");
    if (std::abs(params.center.norm() - 1.0) > 1e-12)
        throw ConfigError("moebius_pullback_factor: center must be a unit 5-vector");

    Eigen::MatrixXd mapped;
    Eigen::VectorXd u;
    const double r = backend.sphere->radius;
    detail::moebius_map(params, backend.nodes / r, mapped, u);
    Eigen::VectorXd w_at = evaluate_factor_at(backend, w, r * mapped);
    return ConformalFactor::from_node_values(w_at + u);
}

/// First moments m_i = int x_i e^{4w} dv_{g_r} of a conformal volume
/// density, in the ambient unit coordinates.
inline Eigen::Matrix<double, 5, 1> conformal_moments(const ManifoldBackend& backend,
                                                     const Eigen::VectorXd& density4) {
    if (backend.kind != BackendKind::Sphere4)
        throw UnsupportedBackendError("conformal_moments: sphere backend required");
    Eigen::Matrix<double, 5, 1> m;
    const double r = backend.sphere->radius;
    Eigen::VectorXd wq = backend.weights.cwiseProduct(density4);
    for (int i = 0; i < 5; ++i) m[i] = (backend.nodes.row(i) / r).dot(wq);
    return m;
}

struct BalanceReport {
    MoebiusParams params;
    ConformalFactor balanced;
    Eigen::Matrix<double, 5, 1> moments = Eigen::Matrix<double, 5, 1>::Zero();
    std::vector<double> residual_history; // max-norm moment residual per iteration
    int iterations = 0;
    bool converged = false;
};

namespace detail {

/// Orthonormal tangent frame of S^4 at c.
inline Eigen::Matrix<double, 5, 4> tangent_frame(const Eigen::Matrix<double, 5, 1>& c) {
    Eigen::Matrix<double, 5, 4> frame;
    int col = 0;
    for (int i = 0; i < 5 && col < 4; ++i) {
        Eigen::Matrix<double, 5, 1> e = Eigen::Matrix<double, 5, 1>::Unit(i);
        Eigen::Matrix<double, 5, 1> v = e - e.dot(c) * c;
        for (int j = 0; j < col; ++j) v -= v.dot(frame.col(j)) * frame.col(j);
        if (v.norm() > 1e-8) frame.col(col++) = v.normalized();
    }
    return frame;
}

/// One damped-Newton solve of the five moment equations for a fixed factor.
/// Returns false on stagnation. Steps live in (tangent chart, log dilation);
/// the line search decreases the 2-norm of the moments, convergence is
/// declared on the max-norm.
inline bool balance_newton(const ManifoldBackend& backend, const ConformalFactor& w,
                           MoebiusParams& p, Eigen::Matrix<double, 5, 1>& m, double tol,
                           int max_iter, std::vector<double>* history) {
    auto moments_of = [&](const MoebiusParams& q) {
        ConformalFactor wp = moebius_pullback_factor(backend, q, w);
        return conformal_moments(backend, wp.density4());
    };
    auto with_step = [](const MoebiusParams& base, const Eigen::Matrix<double, 5, 4>& frame,
                        const Eigen::Matrix<double, 5, 1>& step) {
        MoebiusParams q;
        q.center = (base.center + frame * step.head(4)).normalized();
        q.dilation = base.dilation * std::exp(step[4]);
        return q;
    };

    m = moments_of(p);
    if (history) history->push_back(m.cwiseAbs().maxCoeff());
    for (int it = 0; it < max_iter; ++it) {
        if (m.cwiseAbs().maxCoeff() <= tol) return true;
        Eigen::Matrix<double, 5, 4> frame = tangent_frame(p.center);
        Eigen::Matrix<double, 5, 5> jac;
        const double h = 1e-6;
        for (int d = 0; d < 5; ++d) {
            Eigen::Matrix<double, 5, 1> step = Eigen::Matrix<double, 5, 1>::Zero();
            step[d] = h;
            jac.col(d) = (moments_of(with_step(p, frame, step)) - m) / h;
        }
        Eigen::Matrix<double, 5, 1> newton = jac.fullPivLu().solve(-m);
        if (!newton.allFinite()) return false;
        if (newton.norm() > 1.0) newton *= 1.0 / newton.norm(); // trust region

        bool improved = false;
        double damping = 1.0;
        for (int half = 0; half < 40 && !improved; ++half) {
            MoebiusParams cand = with_step(p, frame, damping * newton);
            Eigen::Matrix<double, 5, 1> mc = moments_of(cand);
            if (mc.norm() < m.norm()) {
                p = cand;
                m = mc;
                improved = true;
            }
            damping *= 0.5;
        }
        if (history) history->push_back(m.cwiseAbs().maxCoeff());
        if (!improved) return m.cwiseAbs().maxCoeff() <= tol;
    }
    return m.cwiseAbs().maxCoeff() <= tol;
}

} // namespace detail

/**
 * Finds Moebius parameters making all five coordinate moments of the
 * pulled-back conformal volume vanish: int x_i e^{4 w_phi} dv_{g_r} = 0.
 * Damped Newton on (tangent chart of center, log dilation) with the 5x5
 * Jacobian estimated by forward differences; strong factors that stall the
 * plain iteration are handled by continuation in the factor magnitude,
 * warm-starting the parameters.
 */
inline BalanceReport hersch_balance(const ManifoldBackend& backend, const ConformalFactor& w,
                                    double tol_rel = 1e-8, int max_iter = 60) {
    if (backend.kind != BackendKind::Sphere4)
        throw UnsupportedBackendError("hersch_balance: sphere backend required");
    const double omega = backend.volume;
    const double tol = tol_rel * omega;

    MoebiusParams p;
    {
        Eigen::Matrix<double, 5, 1> com = conformal_moments(backend, w.density4());
        if (com.norm() > 1e-12 * omega) p.center = com.normalized();
    }

    BalanceReport report;
    Eigen::Matrix<double, 5, 1> m;
    bool ok = detail::balance_newton(backend, w, p, m, tol, max_iter, &report.residual_history);

    if (!ok && w.has_coeffs()) {
        // continuation: balance beta*w for increasing beta, carrying the params
        for (int stages : {4, 8}) {
            p = MoebiusParams{};
            report.residual_history.clear();
            ok = true;
            for (int s = 1; s <= stages && ok; ++s) {
                ConformalFactor ws = ConformalFactor::from_coeffs(
                    backend, (static_cast<double>(s) / stages) * w.coeffs);
                ok = detail::balance_newton(backend, ws, p, m, tol, max_iter,
                                            s == stages ? &report.residual_history : nullptr);
            }
            if (ok) break;
        }
    }
    report.iterations = static_cast<int>(report.residual_history.size());
    report.converged = ok;

    if (!report.converged)
        throw NumericalError("hersch_balance: Newton stagnated, best moment residual " +
                             std::to_string(m.cwiseAbs().maxCoeff()));
    report.params = p;
    report.moments = m;
    report.balanced = moebius_pullback_factor(backend, p, w);
    return report;
}

} // namespace paneitz
