#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "paneitz/conformal.hpp"
#include "paneitz/errors.hpp"
#include "paneitz/operator.hpp"
#include "paneitz/spectrum.hpp"

namespace paneitz {

enum class GapCase { BelowGap, AboveGap, Interior };

inline const char* gap_case_name(GapCase c) {
    switch (c) {
        case GapCase::BelowGap: return "below_gap";
        case GapCase::AboveGap: return "above_gap";
        case GapCase::Interior: return "interior";
    }
    return "?";
}

/**
 * One-sided derivatives of t -> lambda_k along a volume-preserving conformal
 * direction. branch_derivatives are the eigenvalues (ascending) of the
 * cluster perturbation matrix Q_ij = -lambda_k int alpha psi_i psi_j dv_{g_w};
 * d_plus / d_minus follow the gap case: (min, max) over the branches when
 * lambda_k sits at the bottom of its cluster, (max, min) at the top, and the
 * r-th smallest / r-th largest for an interior index.
 */
struct DerivativeReport {
    int k = 0; // 1-based eigenvalue index
    double lambda_k = 0.0;
    Eigen::VectorXd branch_derivatives; // ascending
    double d_plus = 0.0;
    double d_minus = 0.0;
    GapCase gap_case = GapCase::BelowGap;
    std::pair<int, int> cluster{0, 0}; // 1-based inclusive range
    int min_branch_index = 0;          // lowest branch index attaining the min
    int max_branch_index = 0;
};

namespace detail {

/// Cluster eigenfunctions sampled at nodes: nq x m.
inline Eigen::MatrixXd cluster_node_values(const ManifoldBackend& backend,
                                           const SpectrumResult& spectrum, int first,
                                           int last) {
    return backend.values.transpose() * spectrum.eigenvectors.middleCols(first - 1, last - first + 1);
}

inline void require_cluster_enclosed(const SpectrumResult& spectrum, int basis_dim,
                                     std::pair<int, int> group) {
    if (group.second == spectrum.eigenvalues.size() &&
        spectrum.eigenvalues.size() < basis_dim)
        throw UsageError("cluster reaches the last computed eigenvalue; compute more pairs");
}

} // namespace detail

inline DerivativeReport one_sided_derivatives(const ManifoldBackend& backend,
                                              const PaneitzSystem& system,
                                              const SpectrumResult& spectrum, int k,
                                              const Eigen::VectorXd& alpha,
                                              double admissible_tol = 1e-9) {
    const int count = static_cast<int>(spectrum.eigenvalues.size());
    if (k < 1 || k > count) throw UsageError("one_sided_derivatives: k out of range");
    if (alpha.size() != backend.num_nodes())
        throw UsageError("one_sided_derivatives: direction node count mismatch");

    Eigen::VectorXd gw_weights = backend.weights.cwiseProduct(system.conformal_factor.density4());
    const double vol_gw = gw_weights.sum();
    const double mean = gw_weights.dot(alpha);
    if (std::abs(mean) > admissible_tol * vol_gw * std::max(1.0, alpha.cwiseAbs().maxCoeff()))
        throw UsageError("one_sided_derivatives: direction is not volume-preserving "
                         "(nonzero mean against dv_{g_w})");

    DerivativeReport report;
    report.k = k;
    report.lambda_k = spectrum.eigenvalues[k - 1];
    auto group = spectrum.clusters.group_of(k);
    report.cluster = group;

    const int m = group.second - group.first + 1;
    if (std::abs(report.lambda_k) <= 1e-8) {
        // Lambda'_i(0) carries a factor lambda_k, so everything vanishes.
        report.branch_derivatives = Eigen::VectorXd::Zero(m);
        report.gap_case = GapCase::BelowGap;
        return report;
    }
    detail::require_cluster_enclosed(spectrum, backend.basis_dim, group);

    Eigen::MatrixXd psi = detail::cluster_node_values(backend, spectrum, group.first, group.second);
    Eigen::VectorXd d = gw_weights.cwiseProduct(alpha);
    Eigen::MatrixXd q = -report.lambda_k * (psi.transpose() * d.asDiagonal() * psi);
    q = 0.5 * (q + q.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    report.branch_derivatives = es.eigenvalues();

    const int r = k - group.first + 1; // position inside the cluster
    report.d_plus = report.branch_derivatives[r - 1];      // r-th smallest
    report.d_minus = report.branch_derivatives[m - r];     // r-th largest
    if (k == group.first)
        report.gap_case = GapCase::BelowGap;
    else if (k == group.second)
        report.gap_case = GapCase::AboveGap;
    else
        report.gap_case = GapCase::Interior;

    const double tie = 1e-12 * (1.0 + report.branch_derivatives.cwiseAbs().maxCoeff());
    for (int i = 0; i < m; ++i)
        if (report.branch_derivatives[i] <= report.branch_derivatives[0] + tie) {
            report.min_branch_index = i;
            break;
        }
    for (int i = 0; i < m; ++i)
        if (report.branch_derivatives[i] >= report.branch_derivatives[m - 1] - tie) {
            report.max_branch_index = i;
            break;
        }
    return report;
}

/// Removes the dv_{g_w}-mean so a node function becomes an admissible
/// (volume-preserving) direction.
inline Eigen::VectorXd make_admissible(const ManifoldBackend& backend, const PaneitzSystem& system,
                                       const Eigen::VectorXd& alpha) {
    Eigen::VectorXd gw = backend.weights.cwiseProduct(system.conformal_factor.density4());
    return alpha.array() - gw.dot(alpha) / gw.sum();
}

// ---------------------------------------------------------------------------
// Extremality certificate
// ---------------------------------------------------------------------------

/**
 * PSD combination of cluster eigenfunction products summing pointwise to 1:
 * minimizes || sum_ab S_ab psi_a psi_b - 1 ||_{L2(dv_{g_w})} over S >= 0 by
 * projected gradient with eigenvalue clipping. The objective is a convex
 * quadratic, so the reached stationary point is global.
 */
struct ExtremalityCertificate {
    Eigen::MatrixXd gram; // S over the M_w-orthonormal cluster eigenbasis
    double residual = 0.0;
    bool certified = false;
    std::string reason; // non-empty when certification failed structurally
    std::pair<int, int> cluster{0, 0};
    double tolerance = 0.0;
    std::vector<Eigen::VectorXd> family; // phi_i in basis coordinates, S = F F^T
};

namespace detail {

inline Eigen::MatrixXd clip_psd(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace detail

inline ExtremalityCertificate extremality_certificate(const ManifoldBackend& backend,
                                                      const PaneitzSystem& system,
                                                      const SpectrumResult& spectrum, int k,
                                                      double tolerance = 1e-6) {
    const int count = static_cast<int>(spectrum.eigenvalues.size());
    if (k < 1 || k > count) throw UsageError("extremality_certificate: k out of range");
    const double lambda = spectrum.eigenvalues[k - 1];
    if (std::abs(lambda) <= 1e-8)
        throw UsageError("extremality_certificate: lambda_k = 0 is excluded");

    ExtremalityCertificate cert;
    cert.tolerance = tolerance;
    auto group = spectrum.clusters.group_of(k);
    cert.cluster = group;
    detail::require_cluster_enclosed(spectrum, backend.basis_dim, group);

    const int m = group.second - group.first + 1;
    Eigen::MatrixXd psi = detail::cluster_node_values(backend, spectrum, group.first, group.second);
    Eigen::VectorXd gw = backend.weights.cwiseProduct(system.conformal_factor.density4());

    // L2 norm of the pointwise deviation, evaluated at the nodes (the
    // quadratic-form expression cancels catastrophically near the optimum).
    auto node_residual = [&](const Eigen::VectorXd& deviation) {
        return std::sqrt(std::max(0.0, gw.dot(deviation.cwiseAbs2())));
    };

    if (m == 1) {
        // A simple nonzero eigenvalue cannot carry the certificate: phi^2 = 1
        // would force a constant eigenfunction. Report the 1-d least squares.
        Eigen::VectorXd p2 = psi.col(0).cwiseAbs2();
        double denom = p2.dot(gw.cwiseProduct(p2));
        double s = std::max(0.0, gw.dot(p2) / denom);
        cert.gram = Eigen::MatrixXd::Constant(1, 1, s);
        cert.residual = node_residual(s * p2 - Eigen::VectorXd::Ones(psi.rows()));
        cert.certified = false;
        cert.reason = "cluster is simple; a nonzero extremal eigenvalue must be degenerate";
        return cert;
    }

    // Vectorize symmetric matrices with sqrt(2) off-diagonals so the
    // Frobenius pairing becomes the dot product.
    const int dim = m * (m + 1) / 2;
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(dim);
    for (int i = 0; i < m; ++i) pairs.emplace_back(i, i);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) pairs.emplace_back(i, j);

    const int nq = backend.num_nodes();
    Eigen::MatrixXd svecs(dim, nq); // column q = svec(psi(q) psi(q)^T)
    const double rt2 = std::numbers::sqrt2;
    for (int d = 0; d < dim; ++d) {
        auto [i, j] = pairs[d];
        if (i == j)
            svecs.row(d) = psi.col(i).cwiseProduct(psi.col(j)).transpose();
        else
            svecs.row(d) = rt2 * psi.col(i).cwiseProduct(psi.col(j)).transpose();
    }
    Eigen::MatrixXd a = svecs * gw.asDiagonal() * svecs.transpose();
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::VectorXd b = svecs * gw;

    auto to_mat = [&](const Eigen::VectorXd& s) {
        Eigen::MatrixXd out(m, m);
        for (int d = 0; d < dim; ++d) {
            auto [i, j] = pairs[d];
            if (i == j) {
                out(i, i) = s[d];
            } else {
                out(i, j) = out(j, i) = s[d] / rt2;
            }
        }
        return out;
    };
    auto to_vec = [&](const Eigen::MatrixXd& mat) {
        Eigen::VectorXd out(dim);
        for (int d = 0; d < dim; ++d) {
            auto [i, j] = pairs[d];
            out[d] = (i == j) ? mat(i, i) : rt2 * mat(i, j);
        }
        return out;
    };
    // Unconstrained minimizer as the starting point, then projected gradient.
    Eigen::MatrixXd a_reg = a;
    a_reg.diagonal().array() += 1e-13 * (1.0 + a.trace() / dim);
    Eigen::VectorXd s = a_reg.ldlt().solve(b);
    Eigen::MatrixXd smat = detail::clip_psd(to_mat(s));
    s = to_vec(smat);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> aes(a, Eigen::EigenvaluesOnly);
    const double step = 1.0 / (2.0 * std::max(aes.eigenvalues().maxCoeff(), 1e-30));
    for (int it = 0; it < 5000; ++it) {
        Eigen::VectorXd grad = 2.0 * (a * s - b);
        Eigen::MatrixXd next = detail::clip_psd(to_mat(s - step * grad));
        Eigen::VectorXd sn = to_vec(next);
        double change = (sn - s).norm();
        s = sn;
        if (change <= 1e-15 * (1.0 + s.norm())) break;
    }

    cert.gram = detail::clip_psd(to_mat(s));
    cert.residual = node_residual(svecs.transpose() * to_vec(cert.gram) -
                                  Eigen::VectorXd::Ones(backend.num_nodes()));
    cert.certified = cert.residual <= tolerance;

    // Factor S = F F^T; columns of F give the certified family.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ses(cert.gram);
    Eigen::MatrixXd vcluster = spectrum.eigenvectors.middleCols(group.first - 1, m);
    const double rank_tol = 1e-12 * std::max(1.0, ses.eigenvalues().maxCoeff());
    for (int i = m - 1; i >= 0; --i) {
        if (ses.eigenvalues()[i] <= rank_tol) break;
        cert.family.push_back(vcluster *
                              (std::sqrt(ses.eigenvalues()[i]) * ses.eigenvectors().col(i)));
    }
    return cert;
}

/**
 * Evaluates the pointwise extremal identity at every node for the certified
 * family and returns the max deviation from lambda_k. Base metric only (the
 * needed curvature of g_w is not available on curved backends).
 */
inline double pointwise_formula_check(const ManifoldBackend& backend, const PaneitzSystem& system,
                                      const SpectrumResult& spectrum, int k,
                                      const ExtremalityCertificate& certificate) {
    if (k < 1 || k > spectrum.eigenvalues.size())
        throw UsageError("pointwise_formula_check: k out of range");
    const double lambda = spectrum.eigenvalues[k - 1];
    if (std::abs(lambda) <= 1e-8)
        throw UsageError("pointwise_formula_check: lambda_k = 0 is excluded");
    if (!certificate.certified)
        throw UsageError("pointwise_formula_check: needs a certified family");
    if (system.conformal_factor.node_values.cwiseAbs().maxCoeff() > 1e-12)
        throw UnsupportedBackendError(
            "pointwise_formula_check: only w = 0 is supported (curvature of g_w unavailable)");

    Eigen::VectorXd rhs = density(backend, certificate.family);
    return (rhs.array() - lambda).abs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Local-extremum obstructions
// ---------------------------------------------------------------------------

/// Necessary conditions for local extremality of lambda_k within the
/// volume-normalized class: a local maximizer needs lambda_k = lambda_{k+1},
/// a local minimizer needs lambda_k = lambda_{k-1}.
struct ObstructionReport {
    int k = 0;
    double lambda_k = 0.0;
    bool can_be_local_max = false;
    bool can_be_local_min = false;
    bool zero_eigenvalue = false; // lambda_k = 0: both flags true with this note
};

inline ObstructionReport obstruction_report(const SpectrumResult& spectrum, int k) {
    const int count = static_cast<int>(spectrum.eigenvalues.size());
    if (k < 1 || k + 1 > count)
        throw UsageError("obstruction_report: spectrum must be computed through k+1");
    ObstructionReport rep;
    rep.k = k;
    rep.lambda_k = spectrum.eigenvalues[k - 1];
    if (std::abs(rep.lambda_k) <= 1e-8) {
        rep.zero_eigenvalue = true;
        rep.can_be_local_max = rep.can_be_local_min = true;
        return rep;
    }
    auto group = spectrum.clusters.group_of(k);
    rep.can_be_local_max = group.second >= k + 1;
    rep.can_be_local_min = group.first <= k - 1;
    return rep;
}

// ---------------------------------------------------------------------------
// Projected ascent of lambda_k over the conformal class
// ---------------------------------------------------------------------------

struct AscentOptions {
    int direction_degree = 0; // 0: backend default (sphere: 2, torus: 1, s2xs2: 2)
    double min_step = 1e-8;
    double derivative_tol = 1e-8; // maximin slope below this counts as critical
    double cluster_tol = 1e-6;
};

struct TrajectoryPoint {
    int step = 0;
    double lambda_k = 0.0;
    double step_size = 0.0;
    int direction_id = 0; // signed 1-based basis index (negative: reversed), 0 for the start
};

struct AscentResult {
    ConformalFactor w_best;
    std::vector<TrajectoryPoint> trajectory; // non-decreasing lambda_k by construction
    bool converged = false;                  // no improving direction at minimal step
    double lambda_best = 0.0;
};

/**
 * Projected ascent of the volume-normalized lambda_k: each step evaluates the
 * cluster perturbation matrix over a low-degree direction basis (means
 * removed), takes the direction maximizing the smallest branch derivative
 * (the first-order model of the nonsmooth eigenvalue at the bottom of a
 * cluster), updates w, renormalizes the volume, re-solves, and keeps only
 * improving steps with step halving otherwise.
 */
inline AscentResult maximize_lambda_k(const ManifoldBackend& backend, int k,
                                      const ConformalFactor& w_init, int steps, double step_size,
                                      AscentOptions opts = {}) {
    if (k < 1 || k > backend.basis_dim) throw UsageError("maximize_lambda_k: k out of range");
    if (!w_init.has_coeffs())
        throw UsageError("maximize_lambda_k: w_init must be basis-backed");
    int dir_degree = opts.direction_degree;
    if (dir_degree <= 0) dir_degree = backend.kind == BackendKind::Torus4 ? 1 : 2;

    std::vector<int> direction_ids;
    for (int b = 0; b < backend.basis_dim; ++b)
        if (backend.laplace_eigenvalue[b] > 1e-12 && backend.degree_label[b] <= dir_degree)
            direction_ids.push_back(b);

    const int count = std::min(backend.basis_dim, std::max(k + 8, 12));

    AscentResult result;
    ConformalFactor w = normalize_volume(backend, w_init);
    PaneitzSystem sys = assemble(backend, w);
    SpectrumResult sp = solve(sys, count, opts.cluster_tol);
    double lambda = sp.eigenvalues[k - 1];
    if (std::abs(lambda) <= 1e-8)
        throw UsageError("maximize_lambda_k: lambda_k vanishes at the initial metric");
    result.trajectory.push_back({0, lambda, step_size, 0});

    for (int it = 1; it <= steps; ++it) {
        // score each direction by the smallest branch derivative
        auto group = sp.clusters.group_of(k);
        detail::require_cluster_enclosed(sp, backend.basis_dim, group);
        const int m = group.second - group.first + 1;
        Eigen::MatrixXd psi = detail::cluster_node_values(backend, sp, group.first, group.second);
        Eigen::VectorXd gw = backend.weights.cwiseProduct(sys.conformal_factor.density4());
        const double vol_gw = gw.sum();

        int best_dir = -1;
        double best_sign = 1.0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int b : direction_ids) {
            Eigen::VectorXd alpha = backend.values.row(b).transpose();
            alpha.array() -= gw.dot(alpha) / vol_gw;
            Eigen::VectorXd d = gw.cwiseProduct(alpha);
            Eigen::MatrixXd q = -lambda * (psi.transpose() * d.asDiagonal() * psi);
            q = 0.5 * (q + q.transpose()).eval();
            // both orientations of the direction are admissible
            double up, down;
            if (m == 1) {
                up = q(0, 0);
                down = -q(0, 0);
            } else {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
                up = es.eigenvalues()[0];
                down = -es.eigenvalues()[m - 1];
            }
            if (up > best_score) {
                best_score = up;
                best_dir = b;
                best_sign = 1.0;
            }
            if (down > best_score) {
                best_score = down;
                best_dir = b;
                best_sign = -1.0;
            }
        }
        if (best_score <= opts.derivative_tol * (1.0 + std::abs(lambda))) {
            result.converged = true; // first-order critical within tolerance
            break;
        }

        bool accepted = false;
        while (step_size >= opts.min_step) {
            Eigen::VectorXd c = w.coeffs;
            c[best_dir] += 0.25 * step_size * best_sign; // alpha = 4 dw/dt
            ConformalFactor w_try = normalize_volume(
                backend, ConformalFactor::from_coeffs(backend, c));
            PaneitzSystem sys_try = assemble(backend, w_try);
            SpectrumResult sp_try = solve(sys_try, count, opts.cluster_tol);
            double lambda_try = sp_try.eigenvalues[k - 1];
            if (lambda_try > lambda * (1.0 + 1e-14) + 1e-14) {
                w = std::move(w_try);
                sys = std::move(sys_try);
                sp = std::move(sp_try);
                lambda = lambda_try;
                result.trajectory.push_back({it, lambda, step_size,
                                             best_sign > 0 ? best_dir + 1 : -(best_dir + 1)});
                accepted = true;
                break;
            }
            step_size *= 0.5;
        }
        if (!accepted) {
            result.converged = true; // no candidate improves at the minimal step
            break;
        }
    }

    result.w_best = std::move(w);
    result.lambda_best = lambda;
    return result;
}

} // namespace paneitz
