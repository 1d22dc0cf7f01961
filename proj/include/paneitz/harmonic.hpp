#pragma once

#include <Eigen/Dense>

#include <map>
#include <vector>

#include "paneitz/errors.hpp"

namespace paneitz {

/// Exponent tuples of all monomials of exact degree `degree` in `nvars`
/// variables, in a fixed (lexicographic) order.
struct MonomialSet {
    int nvars = 0;
    int degree = 0;
    std::vector<std::vector<int>> exponents;

    int size() const { return static_cast<int>(exponents.size()); }
};

inline void enumerate_exponents_(int nvars, int degree, int var,
                                 std::vector<int>& cur,
                                 std::vector<std::vector<int>>& out) {
    if (var == nvars - 1) {
        cur[var] = degree;
        out.push_back(cur);
        return;
    }
    for (int e = degree; e >= 0; --e) {
        cur[var] = e;
        enumerate_exponents_(nvars, degree - e, var + 1, cur, out);
    }
}

inline MonomialSet monomials(int nvars, int degree) {
    MonomialSet set;
    set.nvars = nvars;
    set.degree = degree;
    std::vector<int> cur(nvars, 0);
    enumerate_exponents_(nvars, degree, 0, cur, set.exponents);
    return set;
}

inline int monomial_index(const MonomialSet& set, const std::vector<int>& exp) {
    for (int i = 0; i < set.size(); ++i)
        if (set.exponents[i] == exp) return i;
    throw UsageError("monomial_index: exponent not in set");
}

/// Matrix of d/dx_i acting on monomial coefficient vectors, mapping the
/// degree-l set onto the degree-(l-1) set.
inline Eigen::MatrixXd derivative_matrix(const MonomialSet& from, const MonomialSet& to, int var) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(to.size(), from.size());
    for (int col = 0; col < from.size(); ++col) {
        const auto& e = from.exponents[col];
        if (e[var] == 0) continue;
        std::vector<int> shifted = e;
        shifted[var] -= 1;
        d(monomial_index(to, shifted), col) = e[var];
    }
    return d;
}

/// Euclidean Laplacian on monomial coefficients, degree l -> degree l-2.
inline Eigen::MatrixXd laplacian_matrix(const MonomialSet& from, const MonomialSet& to) {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(to.size(), from.size());
    for (int col = 0; col < from.size(); ++col) {
        const auto& e = from.exponents[col];
        for (int v = 0; v < from.nvars; ++v) {
            if (e[v] < 2) continue;
            std::vector<int> shifted = e;
            shifted[v] -= 2;
            lap(monomial_index(to, shifted), col) += e[v] * (e[v] - 1);
        }
    }
    return lap;
}

/**
 * Coefficient basis (rows) of the harmonic homogeneous polynomials of the
 * given degree: the kernel of the Laplacian map, orthonormalized in
 * coefficient space for conditioning. Row count is the classical harmonic
 * dimension, e.g. binom(l+d-1,l) - binom(l+d-3,l-2) in d variables.
 */
inline Eigen::MatrixXd harmonic_coefficients(int nvars, int degree) {
    MonomialSet mono = monomials(nvars, degree);
    if (degree < 2) return Eigen::MatrixXd::Identity(mono.size(), mono.size());
    MonomialSet lower = monomials(nvars, degree - 2);
    Eigen::MatrixXd lap = laplacian_matrix(mono, lower);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(lap);
    lu.setThreshold(1e-10);
    Eigen::MatrixXd kernel = lu.kernel(); // columns span the null space
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(kernel);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(kernel.rows(), kernel.cols());
    return q.transpose();
}

/// Values of every monomial in `set` at the given points (nvars x npts),
/// returned as a size x npts matrix.
inline Eigen::MatrixXd monomial_values(const MonomialSet& set, const Eigen::MatrixXd& points) {
    if (points.rows() != set.nvars) throw UsageError("monomial_values: wrong point dimension");
    const int npts = static_cast<int>(points.cols());
    Eigen::MatrixXd vals(set.size(), npts);
    // Powers of each coordinate up to the degree, then products.
    std::vector<Eigen::MatrixXd> pow(set.nvars);
    for (int v = 0; v < set.nvars; ++v) {
        pow[v].resize(set.degree + 1, npts);
        pow[v].row(0).setOnes();
        for (int p = 1; p <= set.degree; ++p)
            pow[v].row(p) = pow[v].row(p - 1).cwiseProduct(points.row(v));
    }
    for (int m = 0; m < set.size(); ++m) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Ones(npts);
        for (int v = 0; v < set.nvars; ++v) {
            int e = set.exponents[m][v];
            if (e > 0) row = row.cwiseProduct(pow[v].row(e));
        }
        vals.row(m) = row;
    }
    return vals;
}

} // namespace paneitz
