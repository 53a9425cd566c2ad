#pragma once

// Subspaces of homogeneous polynomials with orthonormal bases in the l2
// metric, and the linear-algebra operations the cover recursion needs.

#include <Eigen/Dense>
#include <cassert>
#include <stdexcept>
#include <vector>

#include "varcover/poly.hpp"

namespace varcover {

struct PolySubspace {
    int m = 0;
    int d = 0;
    std::vector<HomogeneousPoly> basis;  // orthonormal under the l2 inner product

    PolySubspace() = default;
    PolySubspace(int m_, int d_) : m(m_), d(d_) {}

    int ambient_dim() const { return static_cast<int>(monomial_count(m, d)); }
    int dim() const { return static_cast<int>(basis.size()); }
    int codim() const { return ambient_dim() - dim(); }
};

// Coordinates of p in the orthonormalized monomial basis (x^a / sqrt(w_a)).
inline Eigen::VectorXd onb_coords(const HomogeneousPoly& p) {
    return p.coeffs.cwiseProduct(ip_sqrt_weights(p.m, p.d));
}

inline HomogeneousPoly poly_from_onb(int m, int d, const Eigen::VectorXd& u) {
    HomogeneousPoly p(m, d);
    p.coeffs = u.cwiseQuotient(ip_sqrt_weights(m, d));
    return p;
}

// Rows are the orthonormal coordinates of the basis polynomials.
inline Eigen::MatrixXd subspace_matrix(const PolySubspace& V) {
    const Eigen::Index n = static_cast<Eigen::Index>(monomial_count(V.m, V.d));
    Eigen::MatrixXd B(static_cast<Eigen::Index>(V.basis.size()), n);
    for (std::size_t i = 0; i < V.basis.size(); ++i) {
        B.row(static_cast<Eigen::Index>(i)) = onb_coords(V.basis[i]).transpose();
    }
    return B;
}

inline PolySubspace subspace_from_matrix(int m, int d, const Eigen::MatrixXd& B) {
    PolySubspace V(m, d);
    V.basis.reserve(static_cast<std::size_t>(B.rows()));
    for (Eigen::Index i = 0; i < B.rows(); ++i) {
        V.basis.push_back(poly_from_onb(m, d, B.row(i).transpose()));
    }
    return V;
}

// Modified Gram-Schmidt in the l2 metric with one re-orthogonalization pass.
// Inputs whose residual after projection falls below rank_tol times the
// largest input norm are dropped. Empty input yields the zero subspace.
inline PolySubspace orthonormalize(const std::vector<HomogeneousPoly>& polys,
                                   double rank_tol = 1e-10) {
    if (polys.empty()) return PolySubspace();
    const int m = polys.front().m;
    const int d = polys.front().d;
    double max_norm = 0.0;
    std::vector<Eigen::VectorXd> coords;
    coords.reserve(polys.size());
    for (const auto& p : polys) {
        if (p.m != m || p.d != d) throw std::invalid_argument("orthonormalize: mixed (m,d)");
        coords.push_back(onb_coords(p));
        max_norm = std::max(max_norm, coords.back().norm());
    }
    PolySubspace V(m, d);
    if (max_norm == 0.0) return V;

    std::vector<Eigen::VectorXd> ortho;
    for (auto& u : coords) {
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : ortho) u -= b.dot(u) * b;
        }
        const double r = u.norm();
        if (r > rank_tol * max_norm) {
            ortho.push_back(u / r);
        }
    }
    for (const auto& b : ortho) V.basis.push_back(poly_from_onb(m, d, b));
    return V;
}

inline PolySubspace full_space(int m, int d) {
    PolySubspace V(m, d);
    const auto n = static_cast<Eigen::Index>(monomial_count(m, d));
    const Eigen::VectorXd& sw = ip_sqrt_weights(m, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        HomogeneousPoly p(m, d);
        p.coeffs[i] = 1.0 / sw[i];
        V.basis.push_back(std::move(p));
    }
    return V;
}

// Orthonormal basis of the orthogonal complement of V within its ambient
// degree-d space.
inline PolySubspace complement(const PolySubspace& V) {
    const Eigen::Index n = static_cast<Eigen::Index>(monomial_count(V.m, V.d));
    if (V.basis.empty()) return full_space(V.m, V.d);
    const Eigen::MatrixXd B = subspace_matrix(V);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullV);
    const Eigen::Index r = svd.rank();
    PolySubspace C(V.m, V.d);
    for (Eigen::Index i = r; i < n; ++i) {
        C.basis.push_back(poly_from_onb(V.m, V.d, svd.matrixV().col(i)));
    }
    return C;
}

namespace detail {

// Intersection of V with the span of the monomials listed in `allowed`
// (indices into enumerate_monomials(V.m, V.d)); the intersection is returned
// over the same ambient variables.
inline PolySubspace intersect_monomial_span(const PolySubspace& V,
                                            const std::vector<char>& allowed,
                                            double tol = 1e-10) {
    if (V.basis.empty()) return PolySubspace(V.m, V.d);
    const Eigen::MatrixXd B = subspace_matrix(V);  // r x N, orthonormal rows
    std::vector<Eigen::Index> banned;
    for (std::size_t i = 0; i < allowed.size(); ++i) {
        if (!allowed[i]) banned.push_back(static_cast<Eigen::Index>(i));
    }
    if (banned.empty()) return V;

    Eigen::MatrixXd M(static_cast<Eigen::Index>(banned.size()), B.rows());
    for (std::size_t j = 0; j < banned.size(); ++j) {
        M.row(static_cast<Eigen::Index>(j)) = B.col(banned[j]).transpose();
    }
    // Kernel of M: coefficient combinations with no banned component.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double cutoff = tol * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > cutoff) ++rank;
    }
    PolySubspace out(V.m, V.d);
    for (Eigen::Index i = rank; i < svd.matrixV().cols(); ++i) {
        const Eigen::VectorXd a = svd.matrixV().col(i);
        out.basis.push_back(poly_from_onb(V.m, V.d, B.transpose() * a));
    }
    return out;
}

}  // namespace detail

// Polynomials of V supported only on monomials in `coords`, re-expressed over
// |coords| variables. The codimension in the smaller space never exceeds the
// codimension of V.
inline PolySubspace restrict_subspace_to_coords(const PolySubspace& V,
                                                const std::vector<int>& coords,
                                                double tol = 1e-10) {
    assert(!coords.empty());
    std::vector<char> in_coords(static_cast<std::size_t>(V.m), 0);
    for (int c : coords) {
        assert(c >= 0 && c < V.m);
        in_coords[static_cast<std::size_t>(c)] = 1;
    }
    const auto& monos = monomials_of(V.m, V.d);
    std::vector<char> allowed(monos.size(), 0);
    for (std::size_t i = 0; i < monos.size(); ++i) {
        bool ok = true;
        for (int v = 0; v < V.m && ok; ++v) {
            if (monos[i][static_cast<std::size_t>(v)] > 0 && !in_coords[static_cast<std::size_t>(v)]) {
                ok = false;
            }
        }
        allowed[i] = ok ? 1 : 0;
    }
    const PolySubspace inter = detail::intersect_monomial_span(V, allowed, tol);
    PolySubspace out(static_cast<int>(coords.size()), V.d);
    out.basis.reserve(inter.basis.size());
    for (HomogeneousPoly p : inter.basis) {
        // Numerically tiny residue can remain on banned monomials; the kernel
        // computation bounds it by tol, so zero it before re-expressing.
        for (std::size_t i = 0; i < monos.size(); ++i) {
            if (!allowed[i]) p.coeffs[static_cast<Eigen::Index>(i)] = 0.0;
        }
        out.basis.push_back(project_to_coords(p, coords));
    }
    return out;
}

// V intersected with the polynomials of homogeneous degree 1 in the leading
// m_head variables and degree d-1 in the trailing block. Result stays over
// the full m variables.
inline PolySubspace bilinear_slice(const PolySubspace& V, int m_head, double tol = 1e-10) {
    assert(m_head > 0 && m_head < V.m && V.d >= 2);
    const auto& monos = monomials_of(V.m, V.d);
    std::vector<char> allowed(monos.size(), 0);
    for (std::size_t i = 0; i < monos.size(); ++i) {
        int head_deg = 0;
        for (int v = 0; v < m_head; ++v) head_deg += monos[i][static_cast<std::size_t>(v)];
        allowed[i] = (head_deg == 1) ? 1 : 0;
    }
    return detail::intersect_monomial_span(V, allowed, tol);
}

// Dimension of the full bidegree-(1, d-1) space for the same split.
inline int bidegree_dim(int m, int m_head, int d) {
    return m_head * static_cast<int>(monomial_count(m - m_head, d - 1));
}

// Subspace spanned by p(Q z) for p in V. Rotations (orthogonal Q) preserve
// orthonormality; general Q re-orthonormalizes.
inline PolySubspace rotate_subspace(const PolySubspace& V, const Eigen::MatrixXd& Q,
                                    double rank_tol = 1e-10) {
    std::vector<HomogeneousPoly> rotated;
    rotated.reserve(V.basis.size());
    for (const auto& p : V.basis) rotated.push_back(compose_linear(p, Q));
    return orthonormalize(rotated, rank_tol);
}

}  // namespace varcover
