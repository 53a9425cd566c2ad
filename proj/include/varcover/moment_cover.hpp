#pragma once

// From an approximate weighted moment tensor sum_i w_i v_i^{tensor 2d} to a
// cover of the heavy v_i: the quadratic form Q(p) = <A_p, T>, its
// near-vanishing eigenspace, and the cover pipeline; plus the order-2
// spectral dimension reduction.

#include <Eigen/Dense>
#include <stdexcept>

#include "varcover/cover.hpp"
#include "varcover/sym_tensor.hpp"

namespace varcover {

struct QuadraticForm {
    int m = 0;
    int d = 0;                // acts on degree-d polynomials
    Eigen::MatrixXd matrix;   // in l2-orthonormal monomial coordinates
};

// Q(p) = <square_tensor(p), T> as a symmetric matrix over the orthonormal
// monomial basis of degree-d polynomials; T must have even order 2d.
inline QuadraticForm quadratic_form(const SymTensor& T) {
    if (T.order % 2 != 0 || T.order < 2) {
        throw std::invalid_argument("quadratic_form: tensor order must be even and positive");
    }
    QuadraticForm Q;
    Q.m = T.m;
    Q.d = T.order / 2;
    const auto& monos = monomials_of(Q.m, Q.d);
    const Eigen::VectorXd& sw = ip_sqrt_weights(Q.m, Q.d);
    const Eigen::Index n = static_cast<Eigen::Index>(monos.size());
    Q.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            MultiIndex sum(monos[static_cast<std::size_t>(i)]);
            for (std::size_t v = 0; v < sum.size(); ++v) {
                sum[v] += monos[static_cast<std::size_t>(j)][v];
            }
            const double tij = T.vals[static_cast<Eigen::Index>(monomial_rank(sum))];
            const double val = tij / (sw[i] * sw[j]);
            Q.matrix(i, j) = val;
            Q.matrix(j, i) = val;
        }
    }
    return Q;
}

inline double qf_apply(const QuadraticForm& Q, const HomogeneousPoly& p) {
    const Eigen::VectorXd u = onb_coords(p);
    return u.dot(Q.matrix * u);
}

// Span of all but the top-k eigenvectors of Q; k >= dim yields the zero
// subspace. Ascending eigenvalue order breaks ties deterministically.
inline PolySubspace near_vanishing_subspace(const QuadraticForm& Q, int k) {
    if (k < 0) throw std::invalid_argument("near_vanishing_subspace: k >= 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.matrix);
    const Eigen::Index n = Q.matrix.rows();
    const Eigen::Index keep = std::max<Eigen::Index>(0, n - k);
    PolySubspace V(Q.m, Q.d);
    for (Eigen::Index i = 0; i < keep; ++i) {
        V.basis.push_back(poly_from_onb(Q.m, Q.d, es.eigenvectors().col(i)));
    }
    return V;
}

struct ParameterCoverOptions {
    double weight_floor = 0.05;  // components below this weight are not promised coverage
    CoverParams cover;           // R/eps/delta overwritten by parameter_cover arguments
};

// Cover of the weight >= weight_floor support points of a tensor within delta
// of an exact weighted power sum: for p in the near-vanishing space,
// sum_i w_i p(v_i)^2 <= lambda_{k+1} + delta, so each heavy v_i lies in
// S(V, R, sqrt((lambda_{k+1}^+ + delta)/weight_floor)).
inline Cover parameter_cover(const SymTensor& T, double R, double eps, double delta, int k,
                             const ParameterCoverOptions& opts = {}) {
    if (eps > R) throw std::invalid_argument("parameter_cover: eps <= R required");
    const QuadraticForm Q = quadratic_form(T);
    const PolySubspace V = near_vanishing_subspace(Q, k);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.matrix, Eigen::EigenvaluesOnly);
    const Eigen::Index n = Q.matrix.rows();
    const Eigen::Index idx = std::max<Eigen::Index>(0, n - k - 1);
    const double lam = (n > k) ? std::max(0.0, es.eigenvalues()[idx]) : 0.0;
    const double slack = std::sqrt((lam + std::abs(delta)) / opts.weight_floor);

    CoverParams cp = opts.cover;
    cp.R = R;
    cp.eps = eps;
    cp.delta = slack;
    return compute_cover(V, cp);
}

// Span of the eigenvectors of the order-2 moment matrix with eigenvalue above
// delta / w_floor; exact rank-k inputs keep exactly their range, and each
// component of weight >= w_floor lies within O(sqrt(delta / w_floor)) of it.
inline Eigen::MatrixXd dimension_reduce(const SymTensor& T2, double w_floor, double delta) {
    if (T2.order != 2) throw std::invalid_argument("dimension_reduce: order-2 tensor required");
    const int m = T2.m;
    Eigen::MatrixXd M(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
            MultiIndex a(static_cast<std::size_t>(m), 0);
            ++a[static_cast<std::size_t>(i)];
            ++a[static_cast<std::size_t>(j)];
            const double v = T2.vals[static_cast<Eigen::Index>(monomial_rank(a))];
            M(i, j) = v;
            M(j, i) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const double lmax = es.eigenvalues().size() > 0 ? es.eigenvalues().maxCoeff() : 0.0;
    const double thresh = delta / w_floor + 1e-12 * std::max(1.0, lmax);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        if (es.eigenvalues()[i] > thresh) keep.push_back(i);
    }
    Eigen::MatrixXd U(m, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        U.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
    }
    return U;
}

}  // namespace varcover
