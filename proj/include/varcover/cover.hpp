#pragma once

// Recursive epsilon-covers of near-zero sets S(V, R, delta) of homogeneous
// polynomial subspaces: deterministic lattice base cases, the exact d = 1
// null-space case, good/bad classification of partial assignments through the
// singular values of evaluation maps, greedy bad-point hyperplanes, and an
// optional ambient-dimension reduction.

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "varcover/subspace.hpp"
#include "varcover/sym_tensor.hpp"

namespace varcover {

struct CoverParams {
    double R = 1.0;
    double eps = 0.1;
    double delta = 0.0;
    double C = 1.0;                   // theorem constant knob
    int eta_denominator_power = 4;    // eta = eps (eps/R)^4 / (d k m max(C,1))^power
    double gamma_mult = 10.0;         // gamma = gamma_mult eta^{1/4} k^{1/2} R^{3/4} d^{-1/8}
    double base_dim_factor = 1.0;     // base case when m <= max(2, factor d^2 k^{1/d})
    bool prune = true;                // sound Lipschitz post-filter
    std::size_t max_points = 5'000'000;
    double rank_tol = 1e-10;
};

enum class CoverTag : std::uint8_t {
    BaseLattice,
    LinearBase,
    GoodBranch,
    BadBranch,
    AmbientReduced,
};

inline const char* cover_tag_name(CoverTag t) {
    switch (t) {
        case CoverTag::BaseLattice: return "base-lattice";
        case CoverTag::LinearBase: return "linear-base";
        case CoverTag::GoodBranch: return "good-branch";
        case CoverTag::BadBranch: return "bad-branch";
        case CoverTag::AmbientReduced: return "ambient-reduced";
    }
    return "?";
}

struct Cover {
    std::vector<Eigen::VectorXd> points;
    std::vector<CoverTag> trace;
    double eps = 0.0;
};

// Thrown when the configured point budget is exhausted; distinct from any
// legitimate (always nonempty) cover result.
struct cover_resource_error : std::runtime_error {
    explicit cover_resource_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

struct Budget {
    std::size_t used = 0;
    std::size_t limit = 0;
    void charge(std::size_t n) {
        used += n;
        if (limit && used > limit) {
            throw cover_resource_error("cover point budget exceeded (" + std::to_string(used) +
                                       " > " + std::to_string(limit) + ")");
        }
    }
};

// Axis-aligned lattice with spacing eps/sqrt(m) clipped to the ball of radius
// R + eps; every point of the R-ball is within eps/2 * ... <= eps of it.
inline void lattice_points(int m, double R, double eps, Budget& budget,
                           std::vector<Eigen::VectorXd>& out) {
    assert(m >= 1);
    const double s = eps / std::sqrt(static_cast<double>(m));
    const double rad = R + eps;
    const double rad2 = rad * rad;
    const int K = static_cast<int>(std::floor(rad / s));
    Eigen::VectorXd x(m);
    auto rec = [&](auto&& self, int pos, double norm2) -> void {
        if (pos == m) {
            budget.charge(1);
            out.push_back(x);
            return;
        }
        for (int z = -K; z <= K; ++z) {
            const double v = s * z;
            const double n2 = norm2 + v * v;
            if (n2 > rad2) continue;
            x[pos] = v;
            self(self, pos + 1, n2);
        }
    };
    rec(rec, 0, 0.0);
}

}  // namespace detail

// Deterministic lattice cover of the ball B(0, R) in R^m at radius eps.
inline Cover ball_cover(int m, double R, double eps, std::size_t max_points = 0) {
    detail::Budget budget{0, max_points};
    Cover c;
    c.eps = eps;
    detail::lattice_points(m, R, eps, budget, c.points);
    c.trace.assign(c.points.size(), CoverTag::BaseLattice);
    return c;
}

// Orthonormal basis (columns) of the common zero set of a subspace of linear
// forms. Zero subspace input yields all of R^m; the full space yields {0}.
inline Eigen::MatrixXd linear_zero_subspace(const PolySubspace& V, double tol = 1e-10) {
    if (V.d != 1) throw std::invalid_argument("linear_zero_subspace: requires d = 1");
    const int m = V.m;
    if (V.basis.empty()) return Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(V.basis.size()), m);
    for (std::size_t i = 0; i < V.basis.size(); ++i) {
        // d = 1: monomial coefficients are euclidean coordinates.
        A.row(static_cast<Eigen::Index>(i)) = V.basis[i].coeffs.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double cutoff = tol * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > cutoff) ++rank;
    }
    return svd.matrixV().rightCols(m - rank);
}

// Matrix of the evaluation map A_{x0}: W -> degree-(d-1) polynomials in the
// trailing variables, q |-> q(x0, .), in l2-orthonormal coordinates on both
// sides. W must come from bilinear_slice with the same split.
inline Eigen::MatrixXd evaluation_map(const PolySubspace& W, int m_head,
                                      const Eigen::VectorXd& x0) {
    assert(x0.size() == m_head);
    const int m_tail = W.m - m_head;
    const Eigen::Index ny = static_cast<Eigen::Index>(monomial_count(m_tail, W.d - 1));
    Eigen::MatrixXd A(ny, static_cast<Eigen::Index>(W.basis.size()));
    const Eigen::VectorXd& sw = ip_sqrt_weights(m_tail, W.d - 1);
    for (std::size_t j = 0; j < W.basis.size(); ++j) {
        const auto parts = restrict_split(W.basis[j], m_head, x0);
        A.col(static_cast<Eigen::Index>(j)) =
            parts[static_cast<std::size_t>(W.d - 1)].coeffs.cwiseProduct(sw);
    }
    return A;
}

struct Classification {
    bool good = false;
    PolySubspace vc;  // span of left singular vectors with sigma >= eta
};

// A point is good when at most k' of the dim(target)-many left singular
// values of its evaluation map fall below eta (singular values beyond the
// rank count as zero).
inline Classification classify_point(const Eigen::MatrixXd& A, int m_tail, int deg_tail,
                                     int k_prime, double eta) {
    assert(k_prime >= 1 && eta > 0.0);
    Classification out;
    const Eigen::Index ny = A.rows();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU);
    const Eigen::VectorXd sv = svd.singularValues();
    Eigen::Index big = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] >= eta) ++big;
    }
    const Eigen::Index small = ny - big;
    out.good = small <= k_prime;
    if (out.good) {
        out.vc = PolySubspace(m_tail, deg_tail);
        for (Eigen::Index i = 0; i < big; ++i) {
            out.vc.basis.push_back(poly_from_onb(m_tail, deg_tail, svd.matrixU().col(i)));
        }
    }
    return out;
}

// Greedy subspace through the bad points: while some point lies farther than
// gamma from the current span, adjoin it. Columns are orthonormal.
inline Eigen::MatrixXd bad_point_hyperplane(const std::vector<Eigen::VectorXd>& bad_points,
                                            double gamma, int max_dim = -1) {
    assert(gamma > 0.0);
    if (bad_points.empty()) return Eigen::MatrixXd();
    const int m = static_cast<int>(bad_points.front().size());
    Eigen::MatrixXd H(m, 0);
    for (const auto& c : bad_points) {
        Eigen::VectorXd resid = c;
        if (H.cols() > 0) resid -= H * (H.transpose() * c);
        if (resid.norm() > gamma) {
            if (max_dim >= 0 && H.cols() >= max_dim) continue;
            H.conservativeResize(m, H.cols() + 1);
            H.col(H.cols() - 1) = resid / resid.norm();
        }
    }
    return H;
}

namespace detail {

inline void append_lattice(int m, double R, double eps, CoverTag tag, Budget& budget,
                           std::vector<Eigen::VectorXd>& pts, std::vector<CoverTag>& tags) {
    const std::size_t before = pts.size();
    lattice_points(m, R, eps, budget, pts);
    tags.resize(pts.size(), tag);
    (void)before;
}

// Lattice on the column span of Q (orthonormal m x h) at radius eps.
inline void append_subspace_lattice(const Eigen::MatrixXd& Q, double R, double eps, CoverTag tag,
                                    Budget& budget, std::vector<Eigen::VectorXd>& pts,
                                    std::vector<CoverTag>& tags) {
    const int h = static_cast<int>(Q.cols());
    if (h == 0) {
        budget.charge(1);
        pts.push_back(Eigen::VectorXd::Zero(Q.rows()));
        tags.push_back(tag);
        return;
    }
    std::vector<Eigen::VectorXd> local;
    lattice_points(h, R, eps, budget, local);
    for (const auto& z : local) {
        pts.push_back(Q * z);
        tags.push_back(tag);
    }
}

struct RecursionCtx {
    const CoverParams* params;
    Budget budget;
};

inline void cover_worker(const PolySubspace& V, double R, double eps, double delta,
                         RecursionCtx& ctx, std::vector<Eigen::VectorXd>& pts,
                         std::vector<CoverTag>& tags) {
    const int m = V.m;
    const int d = V.d;
    const CoverParams& P = *ctx.params;

    if (V.basis.empty()) {  // S is the whole ball
        append_lattice(m, R, eps, CoverTag::BaseLattice, ctx.budget, pts, tags);
        return;
    }

    if (d == 1) {
        if (delta <= eps / 2.0) {
            // Every point of S lies within delta of the common zero set U, so
            // a lattice on U at eps - delta covers S.
            const Eigen::MatrixXd U = linear_zero_subspace(V, P.rank_tol);
            append_subspace_lattice(U, R, eps - delta, CoverTag::LinearBase, ctx.budget, pts, tags);
        } else {
            append_lattice(m, R, eps, CoverTag::BaseLattice, ctx.budget, pts, tags);
        }
        return;
    }

    const int k = V.codim();
    const int k_prime = static_cast<int>(
        std::floor(std::pow(static_cast<double>(k), 1.0 - 1.0 / static_cast<double>(d))));
    const int m_prime =
        (k_prime >= 1) ? static_cast<int>(std::ceil(3.0 * k / static_cast<double>(k_prime))) : m;
    const double eta = eps * std::pow(eps / R, 4.0) /
                       std::pow(static_cast<double>(d) * std::max(k, 1) * m * std::max(P.C, 1.0),
                                static_cast<double>(P.eta_denominator_power));
    const double gamma = P.gamma_mult * std::pow(eta, 0.25) *
                         std::sqrt(static_cast<double>(std::max(k, 1))) * std::pow(R, 0.75) *
                         std::pow(static_cast<double>(d), -0.125);
    const double eps_prime = delta / (std::pow(2.0 * R, d - 1) * d);

    const double base_thresh =
        std::max(2.0, P.base_dim_factor * d * d *
                          std::pow(static_cast<double>(std::max(k, 1)), 1.0 / static_cast<double>(d)));
    const bool degenerate = k <= 1 || k_prime < 1 || k_prime >= k || m_prime >= m ||
                            eps_prime <= 0.0 || eps_prime >= eps ||
                            eps - eps_prime - gamma <= 0.0;
    if (m <= base_thresh || degenerate) {
        append_lattice(m, R, eps, CoverTag::BaseLattice, ctx.budget, pts, tags);
        return;
    }

    // Cover the projection of S onto the leading m' coordinates at eps'.
    std::vector<int> head(static_cast<std::size_t>(m_prime));
    for (int i = 0; i < m_prime; ++i) head[static_cast<std::size_t>(i)] = i;
    const PolySubspace Vx = restrict_subspace_to_coords(V, head, P.rank_tol);
    std::vector<Eigen::VectorXd> xcover;
    std::vector<CoverTag> xtags;
    cover_worker(Vx, R, eps_prime, delta, ctx, xcover, xtags);

    const PolySubspace W = bilinear_slice(V, m_prime, P.rank_tol);
    const double delta_tail = (delta + d * std::pow(2.0 * R, d - 1) * eps_prime) / eta;
    const int m_tail = m - m_prime;

    std::vector<Eigen::VectorXd> bad_points;
    for (const auto& c : xcover) {
        const Eigen::MatrixXd A = evaluation_map(W, m_prime, c);
        const Classification cls = classify_point(A, m_tail, d - 1, k_prime, eta);
        if (!cls.good) {
            bad_points.push_back(c);
            continue;
        }
        std::vector<Eigen::VectorXd> ypts;
        std::vector<CoverTag> ytags;
        cover_worker(cls.vc, R, eps - eps_prime, delta_tail, ctx, ypts, ytags);
        for (const auto& y : ypts) {
            Eigen::VectorXd z(m);
            z.head(m_prime) = c;
            z.tail(m_tail) = y;
            pts.push_back(std::move(z));
            tags.push_back(CoverTag::GoodBranch);
        }
    }

    if (!bad_points.empty()) {
        const Eigen::MatrixXd H = bad_point_hyperplane(bad_points, gamma);
        const int h = static_cast<int>(H.cols()) + m_tail;
        if (h >= m) {
            // Hyperplane failed to shrink the dimension; cover the whole ball.
            append_lattice(m, R, eps, CoverTag::BaseLattice, ctx.budget, pts, tags);
            return;
        }
        Eigen::MatrixXd Qh = Eigen::MatrixXd::Zero(m, h);
        Qh.block(0, 0, m_prime, H.cols()) = H;
        Qh.block(m_prime, H.cols(), m_tail, m_tail) =
            Eigen::MatrixXd::Identity(m_tail, m_tail);
        // Complete to a full orthogonal matrix with Qh in the leading columns.
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(Qh);
        Eigen::MatrixXd Qfull = qr.householderQ();
        for (Eigen::Index j = 0; j < h; ++j) {
            if (Qfull.col(j).dot(Qh.col(j)) < 0.0) Qfull.col(j) = -Qfull.col(j);
        }
        const PolySubspace Vrot = rotate_subspace(V, Qfull, P.rank_tol);
        std::vector<int> lead(static_cast<std::size_t>(h));
        for (int i = 0; i < h; ++i) lead[static_cast<std::size_t>(i)] = i;
        const PolySubspace Vh = restrict_subspace_to_coords(Vrot, lead, P.rank_tol);
        std::vector<Eigen::VectorXd> hpts;
        std::vector<CoverTag> htags;
        cover_worker(Vh, R, eps - eps_prime - gamma, delta, ctx, hpts, htags);
        for (const auto& z : hpts) {
            pts.push_back(Qfull.leftCols(h) * z);
            tags.push_back(CoverTag::BadBranch);
        }
    }
}

inline bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

}  // namespace detail

// Largest value of |p(x)| / ||p|| over unit-norm p in V; membership in
// S(V, R, delta) is equivalent to this being <= delta (plus ||x|| <= R).
inline double max_unit_violation(const PolySubspace& V, const Eigen::VectorXd& x) {
    double s = 0.0;
    for (const auto& p : V.basis) {
        const double v = evaluate(p, x);
        s += v * v;
    }
    return std::sqrt(s);
}

// Computes an eps-cover of S(V, R, delta): every x with ||x|| <= R and
// |p(x)| <= delta ||p|| for all p in V lies within eps of a returned point.
inline Cover compute_cover(const PolySubspace& V, const CoverParams& params) {
    if (!(params.R > 0.0) || !(params.eps > 0.0) || params.eps > params.R || params.delta < 0.0) {
        throw std::invalid_argument("compute_cover: need R > 0, 0 < eps <= R, delta >= 0");
    }
    detail::RecursionCtx ctx{&params, detail::Budget{0, params.max_points}};
    std::vector<Eigen::VectorXd> pts;
    std::vector<CoverTag> tags;
    detail::cover_worker(V, params.R, params.eps, params.delta, ctx, pts, tags);

    // Points beyond R + eps cannot cover anything in the R-ball.
    const double keep_r = params.R + params.eps + 1e-12;
    Cover out;
    out.eps = params.eps;
    // Sound pruning: a point c can cover some x in S only if every unit-norm
    // p in V satisfies |p(c)| <= delta + d (R+eps)^{d-1} eps, the Lipschitz
    // bound along the segment from x to c.
    const double lip = params.delta + V.d * std::pow(params.R + params.eps, V.d - 1) * params.eps;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].norm() > keep_r) continue;
        if (params.prune && max_unit_violation(V, pts[i]) > lip + 1e-12) continue;
        out.points.push_back(pts[i]);
        out.trace.push_back(tags[i]);
    }

    // Canonical order so parallel and serial runs agree.
    std::vector<std::size_t> order(out.points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detail::lex_less(out.points[a], out.points[b]);
    });
    Cover sorted;
    sorted.eps = out.eps;
    sorted.points.reserve(out.points.size());
    sorted.trace.reserve(out.trace.size());
    for (std::size_t i : order) {
        sorted.points.push_back(out.points[i]);
        sorted.trace.push_back(out.trace[i]);
    }
    return sorted;
}

struct AmbientReduction {
    Eigen::MatrixXd H;    // m x h orthonormal basis of the retained subspace
    PolySubspace V_H;     // V restricted to H, over h variables
    Eigen::MatrixXd Qfull;
};

// Every point of S(V, R, delta) is either within eps of the origin or within
// eps/2 of H, the span of the singular vectors (threshold eps / (4 sqrt(k) R))
// of the one-slot contractions of an orthonormal basis of V's tensor
// complement. Requires delta < eps^d / 2.
inline AmbientReduction reduce_ambient(const PolySubspace& V, const CoverParams& params) {
    const double eps = params.eps;
    if (!(params.delta < std::pow(eps, V.d) / 2.0)) {
        throw std::invalid_argument("reduce_ambient: requires delta < eps^d / 2");
    }
    const int m = V.m;
    const int d = V.d;
    const PolySubspace comp = complement(V);
    const int k = comp.dim();

    AmbientReduction out;
    if (k == 0) {
        out.H = Eigen::MatrixXd(m, 0);
        out.Qfull = Eigen::MatrixXd::Identity(m, m);
        out.V_H = PolySubspace(1, d);  // no retained coordinates; S is near the origin
        return out;
    }

    const double sv_thresh = eps / (4.0 * std::sqrt(static_cast<double>(k)) * params.R);
    std::vector<Eigen::VectorXd> dirs;
    const std::size_t tail_count = static_cast<std::size_t>(std::pow(m, d - 1));
    for (const auto& p : comp.basis) {
        const SymTensor A = tensor_of(p);
        // Unfold the order-d tensor into an m^{d-1} x m matrix.
        Eigen::MatrixXd M(static_cast<Eigen::Index>(tail_count), m);
        std::vector<int> tuple(static_cast<std::size_t>(d), 0);
        for (std::size_t row = 0; row < tail_count; ++row) {
            std::size_t r = row;
            for (int i = d - 2; i >= 0; --i) {
                tuple[static_cast<std::size_t>(i)] = static_cast<int>(r % static_cast<std::size_t>(m));
                r /= static_cast<std::size_t>(m);
            }
            for (int j = 0; j < m; ++j) {
                tuple[static_cast<std::size_t>(d - 1)] = j;
                M(static_cast<Eigen::Index>(row), j) = A.entry(tuple);
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
        const Eigen::VectorXd sv = svd.singularValues();
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            if (sv[i] >= sv_thresh) dirs.push_back(svd.matrixV().col(i));
        }
    }

    Eigen::MatrixXd H(m, 0);
    for (const auto& v : dirs) {
        Eigen::VectorXd resid = v;
        if (H.cols() > 0) resid -= H * (H.transpose() * v);
        const double n = resid.norm();
        if (n > 1e-10) {
            H.conservativeResize(m, H.cols() + 1);
            H.col(H.cols() - 1) = resid / n;
        }
    }
    out.H = H;
    const int h = static_cast<int>(H.cols());
    if (h == 0) {
        out.Qfull = Eigen::MatrixXd::Identity(m, m);
        out.V_H = PolySubspace(1, d);
        return out;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(H);
    out.Qfull = qr.householderQ();
    for (Eigen::Index j = 0; j < h; ++j) {
        if (out.Qfull.col(j).dot(H.col(j)) < 0.0) out.Qfull.col(j) = -out.Qfull.col(j);
    }
    const PolySubspace Vrot = rotate_subspace(V, out.Qfull, params.rank_tol);
    std::vector<int> lead(static_cast<std::size_t>(h));
    for (int i = 0; i < h; ++i) lead[static_cast<std::size_t>(i)] = i;
    out.V_H = restrict_subspace_to_coords(Vrot, lead, params.rank_tol);
    return out;
}

// Cover via ambient reduction: one ball at the origin plus a lifted cover of
// the retained subspace at eps/2.
inline Cover compute_cover_reduced(const PolySubspace& V, const CoverParams& params) {
    const AmbientReduction red = reduce_ambient(V, params);
    Cover out;
    out.eps = params.eps;
    out.points.push_back(Eigen::VectorXd::Zero(V.m));
    out.trace.push_back(CoverTag::AmbientReduced);
    const int h = static_cast<int>(red.H.cols());
    if (h == 0) return out;
    CoverParams sub = params;
    sub.eps = params.eps / 2.0;
    const Cover inner = compute_cover(red.V_H, sub);
    for (const auto& z : inner.points) {
        out.points.push_back(red.Qfull.leftCols(h) * z);
        out.trace.push_back(CoverTag::AmbientReduced);
    }
    return out;
}

}  // namespace varcover
