#pragma once

// Homogeneous polynomials over the graded-lex monomial basis, with the
// rotation-invariant l2 inner product inherited from symmetric tensors.

#include <Eigen/Dense>
#include <cassert>
#include <stdexcept>
#include <vector>

#include "varcover/multi_index.hpp"

namespace varcover {

struct HomogeneousPoly {
    int m = 0;
    int d = 0;
    Eigen::VectorXd coeffs;  // indexed by enumerate_monomials(m, d)

    HomogeneousPoly() = default;
    HomogeneousPoly(int m_, int d_) : m(m_), d(d_) {
        coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(monomial_count(m_, d_)));
    }
    HomogeneousPoly(int m_, int d_, Eigen::VectorXd c) : m(m_), d(d_), coeffs(std::move(c)) {
        assert(coeffs.size() == static_cast<Eigen::Index>(monomial_count(m_, d_)));
    }
};

// Per-basis weights w_a = a!/d! and their square roots, in enumeration order;
// built once per (m, d).
inline const Eigen::VectorXd& ip_weights(int m, int d) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, const Eigen::VectorXd*> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({m, d});
    if (it == cache.end()) {
        const auto& monos = monomials_of(m, d);
        auto* w = new Eigen::VectorXd(static_cast<Eigen::Index>(monos.size()));
        for (std::size_t i = 0; i < monos.size(); ++i) {
            (*w)[static_cast<Eigen::Index>(i)] = ip_weight(monos[i]);
        }
        it = cache.emplace(std::make_pair(m, d), w).first;
    }
    return *it->second;
}

inline const Eigen::VectorXd& ip_sqrt_weights(int m, int d) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, const Eigen::VectorXd*> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({m, d});
    if (it == cache.end()) {
        it = cache.emplace(std::make_pair(m, d), new Eigen::VectorXd(ip_weights(m, d).cwiseSqrt()))
                 .first;
    }
    return *it->second;
}

inline double inner_product(const HomogeneousPoly& p, const HomogeneousPoly& q) {
    if (p.m != q.m || p.d != q.d) {
        throw std::invalid_argument("inner_product: dimension/degree mismatch");
    }
    const Eigen::VectorXd& w = ip_weights(p.m, p.d);
    return (p.coeffs.array() * q.coeffs.array() * w.array()).sum();
}

inline double poly_norm(const HomogeneousPoly& p) {
    const Eigen::VectorXd& w = ip_weights(p.m, p.d);
    return std::sqrt((p.coeffs.array().square() * w.array()).sum());
}

inline double evaluate(const HomogeneousPoly& p, const Eigen::VectorXd& x) {
    if (x.size() != p.m) throw std::invalid_argument("evaluate: point length mismatch");
    // powers[i][e] = x_i^e for e <= d
    Eigen::MatrixXd powers(p.m, p.d + 1);
    powers.col(0).setOnes();
    for (int e = 1; e <= p.d; ++e) {
        powers.col(e) = powers.col(e - 1).cwiseProduct(x);
    }
    const auto& monos = monomials_of(p.m, p.d);
    double s = 0.0;
    for (std::size_t i = 0; i < monos.size(); ++i) {
        const double c = p.coeffs[static_cast<Eigen::Index>(i)];
        if (c == 0.0) continue;
        double term = c;
        for (int v = 0; v < p.m; ++v) {
            const int e = monos[i][static_cast<std::size_t>(v)];
            if (e > 0) term *= powers(v, e);
        }
        s += term;
    }
    return s;
}

// Product of two homogeneous polynomials over the same variables.
inline HomogeneousPoly multiply(const HomogeneousPoly& p, const HomogeneousPoly& q) {
    assert(p.m == q.m);
    HomogeneousPoly r(p.m, p.d + q.d);
    const auto& mp = monomials_of(p.m, p.d);
    const auto& mq = monomials_of(q.m, q.d);
    for (std::size_t i = 0; i < mp.size(); ++i) {
        const double ci = p.coeffs[static_cast<Eigen::Index>(i)];
        if (ci == 0.0) continue;
        for (std::size_t j = 0; j < mq.size(); ++j) {
            const double cj = q.coeffs[static_cast<Eigen::Index>(j)];
            if (cj == 0.0) continue;
            MultiIndex sum(mp[i]);
            for (std::size_t v = 0; v < sum.size(); ++v) sum[v] += mq[j][v];
            r.coeffs[static_cast<Eigen::Index>(monomial_rank(sum))] += ci * cj;
        }
    }
    return r;
}

// Homogeneous parts, by degree in the trailing y-block, of p(x0, .) for a
// coordinate split R^m = R^{m'} x R^{m-m'}. part[t] is a degree-t polynomial
// in the m-m' trailing variables; summing evaluate(part[t], y) over t
// reproduces evaluate(p, (x0, y)).
inline std::vector<HomogeneousPoly> restrict_split(const HomogeneousPoly& p, int m_head,
                                                   const Eigen::VectorXd& x0) {
    assert(m_head > 0 && m_head < p.m);
    assert(x0.size() == m_head);
    const int m_tail = p.m - m_head;
    std::vector<HomogeneousPoly> parts;
    parts.reserve(static_cast<std::size_t>(p.d) + 1);
    for (int t = 0; t <= p.d; ++t) parts.emplace_back(m_tail, t);

    Eigen::MatrixXd powers(m_head, p.d + 1);
    powers.col(0).setOnes();
    for (int e = 1; e <= p.d; ++e) powers.col(e) = powers.col(e - 1).cwiseProduct(x0);

    const auto& monos = monomials_of(p.m, p.d);
    for (std::size_t i = 0; i < monos.size(); ++i) {
        const double c = p.coeffs[static_cast<Eigen::Index>(i)];
        if (c == 0.0) continue;
        double head_val = c;
        int tail_deg = 0;
        for (int v = 0; v < m_head; ++v) {
            const int e = monos[i][static_cast<std::size_t>(v)];
            if (e > 0) head_val *= powers(v, e);
        }
        MultiIndex tail(static_cast<std::size_t>(m_tail));
        for (int v = 0; v < m_tail; ++v) {
            tail[static_cast<std::size_t>(v)] = monos[i][static_cast<std::size_t>(m_head + v)];
            tail_deg += tail[static_cast<std::size_t>(v)];
        }
        parts[static_cast<std::size_t>(tail_deg)]
            .coeffs[static_cast<Eigen::Index>(monomial_rank(tail))] += head_val;
    }
    return parts;
}

// p composed with a linear change of variables: result(z) = p(Q z).
inline HomogeneousPoly compose_linear(const HomogeneousPoly& p, const Eigen::MatrixXd& Q) {
    assert(Q.rows() == p.m);
    const int mz = static_cast<int>(Q.cols());
    const auto& monos = monomials_of(p.m, p.d);

    // Linear forms (Q z)_i as degree-1 polynomials in z.
    std::vector<HomogeneousPoly> rows;
    rows.reserve(static_cast<std::size_t>(p.m));
    for (int i = 0; i < p.m; ++i) {
        HomogeneousPoly li(mz, 1);
        li.coeffs = Q.row(i).transpose();
        rows.push_back(std::move(li));
    }

    HomogeneousPoly out(mz, p.d);
    for (std::size_t k = 0; k < monos.size(); ++k) {
        const double c = p.coeffs[static_cast<Eigen::Index>(k)];
        if (c == 0.0) continue;
        HomogeneousPoly term(mz, 0);
        term.coeffs[0] = c;
        for (int v = 0; v < p.m; ++v) {
            for (int e = 0; e < monos[k][static_cast<std::size_t>(v)]; ++e) {
                term = multiply(term, rows[static_cast<std::size_t>(v)]);
            }
        }
        out.coeffs += term.coeffs;
    }
    return out;
}

// Re-express a polynomial supported only on `coords` over |coords| variables.
// Requires every monomial with a nonzero coefficient to be supported there.
inline HomogeneousPoly project_to_coords(const HomogeneousPoly& p, const std::vector<int>& coords) {
    const int mr = static_cast<int>(coords.size());
    HomogeneousPoly out(mr, p.d);
    const auto& monos = monomials_of(p.m, p.d);
    std::vector<int> pos(static_cast<std::size_t>(p.m), -1);
    for (int j = 0; j < mr; ++j) pos[static_cast<std::size_t>(coords[static_cast<std::size_t>(j)])] = j;
    for (std::size_t i = 0; i < monos.size(); ++i) {
        const double c = p.coeffs[static_cast<Eigen::Index>(i)];
        if (c == 0.0) continue;
        MultiIndex target(static_cast<std::size_t>(mr), 0);
        bool supported = true;
        for (int v = 0; v < p.m && supported; ++v) {
            const int e = monos[i][static_cast<std::size_t>(v)];
            if (e == 0) continue;
            if (pos[static_cast<std::size_t>(v)] < 0) {
                supported = false;
            } else {
                target[static_cast<std::size_t>(pos[static_cast<std::size_t>(v)])] = e;
            }
        }
        if (!supported) {
            throw std::invalid_argument("project_to_coords: monomial outside coordinate support");
        }
        out.coeffs[static_cast<Eigen::Index>(monomial_rank(target))] = c;
    }
    return out;
}

// Inverse of project_to_coords: lift a polynomial on |coords| variables back
// into m ambient variables.
inline HomogeneousPoly lift_from_coords(const HomogeneousPoly& p, int m, const std::vector<int>& coords) {
    HomogeneousPoly out(m, p.d);
    const auto& monos = monomials_of(p.m, p.d);
    for (std::size_t i = 0; i < monos.size(); ++i) {
        const double c = p.coeffs[static_cast<Eigen::Index>(i)];
        if (c == 0.0) continue;
        MultiIndex target(static_cast<std::size_t>(m), 0);
        for (int v = 0; v < p.m; ++v) {
            target[static_cast<std::size_t>(coords[static_cast<std::size_t>(v)])] =
                monos[i][static_cast<std::size_t>(v)];
        }
        out.coeffs[static_cast<Eigen::Index>(monomial_rank(target))] = c;
    }
    return out;
}

}  // namespace varcover
