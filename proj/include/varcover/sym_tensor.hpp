#pragma once

// Symmetric tensors stored one orbit representative per sorted index tuple,
// with multiplicity bookkeeping, plus the tensor <-> polynomial bijection.

#include <Eigen/Dense>
#include <cassert>
#include <stdexcept>
#include <vector>

#include "varcover/multi_index.hpp"
#include "varcover/poly.hpp"

namespace varcover {

struct SymTensor {
    int m = 0;
    int order = 0;
    // One value per orbit, indexed by enumerate_monomials(m, order); the full
    // tensor entry at any index tuple equals the value of its sorted orbit.
    Eigen::VectorXd vals;

    SymTensor() = default;
    SymTensor(int m_, int order_) : m(m_), order(order_) {
        vals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(monomial_count(m_, order_)));
    }

    double entry(const std::vector<int>& index_tuple) const {
        assert(static_cast<int>(index_tuple.size()) == order);
        const MultiIndex a = tuple_to_exponents(index_tuple, m);
        return vals[static_cast<Eigen::Index>(monomial_rank(a))];
    }
};

inline const Eigen::VectorXd& orbit_multiplicities(int m, int order) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, const Eigen::VectorXd*> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({m, order});
    if (it == cache.end()) {
        const auto& monos = monomials_of(m, order);
        auto* mult = new Eigen::VectorXd(static_cast<Eigen::Index>(monos.size()));
        for (std::size_t i = 0; i < monos.size(); ++i) {
            (*mult)[static_cast<Eigen::Index>(i)] = orbit_multiplicity(monos[i]);
        }
        it = cache.emplace(std::make_pair(m, order), mult).first;
    }
    return *it->second;
}

// Entry-wise inner product over all m^order positions, expanded via orbit
// multiplicities.
inline double tensor_inner(const SymTensor& a, const SymTensor& b) {
    if (a.m != b.m || a.order != b.order) {
        throw std::invalid_argument("tensor_inner: shape mismatch");
    }
    const Eigen::VectorXd& mult = orbit_multiplicities(a.m, a.order);
    return (a.vals.array() * b.vals.array() * mult.array()).sum();
}

inline double tensor_norm(const SymTensor& a) {
    const Eigen::VectorXd& mult = orbit_multiplicities(a.m, a.order);
    return std::sqrt((a.vals.array().square() * mult.array()).sum());
}

// Symmetric tensor A_p with p(x) = <A_p, x^{tensor d}>.
inline SymTensor tensor_of(const HomogeneousPoly& p) {
    SymTensor t(p.m, p.d);
    const Eigen::VectorXd& mult = orbit_multiplicities(p.m, p.d);
    t.vals = p.coeffs.cwiseQuotient(mult);
    return t;
}

inline HomogeneousPoly poly_of(const SymTensor& t) {
    HomogeneousPoly p(t.m, t.order);
    const Eigen::VectorXd& mult = orbit_multiplicities(t.m, t.order);
    p.coeffs = t.vals.cwiseProduct(mult);
    return p;
}

// Sym(B_p tensor B_p): the order-2d symmetric tensor of p^2. Contracting it
// against v^{tensor 2d} gives p(v)^2.
inline SymTensor square_tensor(const HomogeneousPoly& p) {
    return tensor_of(multiply(p, p));
}

// <A, v^{tensor order}>
inline double contract_power(const SymTensor& a, const Eigen::VectorXd& v) {
    return evaluate(poly_of(a), v);
}

// Orbit-average of a dense (not necessarily symmetric) tensor given in
// row-major order with the last index fastest.
inline SymTensor symmetrize_dense(const std::vector<double>& dense, int m, int order) {
    std::size_t expect = 1;
    for (int i = 0; i < order; ++i) expect *= static_cast<std::size_t>(m);
    if (dense.size() != expect) throw std::invalid_argument("symmetrize_dense: size mismatch");

    SymTensor out(m, order);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(out.vals.size());
    std::vector<int> tuple(static_cast<std::size_t>(order), 0);
    for (std::size_t flat = 0; flat < expect; ++flat) {
        std::size_t r = flat;
        for (int i = order - 1; i >= 0; --i) {
            tuple[static_cast<std::size_t>(i)] = static_cast<int>(r % static_cast<std::size_t>(m));
            r /= static_cast<std::size_t>(m);
        }
        const MultiIndex a = tuple_to_exponents(tuple, m);
        const auto idx = static_cast<Eigen::Index>(monomial_rank(a));
        out.vals[idx] += dense[flat];
        counts[idx] += 1.0;
    }
    out.vals = out.vals.cwiseQuotient(counts);
    return out;
}

inline SymTensor symmetrize(const SymTensor& t) { return t; }

// Dense expansion of a symmetric tensor (row-major, last index fastest);
// intended for small m and order.
inline std::vector<double> to_dense(const SymTensor& t) {
    std::size_t total = 1;
    for (int i = 0; i < t.order; ++i) total *= static_cast<std::size_t>(t.m);
    std::vector<double> dense(total);
    std::vector<int> tuple(static_cast<std::size_t>(t.order), 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t r = flat;
        for (int i = t.order - 1; i >= 0; --i) {
            tuple[static_cast<std::size_t>(i)] = static_cast<int>(r % static_cast<std::size_t>(t.m));
            r /= static_cast<std::size_t>(t.m);
        }
        dense[flat] = t.entry(tuple);
    }
    return dense;
}

// a + s * b
inline SymTensor tensor_axpy(const SymTensor& a, double s, const SymTensor& b) {
    assert(a.m == b.m && a.order == b.order);
    SymTensor r = a;
    r.vals += s * b.vals;
    return r;
}

inline double tensor_dist(const SymTensor& a, const SymTensor& b) {
    return tensor_norm(tensor_axpy(a, -1.0, b));
}

// Rotate a symmetric tensor: result = sum over the same weights of
// (Q^T v)^{tensor order} when t = sum of v^{tensor order}; i.e. the tensor of
// the rotated polynomial p(Q z).
inline SymTensor rotate_tensor(const SymTensor& t, const Eigen::MatrixXd& Q) {
    return tensor_of(compose_linear(poly_of(t), Q));
}

// Sub-tensor over the first r coordinates: entries of the rotated/original
// tensor supported on those coordinates. Equals sum w (pi v)^{tensor order}
// for power-sum tensors.
inline SymTensor head_subtensor(const SymTensor& t, int r) {
    assert(r >= 1 && r <= t.m);
    SymTensor out(r, t.order);
    const auto& monos = monomials_of(r, t.order);
    for (std::size_t i = 0; i < monos.size(); ++i) {
        MultiIndex full(static_cast<std::size_t>(t.m), 0);
        for (int v = 0; v < r; ++v) full[static_cast<std::size_t>(v)] = monos[i][static_cast<std::size_t>(v)];
        out.vals[static_cast<Eigen::Index>(i)] =
            t.vals[static_cast<Eigen::Index>(monomial_rank(full))];
    }
    return out;
}

}  // namespace varcover
