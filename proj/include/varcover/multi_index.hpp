#pragma once

// Multi-index bookkeeping for homogeneous polynomials and symmetric tensors:
// graded-lexicographic enumeration, ranking, and the combinatorial weights of
// the tensor-induced l2 inner product.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <vector>

namespace varcover {

// Exponent vector of a monomial; length is the ambient dimension.
using MultiIndex = std::vector<int>;

inline int mi_degree(const MultiIndex& a) {
    return std::accumulate(a.begin(), a.end(), 0);
}

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    }
    return r;
}

// Number of monomials of total degree d in m variables.
inline std::uint64_t monomial_count(int m, int d) {
    assert(m >= 1 && d >= 0);
    return binomial(m + d - 1, d);
}

// All multi-indices of length m and degree d in graded-lex order: the first
// exponent descends from d to 0, recursively on the remaining variables.
// enumerate_monomials(2,2) = [(2,0),(1,1),(0,2)].
inline std::vector<MultiIndex> enumerate_monomials(int m, int d) {
    assert(m >= 1 && d >= 0);
    std::vector<MultiIndex> out;
    out.reserve(static_cast<std::size_t>(monomial_count(m, d)));
    MultiIndex cur(static_cast<std::size_t>(m), 0);
    auto rec = [&](auto&& self, int pos, int rem) -> void {
        if (pos == m - 1) {
            cur[static_cast<std::size_t>(pos)] = rem;
            out.push_back(cur);
            return;
        }
        for (int t = rem; t >= 0; --t) {
            cur[static_cast<std::size_t>(pos)] = t;
            self(self, pos + 1, rem - t);
        }
    };
    rec(rec, 0, d);
    return out;
}

// Shared immutable enumeration, built once per (m, d).
inline const std::vector<MultiIndex>& monomials_of(int m, int d) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, const std::vector<MultiIndex>*> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({m, d});
    if (it == cache.end()) {
        it = cache.emplace(std::make_pair(m, d),
                           new std::vector<MultiIndex>(enumerate_monomials(m, d)))
                 .first;
    }
    return *it->second;
}

// Position of `a` within enumerate_monomials(a.size(), degree(a)).
inline std::size_t monomial_rank(const MultiIndex& a) {
    const int m = static_cast<int>(a.size());
    int rem = mi_degree(a);
    std::size_t rank = 0;
    for (int i = 0; i + 1 < m; ++i) {
        for (int t = rem; t > a[static_cast<std::size_t>(i)]; --t) {
            rank += static_cast<std::size_t>(monomial_count(m - i - 1, rem - t));
        }
        rem -= a[static_cast<std::size_t>(i)];
    }
    return rank;
}

inline double log_factorial(int n) {
    return std::lgamma(static_cast<double>(n) + 1.0);
}

// log(a!) = sum_i log(a_i!)
inline double mi_log_factorial(const MultiIndex& a) {
    double s = 0.0;
    for (int ai : a) s += log_factorial(ai);
    return s;
}

// <x^a, x^a> = a!/|a|! under the symmetric-tensor l2 inner product.
inline double ip_weight(const MultiIndex& a) {
    return std::exp(mi_log_factorial(a) - log_factorial(mi_degree(a)));
}

// Orbit size of the index tuple with exponent vector a: |a|!/a!.
inline double orbit_multiplicity(const MultiIndex& a) {
    return std::exp(log_factorial(mi_degree(a)) - mi_log_factorial(a));
}

// Sorted index tuple (entries in [0,m)) -> exponent vector of length m.
inline MultiIndex tuple_to_exponents(const std::vector<int>& tuple, int m) {
    MultiIndex a(static_cast<std::size_t>(m), 0);
    for (int idx : tuple) {
        assert(idx >= 0 && idx < m);
        ++a[static_cast<std::size_t>(idx)];
    }
    return a;
}

// Exponent vector -> the sorted index tuple it represents.
inline std::vector<int> exponents_to_tuple(const MultiIndex& a) {
    std::vector<int> t;
    t.reserve(static_cast<std::size_t>(mi_degree(a)));
    for (int i = 0; i < static_cast<int>(a.size()); ++i) {
        for (int r = 0; r < a[static_cast<std::size_t>(i)]; ++r) t.push_back(i);
    }
    return t;
}

inline double double_factorial_odd(int t) {
    // (2t-1)!! with the empty product = 1 for t = 0.
    double r = 1.0;
    for (int j = 1; j <= t; ++j) r *= static_cast<double>(2 * j - 1);
    return r;
}

}  // namespace varcover
