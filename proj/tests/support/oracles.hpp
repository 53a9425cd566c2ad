#pragma once

// Test-side oracles, independent of the implementation paths they check:
// exhaustive grids for cover soundness, dense tensor expansions, and seeded
// random algebra objects.

#include <Eigen/Dense>
#include <random>
#include <unordered_map>
#include <vector>

#include "varcover/cover.hpp"
#include "varcover/subspace.hpp"

namespace vartest {

using varcover::Cover;
using varcover::HomogeneousPoly;
using varcover::PolySubspace;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Eigen::VectorXd random_vector(std::mt19937_64& g, int m) {
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) v[i] = N(g);
    return v;
}

inline HomogeneousPoly random_poly(std::mt19937_64& g, int m, int d) {
    std::normal_distribution<double> N(0.0, 1.0);
    HomogeneousPoly p(m, d);
    for (Eigen::Index i = 0; i < p.coeffs.size(); ++i) p.coeffs[i] = N(g);
    return p;
}

inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& g, int m) {
    Eigen::MatrixXd A(m, m);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) A(i, j) = N(g);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q = qr.householderQ();
    return Q;
}

// Random subspace of codimension k: the orthogonal complement of k random
// polynomials.
inline PolySubspace random_subspace_codim(std::mt19937_64& g, int m, int d, int k) {
    std::vector<HomogeneousPoly> gens;
    for (int i = 0; i < k; ++i) gens.push_back(random_poly(g, m, d));
    const PolySubspace span = varcover::orthonormalize(gens);
    return varcover::complement(span);
}

// All grid points of step `step` inside the ball of radius R.
inline std::vector<Eigen::VectorXd> ball_grid(int m, double R, double step) {
    std::vector<Eigen::VectorXd> out;
    const int K = static_cast<int>(std::floor(R / step));
    Eigen::VectorXd x(m);
    auto rec = [&](auto&& self, int pos, double norm2) -> void {
        if (pos == m) {
            out.push_back(x);
            return;
        }
        for (int z = -K; z <= K; ++z) {
            const double v = step * z;
            const double n2 = norm2 + v * v;
            if (n2 > R * R) continue;
            x[pos] = v;
            self(self, pos + 1, n2);
        }
    };
    rec(rec, 0, 0.0);
    return out;
}

// Cell hash over the cover points answering "is some cover point within eps
// of x" without a quadratic scan.
class NearQuery {
  public:
    NearQuery(const std::vector<Eigen::VectorXd>& pts, double eps) : eps_(eps) {
        if (pts.empty()) return;
        m_ = static_cast<int>(pts.front().size());
        for (const auto& p : pts) buckets_[key(p)].push_back(p);
    }

    bool within_eps(const Eigen::VectorXd& x, double tol = 1e-9) const {
        if (buckets_.empty()) return false;
        std::vector<long long> base = cell(x);
        std::vector<long long> off(static_cast<std::size_t>(m_), -1);
        while (true) {
            std::vector<long long> c(static_cast<std::size_t>(m_));
            for (int i = 0; i < m_; ++i) c[static_cast<std::size_t>(i)] = base[static_cast<std::size_t>(i)] + off[static_cast<std::size_t>(i)];
            const auto it = buckets_.find(hash_cells(c));
            if (it != buckets_.end()) {
                for (const auto& p : it->second) {
                    if ((p - x).norm() <= eps_ + tol) return true;
                }
            }
            int i = 0;
            for (; i < m_; ++i) {
                if (off[static_cast<std::size_t>(i)] < 1) {
                    ++off[static_cast<std::size_t>(i)];
                    break;
                }
                off[static_cast<std::size_t>(i)] = -1;
            }
            if (i == m_) break;
        }
        return false;
    }

  private:
    std::vector<long long> cell(const Eigen::VectorXd& x) const {
        std::vector<long long> c(static_cast<std::size_t>(m_));
        for (int i = 0; i < m_; ++i) c[static_cast<std::size_t>(i)] = static_cast<long long>(std::floor(x[i] / eps_));
        return c;
    }
    static std::size_t hash_cells(const std::vector<long long>& c) {
        std::size_t h = 1469598103934665603ULL;
        for (long long v : c) {
            h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
    std::size_t key(const Eigen::VectorXd& x) const { return hash_cells(cell(x)); }

    double eps_ = 1.0;
    int m_ = 0;
    std::unordered_map<std::size_t, std::vector<Eigen::VectorXd>> buckets_;
};

// Exhaustive soundness check: every grid point of S(V, R, delta) must be
// within eps (+tol) of the cover. Returns the number of S-members checked.
inline std::size_t check_cover_soundness(const PolySubspace& V, double R, double delta, double eps,
                                         const Cover& cover, double grid_step,
                                         std::size_t* failures) {
    const auto grid = ball_grid(V.m, R, grid_step);
    NearQuery near(cover.points, eps);
    std::size_t members = 0;
    *failures = 0;
    for (const auto& x : grid) {
        if (varcover::max_unit_violation(V, x) > delta) continue;
        ++members;
        if (!near.within_eps(x)) ++(*failures);
    }
    return members;
}

}  // namespace vartest
