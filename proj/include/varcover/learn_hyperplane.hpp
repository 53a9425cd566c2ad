#pragma once

// Parameter estimation for uniform mixtures of hyperplanes N(0, I - v v^T):
// order-2 dimension reduction, a moment cover of the unit normals, a
// good-hypothesis frequency filter with chain clustering, per-cluster
// re-covering on the orthogonal slice from the stored moment tensor (halving
// the radius each round), and exact sign-invariant recovery from the null
// space of margin-assigned samples.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "varcover/estimators.hpp"
#include "varcover/moment_cover.hpp"
#include "varcover/synth.hpp"

namespace varcover {

struct HyperplaneLearnOptions {
    int d = 2;
    double eps0 = 0.4;            // initial cover radius in the reduced space
    double good_margin_mult = 1.0;   // margin: mult * sqrt(eps)
    double good_freq_mult = 1.0;     // frequency threshold: mult / (2k)
    double chain_mult = 2.0;         // chain radius: mult * k * eps
    double final_eps_denom = 4.0;    // stop at eps <= Delta / (denom k^4 log(km))
    int threads = 1;
    CoverParams cover;
    Eigen::Index filter_samples = 4000;
    Eigen::Index assign_samples_per_dim = 60;
};

struct hyperplane_gate_error : std::runtime_error {
    explicit hyperplane_gate_error(const std::string& w) : std::runtime_error(w) {}
};

namespace detail {

inline std::vector<Eigen::VectorXd> hp_unit_candidates(const Cover& cov, double thin_tau) {
    std::vector<Eigen::VectorXd> unit;
    for (const auto& c : cov.points) {
        const double n = c.norm();
        if (n < 0.5 || n > 1.5) continue;
        unit.push_back(c / n);
    }
    std::vector<Eigen::VectorXd> kept;
    for (const auto& u : unit) {
        bool close = false;
        for (const auto& v : kept) {
            if ((u - v).norm() <= thin_tau) {
                close = true;
                break;
            }
        }
        if (!close) kept.push_back(u);
    }
    return kept;
}

}  // namespace detail

// Learns the unit normals up to sign. Delta is the known sign-invariant
// separation min over signs of ||s_i v_i - s_j v_j||.
inline HyperplaneMixParams hyperplane_learn(const SampleSet& samples, int k, double Delta, int d,
                                            HyperplaneLearnOptions opts = {}) {
    opts.d = d;
    if (!(Delta > 0.0)) {
        throw hyperplane_gate_error(
            "sign-invariant separation must be positive; normals equal up to sign are not "
            "identifiable");
    }
    const int m = samples.dim();
    const Eigen::Index n = samples.count();
    const Eigen::Index n_mom = n / 2;

    SampleSet head;
    head.xs = samples.xs.leftCols(n_mom);

    double d2 = 0.0;
    const SymTensor T2 = hyperplane_moment_tensor(head, 1, opts.threads, &d2);
    Eigen::MatrixXd U = dimension_reduce(T2, 1.0 / (2.0 * k), d2);
    if (U.cols() == 0) {
        U = Eigen::MatrixXd::Zero(m, 1);
        U(0, 0) = 1.0;
    }
    if (U.cols() > k) U = U.rightCols(k);
    const int r = static_cast<int>(U.cols());

    SampleSet zs;
    zs.xs = U.transpose() * head.xs;
    double dt = 0.0;
    const SymTensor T = hyperplane_moment_tensor(zs, d, opts.threads, &dt);

    ParameterCoverOptions pco;
    pco.weight_floor = 1.0 / (2.0 * k);
    pco.cover = opts.cover;

    double eps = opts.eps0;
    const double eps_final =
        Delta / (opts.final_eps_denom * std::pow(static_cast<double>(k), 4.0) *
                 std::log(static_cast<double>(k) * m + 1.0));
    Cover cov0 = parameter_cover(T, 1.1, eps, dt, k, pco);
    std::vector<Eigen::VectorXd> cands = detail::hp_unit_candidates(cov0, eps / 4.0);

    const Eigen::MatrixXd filt =
        zs.xs.leftCols(std::min<Eigen::Index>(opts.filter_samples, zs.xs.cols()));

    std::vector<std::vector<Eigen::VectorXd>> clusters;
    while (true) {
        // Good-hypothesis filter: |c . x| small for a decent fraction of samples.
        const double margin = opts.good_margin_mult * std::sqrt(eps);
        const double freq = opts.good_freq_mult / (2.0 * k);
        std::vector<Eigen::VectorXd> good;
        for (const auto& c : cands) {
            Eigen::Index hits = 0;
            for (Eigen::Index s = 0; s < filt.cols(); ++s) {
                if (std::abs(c.dot(filt.col(s))) <= margin) ++hits;
            }
            if (static_cast<double>(hits) >= freq * static_cast<double>(filt.cols())) {
                good.push_back(c);
            }
        }
        if (good.empty()) good = cands;

        // Chain clusters at radius O(k eps), sign-invariantly.
        const double chain = opts.chain_mult * k * eps;
        clusters.clear();
        for (const auto& g : good) {
            bool placed = false;
            for (auto& cl : clusters) {
                const double dist = std::min((cl.front() - g).norm(), (cl.front() + g).norm());
                if (dist <= chain) {
                    cl.push_back(g);
                    placed = true;
                    break;
                }
            }
            if (!placed) clusters.push_back({g});
        }

        if (eps <= eps_final) break;

        // Re-cover each cluster on the slice orthogonal to its center, reusing
        // the stored degree-2d tensor.
        std::vector<Eigen::VectorXd> next;
        for (const auto& cl : clusters) {
            Eigen::VectorXd u = cl.front();
            u.normalize();
            if (r == 1) {
                next.push_back(u);
                continue;
            }
            // Orthonormal frame with u first; the slice spans columns 2..r.
            Eigen::MatrixXd F(r, r);
            F.col(0) = u;
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(F.leftCols(1));
            Eigen::MatrixXd Q = qr.householderQ();
            if (Q.col(0).dot(u) < 0.0) Q = -Q;
            const SymTensor T_rot = rotate_tensor(T, Q);
            // Entries supported away from the u-direction: the slice moments.
            SymTensor T_slice(r - 1, T.order);
            const auto& monos = monomials_of(r - 1, T.order);
            for (std::size_t i = 0; i < monos.size(); ++i) {
                MultiIndex full(static_cast<std::size_t>(r), 0);
                for (int v = 0; v < r - 1; ++v) {
                    full[static_cast<std::size_t>(v + 1)] = monos[i][static_cast<std::size_t>(v)];
                }
                T_slice.vals[static_cast<Eigen::Index>(i)] =
                    T_rot.vals[static_cast<Eigen::Index>(monomial_rank(full))];
            }
            Cover sub;
            try {
                sub = parameter_cover(T_slice, 1.1, eps / 4.0, dt, k, pco);
            } catch (const cover_resource_error&) {
                next.push_back(u);
                continue;
            }
            for (const auto& c : sub.points) {
                const double cn2 = c.squaredNorm();
                if (cn2 > 1.0) continue;
                Eigen::VectorXd cand = std::sqrt(1.0 - cn2) * u;
                cand += Q.rightCols(r - 1) * c;
                const double nn = cand.norm();
                if (nn > 1e-9) next.push_back(cand / nn);
            }
            next.push_back(u);
        }
        cands = next;
        eps /= 2.0;
    }

    // Merge sign-equivalent clusters; duplicates of one normal sit within the
    // final cover scale while distinct normals are Delta apart.
    const double dedup = std::max(4.0 * eps * k, Delta / 3.0);
    std::vector<Eigen::VectorXd> centers;
    for (const auto& cl : clusters) {
        Eigen::VectorXd u = cl.front();
        u.normalize();
        bool dup = false;
        for (const auto& c : centers) {
            if (std::min((c - u).norm(), (c + u).norm()) <= dedup) {
                dup = true;
                break;
            }
        }
        if (!dup) centers.push_back(u);
    }
    if (static_cast<int>(centers.size()) < k) {
        throw hyperplane_gate_error("found " + std::to_string(centers.size()) +
                                    " normal clusters, expected " + std::to_string(k));
    }

    // Rank candidate centers by how many samples they annihilate.
    const double rank_margin = std::sqrt(
        static_cast<double>(k) * std::log(static_cast<double>(k) * m + 1.0) * eps);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        Eigen::Index hits = 0;
        for (Eigen::Index s = 0; s < filt.cols(); ++s) {
            if (std::abs(centers[c].dot(filt.col(s))) <= rank_margin) ++hits;
        }
        scored.emplace_back(-static_cast<double>(hits), c);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<Eigen::VectorXd> top;
    for (int c = 0; c < k; ++c) top.push_back(centers[scored[static_cast<std::size_t>(c)].second]);

    // Exclusive margin assignment of fresh full-dimensional samples, then the
    // exact normal from the null space of each cluster's sample matrix.
    const Eigen::Index n_assign =
        std::min<Eigen::Index>(n - n_mom, opts.assign_samples_per_dim * m * k);
    const Eigen::MatrixXd AX = samples.xs.rightCols(n_assign);
    const Eigen::MatrixXd AZ = U.transpose() * AX;
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
    for (Eigen::Index s = 0; s < AZ.cols(); ++s) {
        int inside = -1;
        bool unique = true;
        for (int c = 0; c < k; ++c) {
            if (std::abs(top[static_cast<std::size_t>(c)].dot(AZ.col(s))) <= rank_margin) {
                if (inside >= 0) {
                    unique = false;
                    break;
                }
                inside = c;
            }
        }
        if (unique && inside >= 0) members[static_cast<std::size_t>(inside)].push_back(s);
    }

    HyperplaneMixParams out;
    out.normals.resize(m, k);
    Eigen::VectorXd counts(k);
    for (int c = 0; c < k; ++c) {
        const auto& rows = members[static_cast<std::size_t>(c)];
        if (static_cast<int>(rows.size()) < m) {
            throw hyperplane_gate_error("cluster " + std::to_string(c) + " received only " +
                                        std::to_string(rows.size()) +
                                        " samples; need at least the ambient dimension " +
                                        std::to_string(m));
        }
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), m);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            X.row(static_cast<Eigen::Index>(i)) = AX.col(rows[i]).transpose();
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeFullV);
        Eigen::VectorXd v = svd.matrixV().col(m - 1);
        // Canonical sign: first coordinate of meaningful size positive.
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (std::abs(v[i]) > 1e-8) {
                if (v[i] < 0.0) v = -v;
                break;
            }
        }
        out.normals.col(c) = v;
        counts[c] = static_cast<double>(rows.size());
    }
    out.weights = counts / counts.sum();
    return out;
}

}  // namespace varcover
