#pragma once

// Mixtures of linear regressions: cover clustering with a conditioning event,
// conditional moment tensors over a working block, iterative cover halving
// with refinement, exact noiseless recovery, noisy recovery with per-cluster
// least squares, and density estimation over regression candidates.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varcover/estimators.hpp"
#include "varcover/mixture_fit.hpp"
#include "varcover/moment_cover.hpp"
#include "varcover/synth.hpp"

namespace varcover {

struct SRCover {
    std::vector<Eigen::VectorXd> points;
    int s_bound = 0;
    double r = 0.0;
};

struct MlrClusterOptions {
    double close_mult = 10.0;    // closeness: close_mult k^2 (r+sigma) log(1/eta)
    double margin_mult = 2.0;    // event margin: margin_mult (r+sigma) log(1/eta)
    double margin_cap_frac = 0.2;  // margin never exceeds this fraction of the
                                   // smallest representative distance
};

// Clustering of a cover: chained closeness classes with one representative
// each, a conditioning event E(x) keeping x with margin along all pairs of
// distinct representatives, and the classifier f(x,y).
struct MlrClustering {
    std::vector<Eigen::VectorXd> cover;
    std::vector<int> rep_of_point;           // cover index -> representative index
    std::vector<Eigen::VectorXd> reps;
    std::vector<std::pair<int, int>> pairs;  // representative index pairs
    double margin = 0.0;

    bool event(const Eigen::VectorXd& x) const {
        for (const auto& [a, b] : pairs) {
            if (std::abs(x.dot(reps[static_cast<std::size_t>(a)] -
                                reps[static_cast<std::size_t>(b)])) <= margin) {
                return false;
            }
        }
        return true;
    }

    int classify(const Eigen::VectorXd& x, double y) const {
        int best = 0;
        double bd = std::abs(y - cover[0].dot(x));
        for (std::size_t i = 1; i < cover.size(); ++i) {
            const double d = std::abs(y - cover[i].dot(x));
            if (d < bd) {
                bd = d;
                best = static_cast<int>(i);
            }
        }
        return rep_of_point[static_cast<std::size_t>(best)];
    }

    // Representative nearest to an arbitrary vector (the map g in tests).
    int rep_near(const Eigen::VectorXd& beta) const {
        int best = 0;
        double bd = (beta - cover[0]).norm();
        for (std::size_t i = 1; i < cover.size(); ++i) {
            const double d = (beta - cover[i]).norm();
            if (d < bd) {
                bd = d;
                best = static_cast<int>(i);
            }
        }
        return rep_of_point[static_cast<std::size_t>(best)];
    }
};

inline MlrClustering mlr_cluster(const SRCover& cover, int k, double sigma, double eta,
                                 MlrClusterOptions opts = {}) {
    MlrClustering out;
    out.cover = cover.points;
    const double close = opts.close_mult * k * k * (cover.r + sigma) * std::log(1.0 / eta);
    const std::size_t n = cover.points.size();
    std::vector<int> cl(n);
    std::iota(cl.begin(), cl.end(), 0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            if ((cover.points[a] - cover.points[b]).norm() <= close) {
                const int ca = cl[a], cb = cl[b];
                if (ca != cb) {
                    for (auto& c : cl) {
                        if (c == cb) c = ca;
                    }
                }
            }
        }
    }
    std::vector<int> relabel(n, -1);
    out.rep_of_point.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = cl[i];
        if (relabel[static_cast<std::size_t>(c)] < 0) {
            relabel[static_cast<std::size_t>(c)] = static_cast<int>(out.reps.size());
            out.reps.push_back(cover.points[i]);  // first member represents the cluster
        }
        out.rep_of_point[i] = relabel[static_cast<std::size_t>(c)];
    }
    double min_pair = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < out.reps.size(); ++a) {
        for (std::size_t b = a + 1; b < out.reps.size(); ++b) {
            out.pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
            min_pair = std::min(min_pair, (out.reps[a] - out.reps[b]).norm());
        }
    }
    out.margin = opts.margin_mult * (cover.r + sigma) * std::log(1.0 / eta);
    // Keep the event probability above 1/2: the margin may not eat more than
    // a fixed fraction of the closest representative pair.
    if (!out.pairs.empty()) {
        out.margin = std::min(out.margin, opts.margin_cap_frac * min_pair);
    }
    return out;
}

struct MlrRefineOptions {
    double margin_mult = 1.5;        // residual margin: margin_mult (r+sigma)
    double fraction_mult = 0.6;      // goodness threshold: fraction_mult p_min
    double chain_mult = 5.0;         // chain radius: chain_mult (r+sigma)
    double radius_mult = 4.0;        // reported output radius: radius_mult (r+sigma)
};

struct mlr_refine_error : std::runtime_error {
    explicit mlr_refine_error(const std::string& w) : std::runtime_error(w) {}
};

// Keep hypotheses consistent with a p_min-fraction of samples, chain-cluster
// them, and return one representative per chain, padded to k points.
inline SRCover mlr_refine_cover(const SRCover& cover, const SampleSet& samples, int k,
                                double p_min, double sigma, MlrRefineOptions opts = {}) {
    const double t = opts.margin_mult * (cover.r + sigma);
    const double need = opts.fraction_mult * p_min;
    const Eigen::Index n = samples.count();
    std::vector<std::pair<double, int>> good;  // (-fraction, index) for stable sorting
    for (std::size_t c = 0; c < cover.points.size(); ++c) {
        Eigen::Index hits = 0;
        for (Eigen::Index s = 0; s < n; ++s) {
            if (std::abs(samples.ys[s] - cover.points[c].dot(samples.xs.col(s))) <= t) ++hits;
        }
        const double frac = static_cast<double>(hits) / static_cast<double>(n);
        if (frac >= need) good.emplace_back(-frac, static_cast<int>(c));
    }
    if (good.empty()) {
        throw mlr_refine_error("no cover hypothesis is consistent with a " +
                               std::to_string(need) + "-fraction of samples");
    }
    std::sort(good.begin(), good.end());

    const double chain = opts.chain_mult * (cover.r + sigma);
    std::vector<Eigen::VectorXd> reps;
    std::vector<double> rep_score;
    for (const auto& [negfrac, idx] : good) {
        const auto& p = cover.points[static_cast<std::size_t>(idx)];
        bool joined = false;
        for (const auto& r : reps) {
            if ((p - r).norm() <= chain) {
                joined = true;
                break;
            }
        }
        if (!joined) {
            reps.push_back(p);
            rep_score.push_back(-negfrac);
        }
    }
    if (static_cast<int>(reps.size()) > k) reps.resize(static_cast<std::size_t>(k));
    SRCover out;
    out.points = reps;
    while (static_cast<int>(out.points.size()) < k) out.points.push_back(reps.front());
    out.s_bound = k;
    out.r = opts.radius_mult * (cover.r + sigma);
    return out;
}

struct MlrIterateOptions {
    // Iteration floor floor_mult * sigma. The reported radius of one round
    // bottoms out at 5 sigma (the inner cover never resolves below the noise),
    // so the floor sits just above that.
    double floor_mult = 6.0;
    double cluster_eta = 0.05;
    double inner_eps_mult = 0.125;  // inner cover radius: mult r p_min / k
    // The spectral threshold uses this fraction of the measured tensor error:
    // per-direction noise is far below the full-tensor norm, and dropping a
    // genuine residual direction costs a halving round.
    double dim_reduce_loosen = 0.25;
    int d = 1;
    int threads = 1;
    double ridge = 1e-8;
    CoverParams cover;
    MlrClusterOptions cluster;
    MlrRefineOptions refine;

    MlrIterateOptions() {
        // Inside the iteration a tight linkage lets representatives separate
        // as soon as the radius falls below the component separation; the
        // reported radius multiplier matches the refine filter's reach.
        cluster.close_mult = 0.25;
        refine.radius_mult = 2.5;
    }
};

struct mlr_floor_error : std::runtime_error {
    explicit mlr_floor_error(double r, double floor)
        : std::runtime_error("cover radius " + std::to_string(r) +
                             " at or below the iteration floor " + std::to_string(floor) +
                             "; stop iterating") {}
};

namespace detail {

struct ConditionalSet {
    SampleSet recentred;     // x unchanged, y replaced by y - rep.x, mask = event
    std::vector<int> rep_of; // per sample
};

inline ConditionalSet recentre_conditional(const SampleSet& samples, const MlrClustering& clu) {
    ConditionalSet out;
    out.recentred.xs = samples.xs;
    out.recentred.ys.resize(samples.count());
    out.recentred.condition_mask.resize(static_cast<std::size_t>(samples.count()));
    out.rep_of.resize(static_cast<std::size_t>(samples.count()));
    for (Eigen::Index s = 0; s < samples.count(); ++s) {
        const int rep = clu.classify(samples.xs.col(s), samples.ys[s]);
        out.rep_of[static_cast<std::size_t>(s)] = rep;
        out.recentred.ys[s] =
            samples.ys[s] - clu.reps[static_cast<std::size_t>(rep)].dot(samples.xs.col(s));
        out.recentred.condition_mask[static_cast<std::size_t>(s)] =
            clu.event(samples.xs.col(s)) ? 1 : 0;
    }
    return out;
}

inline Eigen::MatrixXd event_directions(const MlrClustering& clu) {
    std::vector<Eigen::VectorXd> dirs;
    for (const auto& [a, b] : clu.pairs) {
        Eigen::VectorXd d = clu.reps[static_cast<std::size_t>(a)] -
                            clu.reps[static_cast<std::size_t>(b)];
        const double n = d.norm();
        if (n > 1e-12) dirs.push_back(d / n);
    }
    if (dirs.empty()) return Eigen::MatrixXd(clu.reps.front().size(), 0);
    Eigen::MatrixXd D(dirs.front().size(), static_cast<Eigen::Index>(dirs.size()));
    for (std::size_t i = 0; i < dirs.size(); ++i) D.col(static_cast<Eigen::Index>(i)) = dirs[i];
    return D;
}

inline Eigen::MatrixXd gram_schmidt_cols(const Eigen::MatrixXd& A, double tol = 1e-9) {
    Eigen::MatrixXd Q(A.rows(), 0);
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        Eigen::VectorXd v = A.col(j);
        if (Q.cols() > 0) v -= Q * (Q.transpose() * v);
        const double n = v.norm();
        if (n > tol) {
            Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
            Q.col(Q.cols() - 1) = v / n;
        }
    }
    return Q;
}

// Conditional order-2 tensor of the recentred regressors over the full
// coordinates, entry by entry through per-pair blocks that contain the event
// directions.
inline SymTensor mlr_conditional_t2(const SampleSet& rec, const Eigen::MatrixXd& event_dirs,
                                    double ridge, double* delta_hat) {
    const int m = rec.dim();
    SymTensor T(m, 2);
    double err2 = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
            Eigen::MatrixXd block(m, event_dirs.cols() + 2);
            block.leftCols(event_dirs.cols()) = event_dirs;
            block.col(event_dirs.cols()) = Eigen::VectorXd::Unit(m, i);
            block.col(event_dirs.cols() + 1) = Eigen::VectorXd::Unit(m, j);
            const Eigen::MatrixXd B = gram_schmidt_cols(block);
            SampleSet zs;
            zs.xs = B.transpose() * rec.xs;
            zs.ys = rec.ys;
            zs.condition_mask = rec.condition_mask;
            const MlrDualBasis duals = build_mlr_dual_basis(zs, 2, ridge);
            // x_i x_j = (u . z)(v . z) expanded over block monomials
            const Eigen::VectorXd u = B.transpose() * Eigen::VectorXd::Unit(m, i);
            const Eigen::VectorXd v = B.transpose() * Eigen::VectorXd::Unit(m, j);
            double dh = 0.0;
            const SymTensor Tz = mlr_moment_tensor(zs, 1, duals, 1, &dh);
            // target = sum_gamma c_gamma (sum_w beta_B^gamma) with
            // c from the coefficient expansion of (u.z)(v.z).
            HomogeneousPoly pu(static_cast<int>(B.cols()), 1), pv(static_cast<int>(B.cols()), 1);
            pu.coeffs = u;
            pv.coeffs = v;
            const HomogeneousPoly prod = multiply(pu, pv);
            const auto& monos = monomials_of(static_cast<int>(B.cols()), 2);
            double val = 0.0;
            for (std::size_t g = 0; g < monos.size(); ++g) {
                val += prod.coeffs[static_cast<Eigen::Index>(g)] *
                       Tz.vals[static_cast<Eigen::Index>(g)];
            }
            MultiIndex a(static_cast<std::size_t>(m), 0);
            ++a[static_cast<std::size_t>(i)];
            ++a[static_cast<std::size_t>(j)];
            T.vals[static_cast<Eigen::Index>(monomial_rank(a))] = val;
            err2 += dh * dh;
        }
    }
    if (delta_hat) *delta_hat = std::sqrt(err2);
    return T;
}

}  // namespace detail

// One halving round: cluster the cover, recentre, reduce dimension, estimate
// the conditional moment tensor over the reduced block, cover, un-recentre,
// refine. Requires the radius to sit above the iteration floor.
inline SRCover mlr_iterate_cover(const SRCover& cover, const SampleSet& samples, int k,
                                 double p_min, double sigma, MlrIterateOptions opts = {}) {
    const double floor = opts.floor_mult * sigma;
    if (cover.r <= floor) throw mlr_floor_error(cover.r, floor);
    const int m = samples.dim();

    const MlrClustering clu = mlr_cluster(cover, k, sigma, opts.cluster_eta, opts.cluster);
    const detail::ConditionalSet cond = detail::recentre_conditional(samples, clu);
    const Eigen::MatrixXd event_dirs = detail::event_directions(clu);

    double d2 = 0.0;
    const SymTensor T2 = detail::mlr_conditional_t2(cond.recentred, event_dirs, opts.ridge, &d2);
    Eigen::MatrixXd U = dimension_reduce(T2, p_min, opts.dim_reduce_loosen * d2);
    if (U.cols() == 0) {
        U = Eigen::MatrixXd::Zero(m, 1);
        U(0, 0) = 1.0;
    }
    if (U.cols() > k) U = U.rightCols(k);
    // Residual mass a dropped direction can hide from the components.
    const double dim_loss = std::sqrt(2.0 * opts.dim_reduce_loosen * d2 / p_min);

    // Working block: the reduced directions first, then the event directions.
    Eigen::MatrixXd block(m, U.cols() + event_dirs.cols());
    block.leftCols(U.cols()) = U;
    block.rightCols(event_dirs.cols()) = event_dirs;
    const Eigen::MatrixXd B = detail::gram_schmidt_cols(block);
    const int r_dim = static_cast<int>(U.cols());

    SampleSet zs;
    zs.xs = B.transpose() * cond.recentred.xs;
    zs.ys = cond.recentred.ys;
    zs.condition_mask = cond.recentred.condition_mask;
    const MlrDualBasis duals = build_mlr_dual_basis(zs, 2 * opts.d, opts.ridge);
    double dt = 0.0;
    const SymTensor T = mlr_moment_tensor(zs, opts.d, duals, opts.threads, &dt);
    const SymTensor T_U = head_subtensor(T, r_dim);

    double resid_bound = 0.0;
    {
        std::vector<double> ay;
        for (Eigen::Index s = 0; s < zs.ys.size(); ++s) {
            if (zs.condition_mask[static_cast<std::size_t>(s)]) ay.push_back(std::abs(zs.ys[s]));
        }
        std::sort(ay.begin(), ay.end());
        resid_bound = ay.empty() ? cover.r : ay[static_cast<std::size_t>(0.98 * ay.size())];
    }
    const double R_in = std::max(4.0 * (cover.r + sigma) / 8.0, 1.2 * resid_bound) + 1e-6;
    // The R_in/80 floor keeps the inner lattice bounded even when the input
    // cover's advertised radius is optimistic or representatives merged.
    const double eps_in = std::min(
        R_in / 2.0,
        std::max({opts.inner_eps_mult * cover.r * p_min / k, R_in / 80.0, 0.5 * sigma}));

    ParameterCoverOptions pco;
    pco.weight_floor = 0.6 * p_min;
    pco.cover = opts.cover;
    const Cover inner = parameter_cover(T_U, R_in, eps_in, dt, k, pco);

    SRCover expanded;
    expanded.r = 2.0 * eps_in + dim_loss;
    for (const auto& rep : clu.reps) {
        for (const auto& z : inner.points) {
            expanded.points.push_back(rep + B.leftCols(r_dim) * z);
        }
    }
    expanded.s_bound = static_cast<int>(expanded.points.size());
    return mlr_refine_cover(expanded, samples, k, p_min, sigma, opts.refine);
}

struct MlrLearnOptions {
    MlrIterateOptions iterate;
    double target_mult = 3.0;       // stop radius: target_mult Delta / (k^3 log(mk/p))
    double final_close_mult = 0.5;  // closeness multiplier for the final sort
    double final_eta = 0.25;
    int hard_em_rounds = 3;
    int max_rounds = 25;
    double separation_gate = 20.0;  // required Delta/sigma when sigma > 0
};

struct mlr_gate_error : std::runtime_error {
    explicit mlr_gate_error(const std::string& w) : std::runtime_error(w) {}
};

namespace detail {

inline Eigen::VectorXd ols(const std::vector<Eigen::Index>& rows, const SampleSet& s) {
    const int m = s.dim();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), m);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        X.row(static_cast<Eigen::Index>(i)) = s.xs.col(rows[i]).transpose();
        y[static_cast<Eigen::Index>(i)] = s.ys[rows[i]];
    }
    return X.colPivHouseholderQr().solve(y);
}

}  // namespace detail

// Parameter estimation. Noiseless runs recover the regressors exactly by
// linear algebra on perfectly sorted samples; noisy runs use per-cluster
// least squares polished by hard reassignment rounds.
inline MlrParams mlr_parameter_estimate(const SampleSet& samples, int k, double p_min, double sigma,
                                        double Delta, double eps, bool noiseless,
                                        MlrLearnOptions opts = {}) {
    (void)eps;
    const int m = samples.dim();
    if (noiseless != (sigma == 0.0)) {
        throw std::invalid_argument("mlr_parameter_estimate: noiseless flag must match sigma == 0");
    }
    if (!noiseless && Delta / sigma < opts.separation_gate) {
        throw mlr_gate_error("separation gate: Delta/sigma = " + std::to_string(Delta / sigma) +
                             " below the configured threshold " +
                             std::to_string(opts.separation_gate));
    }

    // Deterministic slices: iteration rounds share the head, the final solve
    // uses the tail.
    const Eigen::Index n = samples.count();
    const Eigen::Index n_iter = (3 * n) / 5;
    SampleSet head;
    head.xs = samples.xs.leftCols(n_iter);
    head.ys = samples.ys.head(n_iter);
    SampleSet tail;
    tail.xs = samples.xs.rightCols(n - n_iter);
    tail.ys = samples.ys.tail(n - n_iter);

    double R0 = 0.0;
    {
        std::vector<double> ay(static_cast<std::size_t>(head.ys.size()));
        for (Eigen::Index i = 0; i < head.ys.size(); ++i) ay[static_cast<std::size_t>(i)] = std::abs(head.ys[i]);
        std::sort(ay.begin(), ay.end());
        R0 = 3.0 * ay[static_cast<std::size_t>(0.9 * ay.size())] + sigma + 1e-6;
    }
    SRCover cover;
    cover.points.assign(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(m));
    cover.s_bound = k;
    cover.r = R0;

    const double floor = opts.iterate.floor_mult * sigma;
    const double target = std::max(
        1.001 * floor, opts.target_mult * Delta /
                           (std::pow(static_cast<double>(k), 3.0) *
                            std::log(static_cast<double>(m) * k / p_min)));
    for (int round = 0; round < opts.max_rounds && cover.r > target; ++round) {
        try {
            cover = mlr_iterate_cover(cover, head, k, p_min, sigma, opts.iterate);
        } catch (const mlr_floor_error&) {
            break;
        }
    }

    // Final sort with a tight closeness threshold so distinct components get
    // distinct representatives.
    MlrClusterOptions final_opts;
    final_opts.close_mult = opts.final_close_mult;
    const MlrClustering clu = mlr_cluster(cover, k, sigma, opts.final_eta, final_opts);
    std::vector<std::vector<Eigen::Index>> groups(clu.reps.size());
    for (Eigen::Index s = 0; s < tail.count(); ++s) {
        if (!clu.event(tail.xs.col(s))) continue;
        groups[static_cast<std::size_t>(clu.classify(tail.xs.col(s), tail.ys[s]))].push_back(s);
    }
    std::vector<std::pair<double, int>> by_size;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        by_size.emplace_back(-static_cast<double>(groups[g].size()), static_cast<int>(g));
    }
    std::sort(by_size.begin(), by_size.end());
    if (static_cast<int>(by_size.size()) < k) {
        throw mlr_gate_error("final clustering produced " + std::to_string(by_size.size()) +
                             " groups, expected " + std::to_string(k));
    }
    Eigen::MatrixXd betas(m, k);
    for (int c = 0; c < k; ++c) {
        const auto& rows = groups[static_cast<std::size_t>(by_size[static_cast<std::size_t>(c)].second)];
        if (static_cast<int>(rows.size()) < 2 * m) {
            throw mlr_gate_error("component " + std::to_string(c) + " received only " +
                                 std::to_string(rows.size()) + " samples; need at least " +
                                 std::to_string(2 * m));
        }
        betas.col(c) = detail::ols(rows, tail);
    }

    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    if (!noiseless) {
        for (int round = 0; round < opts.hard_em_rounds; ++round) {
            std::vector<std::vector<Eigen::Index>> assign(static_cast<std::size_t>(k));
            for (Eigen::Index s = 0; s < tail.count(); ++s) {
                int best = 0;
                double bd = std::abs(tail.ys[s] - betas.col(0).dot(tail.xs.col(s)));
                for (int c = 1; c < k; ++c) {
                    const double d = std::abs(tail.ys[s] - betas.col(c).dot(tail.xs.col(s)));
                    if (d < bd) {
                        bd = d;
                        best = c;
                    }
                }
                assign[static_cast<std::size_t>(best)].push_back(s);
            }
            counts.setZero();
            for (int c = 0; c < k; ++c) {
                if (static_cast<int>(assign[static_cast<std::size_t>(c)].size()) >= 2 * m) {
                    betas.col(c) = detail::ols(assign[static_cast<std::size_t>(c)], tail);
                }
                counts[c] = static_cast<double>(assign[static_cast<std::size_t>(c)].size());
            }
        }
    } else {
        for (int c = 0; c < k; ++c) {
            counts[c] = static_cast<double>(
                groups[static_cast<std::size_t>(by_size[static_cast<std::size_t>(c)].second)].size());
        }
    }

    MlrParams out;
    out.betas = betas;
    out.weights = counts.sum() > 0 ? Eigen::VectorXd(counts / counts.sum())
                                   : Eigen::VectorXd::Constant(k, 1.0 / k);
    out.sigma = sigma;
    return out;
}

struct MlrDensityResult {
    Eigen::MatrixXd candidate_betas;
    Eigen::VectorXd weights;
    double sigma = 0.0;
    double fit_objective = 0.0;
    std::string note;
};

// Density estimation: iterate the cover down to the noise floor, refine each
// representative's residual on a one-or-few dimensional block at radius about
// eps*sigma, then fit mixture weights over the regression candidates.
inline MlrDensityResult mlr_density_estimate(const SampleSet& samples, int k, double p_min, int d,
                                             int d_prime, double eps, double sigma,
                                             MlrLearnOptions opts = {}) {
    if (!(sigma > 0.0)) throw std::invalid_argument("mlr_density_estimate: sigma > 0 required");
    opts.iterate.d = d;
    const int m = samples.dim();
    const Eigen::Index n = samples.count();
    const Eigen::Index n_iter = n / 2;
    SampleSet head;
    head.xs = samples.xs.leftCols(n_iter);
    head.ys = samples.ys.head(n_iter);

    double R0 = 0.0;
    {
        std::vector<double> ay(static_cast<std::size_t>(head.ys.size()));
        for (Eigen::Index i = 0; i < head.ys.size(); ++i) ay[static_cast<std::size_t>(i)] = std::abs(head.ys[i]);
        std::sort(ay.begin(), ay.end());
        R0 = 3.0 * ay[static_cast<std::size_t>(0.9 * ay.size())] + sigma + 1e-6;
    }
    SRCover cover;
    cover.points.assign(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(m));
    cover.s_bound = k;
    cover.r = R0;
    for (int round = 0; round < opts.max_rounds; ++round) {
        try {
            cover = mlr_iterate_cover(cover, head, k, p_min, sigma, opts.iterate);
        } catch (const mlr_floor_error&) {
            break;
        }
        if (cover.r <= opts.iterate.floor_mult * sigma) break;
    }

    // Final pass at radius about eps * sigma around each representative.
    const MlrClustering clu = mlr_cluster(cover, k, sigma, opts.iterate.cluster_eta);
    const detail::ConditionalSet cond = detail::recentre_conditional(head, clu);
    const Eigen::MatrixXd event_dirs = detail::event_directions(clu);
    std::vector<Eigen::VectorXd> candidates;
    for (std::size_t repi = 0; repi < clu.reps.size(); ++repi) {
        SampleSet sub;
        std::vector<Eigen::Index> rows;
        for (Eigen::Index s = 0; s < cond.recentred.count(); ++s) {
            if (cond.rep_of[static_cast<std::size_t>(s)] == static_cast<int>(repi) &&
                cond.recentred.condition_mask[static_cast<std::size_t>(s)]) {
                rows.push_back(s);
            }
        }
        if (rows.size() < 200) {
            candidates.push_back(clu.reps[repi]);
            continue;
        }
        sub.xs.resize(m, static_cast<Eigen::Index>(rows.size()));
        sub.ys.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            sub.xs.col(static_cast<Eigen::Index>(i)) = cond.recentred.xs.col(rows[i]);
            sub.ys[static_cast<Eigen::Index>(i)] = cond.recentred.ys[rows[i]];
        }
        double d2 = 0.0;
        const SymTensor T2 = detail::mlr_conditional_t2(sub, event_dirs, opts.iterate.ridge, &d2);
        Eigen::MatrixXd U = dimension_reduce(T2, p_min, d2);
        if (U.cols() == 0) {
            candidates.push_back(clu.reps[repi]);
            continue;
        }
        if (U.cols() > k) U = U.rightCols(k);
        Eigen::MatrixXd block(m, U.cols() + event_dirs.cols());
        block.leftCols(U.cols()) = U;
        block.rightCols(event_dirs.cols()) = event_dirs;
        const Eigen::MatrixXd B = detail::gram_schmidt_cols(block);
        SampleSet zs;
        zs.xs = B.transpose() * sub.xs;
        zs.ys = sub.ys;
        const MlrDualBasis duals = build_mlr_dual_basis(zs, 2 * d_prime, opts.iterate.ridge);
        double dt = 0.0;
        const SymTensor T = mlr_moment_tensor(zs, d_prime, duals, opts.iterate.threads, &dt);
        const SymTensor T_U = head_subtensor(T, static_cast<int>(U.cols()));
        const double R_in = std::max(4.0 * cover.r, 8.0 * sigma);
        const double eps_fin = std::min(R_in / 2.0, std::max({eps * sigma, R_in / 60.0, 1e-4}));
        ParameterCoverOptions pco;
        pco.weight_floor = 0.6 * p_min;
        pco.cover = opts.iterate.cover;
        const Cover inner = parameter_cover(T_U, R_in, eps_fin, dt, k, pco);
        for (const auto& z : inner.points) {
            candidates.push_back(clu.reps[repi] + B.leftCols(U.cols()) * z);
        }
    }

    // Weight fit over the conditional (y | x) candidate densities.
    const Eigen::MatrixXd fit_x = samples.xs.rightCols(n - n_iter);
    const Eigen::VectorXd fit_y = samples.ys.tail(n - n_iter);
    const Eigen::Index n_fit = fit_x.cols();
    Eigen::MatrixXd L(static_cast<Eigen::Index>(candidates.size()), n_fit);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const Eigen::RowVectorXd pred = candidates[c].transpose() * fit_x;
        for (Eigen::Index s = 0; s < n_fit; ++s) {
            const double r = (fit_y[s] - pred[s]) / sigma;
            L(static_cast<Eigen::Index>(c), s) = -0.5 * r * r;
        }
    }
    const Eigen::Index n_coarse = std::min<Eigen::Index>(n_fit, 20000);
    const MixtureFitResult coarse =
        fit_mixture_weights_core(L.leftCols(n_coarse), 0.25, 1e-6, 400);
    const double floor1 = 0.25 / static_cast<double>(candidates.size());
    std::vector<Eigen::VectorXd> kept;
    std::vector<Eigen::Index> kept_idx;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (coarse.weights[static_cast<Eigen::Index>(i)] > 1.5 * floor1) {
            kept.push_back(candidates[i]);
            kept_idx.push_back(static_cast<Eigen::Index>(i));
        }
    }
    if (kept.empty()) {
        kept = candidates;
        for (std::size_t i = 0; i < candidates.size(); ++i) kept_idx.push_back(static_cast<Eigen::Index>(i));
    }
    Eigen::MatrixXd L2(static_cast<Eigen::Index>(kept.size()), n_fit);
    for (std::size_t i = 0; i < kept_idx.size(); ++i) {
        L2.row(static_cast<Eigen::Index>(i)) = L.row(kept_idx[i]);
    }
    const double eps_fit = std::max(0.02, eps / 5.0);
    const MixtureFitResult fine = fit_mixture_weights_core(L2, eps_fit, 1e-8, 4000);

    MlrDensityResult out;
    out.candidate_betas.resize(m, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        out.candidate_betas.col(static_cast<Eigen::Index>(i)) = kept[i];
    }
    out.weights = fine.weights;
    out.sigma = sigma;
    out.fit_objective = fine.objective;
    out.note = "candidates=" + std::to_string(candidates.size()) +
               " kept=" + std::to_string(kept.size());
    return out;
}

}  // namespace varcover
