#pragma once

// Spherical Gaussian mixture pipelines: rough single-linkage clustering with
// recentring, spectral dimension reduction, per-cluster moment covers, and
// either density estimation (candidate means + likelihood weights) or
// parameter estimation (LP-filtered candidates, separated representatives,
// linkage clustering, per-cluster means with Lloyd polishing).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "varcover/estimators.hpp"
#include "varcover/mixture_fit.hpp"
#include "varcover/moment_cover.hpp"
#include "varcover/synth.hpp"

namespace varcover {

struct ClusterAssignment {
    Eigen::MatrixXd centers;       // one column per cluster (cluster means)
    std::vector<int> assign;       // per input sample: cluster index or -1
    double event_rate = 0.0;       // fraction of inputs assigned
    Eigen::MatrixXd points;        // the clustered points, for classification
    std::vector<int> point_cluster;
    double classify_radius = 0.0;

    // Cluster of the nearest clustered point within the classify radius.
    int classify(const Eigen::VectorXd& x) const {
        double best = classify_radius;
        int cl = -1;
        for (Eigen::Index i = 0; i < points.cols(); ++i) {
            const double d = (points.col(i) - x).norm();
            if (d <= best) {
                best = d;
                cl = point_cluster[static_cast<std::size_t>(i)];
            }
        }
        return cl;
    }
};

// Single-linkage clustering at threshold link_factor (sqrt(m) + log(1/eta)),
// with a nearest-point classifier at classify_factor (sqrt(m) + log(1/eta)).
inline ClusterAssignment gmm_rough_cluster(const Eigen::MatrixXd& xs, double eta,
                                           double link_factor = 10.0,
                                           double classify_factor = 4.0) {
    const int m = static_cast<int>(xs.rows());
    const Eigen::Index n = xs.cols();
    const double scale = std::sqrt(static_cast<double>(m)) + std::log(1.0 / eta);
    const double thresh = link_factor * scale;

    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    const double t2 = thresh * thresh;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if ((xs.col(i) - xs.col(j)).squaredNorm() <= t2) {
                const int a = find(static_cast<int>(i)), b = find(static_cast<int>(j));
                if (a != b) parent[static_cast<std::size_t>(a)] = b;
            }
        }
    }
    std::vector<int> root_to_cluster(static_cast<std::size_t>(n), -1);
    int n_clusters = 0;
    ClusterAssignment out;
    out.assign.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int r = find(static_cast<int>(i));
        if (root_to_cluster[static_cast<std::size_t>(r)] < 0) root_to_cluster[static_cast<std::size_t>(r)] = n_clusters++;
        out.assign[static_cast<std::size_t>(i)] = root_to_cluster[static_cast<std::size_t>(r)];
    }
    out.centers = Eigen::MatrixXd::Zero(m, n_clusters);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_clusters);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = out.assign[static_cast<std::size_t>(i)];
        out.centers.col(c) += xs.col(i);
        counts[c] += 1.0;
    }
    for (int c = 0; c < n_clusters; ++c) out.centers.col(c) /= counts[c];
    out.points = xs;
    out.point_cluster = out.assign;
    out.classify_radius = classify_factor * scale;
    out.event_rate = 1.0;
    return out;
}

struct GmmLearnOptions {
    int d = 2;                       // moment degree: tensors of order 2d
    double cluster_eta = 0.5;
    double cluster_link_factor = 3.0;     // desk-scale linkage multiple
    double cluster_classify_factor = 1.5;
    double weight_floor = 0.0;       // 0: use max(0.05, eps/k)
    int threads = 1;
    std::size_t max_cluster_samples = 2000;
    std::size_t max_candidates = 4000;
    CoverParams cover;               // eps/R/delta filled in per call
    // parameter-estimation constants, in units of sqrt(log(1/p_min))
    double lp_margin_mult = 2.0;
    double separated_mult = 4.0;
    double same_cluster_link_mult = 12.0;
    int lloyd_rounds = 10;
    double separation_warn_mult = 60.0;
};

struct GmmDensityResult {
    Eigen::MatrixXd candidate_means;  // one column per hypothesis component
    Eigen::VectorXd weights;
    double fit_objective = 0.0;
    std::string note;
};

namespace detail {

struct RecentredSet {
    Eigen::MatrixXd xs;            // recentred samples
    std::vector<int> center_idx;   // rough-cluster center of each sample
};

inline RecentredSet recentre(const Eigen::MatrixXd& xs, const ClusterAssignment& rough) {
    RecentredSet out;
    std::vector<Eigen::Index> keep;
    std::vector<int> ctr;
    for (Eigen::Index i = 0; i < xs.cols(); ++i) {
        const int c = rough.classify(xs.col(i));
        if (c >= 0) {
            keep.push_back(i);
            ctr.push_back(c);
        }
    }
    out.xs.resize(xs.rows(), static_cast<Eigen::Index>(keep.size()));
    out.center_idx = ctr;
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.xs.col(static_cast<Eigen::Index>(j)) =
            xs.col(keep[j]) - rough.centers.col(ctr[j]);
    }
    return out;
}

inline double norm_quantile(const Eigen::MatrixXd& xs, double q) {
    std::vector<double> norms(static_cast<std::size_t>(xs.cols()));
    for (Eigen::Index i = 0; i < xs.cols(); ++i) norms[static_cast<std::size_t>(i)] = xs.col(i).norm();
    std::sort(norms.begin(), norms.end());
    if (norms.empty()) return 0.0;
    const std::size_t idx = std::min(norms.size() - 1, static_cast<std::size_t>(q * static_cast<double>(norms.size())));
    return norms[idx];
}

// Greedy tau-separated subset in deterministic order; keeping any cover and
// thinning at tau yields a cover at (radius + tau).
inline std::vector<Eigen::VectorXd> thin_points(const std::vector<Eigen::VectorXd>& pts, double tau) {
    std::vector<Eigen::VectorXd> kept;
    for (const auto& p : pts) {
        bool close = false;
        for (const auto& q : kept) {
            if ((p - q).norm() <= tau) {
                close = true;
                break;
            }
        }
        if (!close) kept.push_back(p);
    }
    return kept;
}

// Candidate means from per-cluster moment covers of the recentred,
// dimension-reduced samples; candidates are lifted back through the centers.
inline std::vector<Eigen::VectorXd> gmm_candidate_means(const Eigen::MatrixXd& xs, int k,
                                                        double cover_eps,
                                                        const GmmLearnOptions& opts,
                                                        double w_floor) {
    const int m = static_cast<int>(xs.rows());
    const Eigen::Index n = xs.cols();
    const Eigen::Index n_clu =
        std::min<Eigen::Index>(static_cast<Eigen::Index>(opts.max_cluster_samples), n / 4);
    const ClusterAssignment rough =
        gmm_rough_cluster(xs.leftCols(std::max<Eigen::Index>(n_clu, 50)), opts.cluster_eta,
                          opts.cluster_link_factor, opts.cluster_classify_factor);
    const RecentredSet rec = recentre(xs.rightCols(n - n_clu), rough);

    SampleSet s2;
    s2.xs = rec.xs;
    double delta2 = 0.0;
    const SymTensor T2 = gmm_moment_tensor(s2, 1, opts.threads, &delta2);
    Eigen::MatrixXd U = dimension_reduce(T2, w_floor, delta2);
    if (U.cols() == 0) {
        // Degenerate spectrum (means at the centers): any single direction works.
        U = Eigen::MatrixXd::Zero(m, 1);
        U(0, 0) = 1.0;
    }
    if (U.cols() > k) U = U.rightCols(k);

    // Recluster the projected recentred samples and recentre again.
    const Eigen::MatrixXd Z = U.transpose() * rec.xs;
    const Eigen::Index nz_clu = std::min<Eigen::Index>(static_cast<Eigen::Index>(opts.max_cluster_samples),
                                                       Z.cols() / 4);
    const ClusterAssignment rough2 =
        gmm_rough_cluster(Z.leftCols(std::max<Eigen::Index>(nz_clu, 50)), opts.cluster_eta,
                          opts.cluster_link_factor, opts.cluster_classify_factor);

    // Membership of the remaining samples, tracking both recentring stages.
    struct Member {
        Eigen::VectorXd z;
        int c1;
        int c2;
    };
    std::vector<std::vector<Member>> clusters(static_cast<std::size_t>(rough2.centers.cols()));
    for (Eigen::Index i = nz_clu; i < Z.cols(); ++i) {
        const int c2 = rough2.classify(Z.col(i));
        if (c2 < 0) continue;
        clusters[static_cast<std::size_t>(c2)].push_back(
            Member{Z.col(i) - rough2.centers.col(c2), rec.center_idx[static_cast<std::size_t>(i)], c2});
    }

    std::vector<Eigen::VectorXd> candidates;
    for (std::size_t l = 0; l < clusters.size(); ++l) {
        const auto& members = clusters[l];
        if (members.size() < 25) continue;
        SampleSet sl;
        sl.xs.resize(U.cols(), static_cast<Eigen::Index>(members.size()));
        for (std::size_t i = 0; i < members.size(); ++i) {
            sl.xs.col(static_cast<Eigen::Index>(i)) = members[i].z;
        }
        double dh = 0.0;
        const SymTensor T = gmm_moment_tensor(sl, opts.d, opts.threads, &dh);
        const double R = std::max(2.0, norm_quantile(sl.xs, 0.995) + 0.5);
        ParameterCoverOptions pco;
        pco.weight_floor = w_floor;
        pco.cover = opts.cover;
        Cover cov;
        try {
            cov = parameter_cover(T, R, cover_eps, dh, k, pco);
        } catch (const cover_resource_error&) {
            continue;  // cluster skipped; others may still cover its mean
        }

        // Which stage-one centers feed this cluster.
        std::vector<int> c1s;
        for (const auto& mbr : members) {
            if (std::find(c1s.begin(), c1s.end(), mbr.c1) == c1s.end()) c1s.push_back(mbr.c1);
        }
        for (int c1 : c1s) {
            const Eigen::VectorXd base =
                rough.centers.col(c1) + U * rough2.centers.col(static_cast<Eigen::Index>(l));
            for (const auto& z : cov.points) candidates.push_back(base + U * z);
        }
    }
    if (candidates.empty()) {
        candidates.push_back(xs.rowwise().mean());
    }
    // Thin only when over budget; thinning at tau widens the radius by tau.
    double tau = cover_eps / 2.0;
    std::vector<Eigen::VectorXd> thinned = thin_points(candidates, 1e-9);
    while (thinned.size() > opts.max_candidates) {
        thinned = thin_points(thinned, tau);
        tau *= 1.6;
    }
    return thinned;
}

inline Eigen::MatrixXd gaussian_logdens_matrix(const std::vector<Eigen::VectorXd>& cands,
                                               const Eigen::MatrixXd& xs) {
    // log N(x; c, I) up to the shared constant
    Eigen::MatrixXd C(xs.rows(), static_cast<Eigen::Index>(cands.size()));
    for (std::size_t i = 0; i < cands.size(); ++i) C.col(static_cast<Eigen::Index>(i)) = cands[i];
    Eigen::MatrixXd L = C.transpose() * xs;  // n_cand x n_samples
    const Eigen::VectorXd cn = 0.5 * C.colwise().squaredNorm().transpose();
    const Eigen::RowVectorXd xn = 0.5 * xs.colwise().squaredNorm();
    L.colwise() -= cn;
    L.rowwise() -= xn;
    return L;
}

}  // namespace detail

// Density estimation: candidate means from the cover pipeline, then maximum
// likelihood mixing weights over the floored simplex (coarse fit to discard
// implausible candidates, then a refit on the survivors).
inline GmmDensityResult gmm_density_estimate(const SampleSet& samples, int k, int d, double eps,
                                             GmmLearnOptions opts = {}) {
    opts.d = d;
    const Eigen::Index n = samples.count();
    const Eigen::Index n_mom = (2 * n) / 3;
    const double w_floor = opts.weight_floor > 0.0 ? opts.weight_floor
                                                   : std::max(0.05, eps / static_cast<double>(k));
    const auto candidates =
        detail::gmm_candidate_means(samples.xs.leftCols(n_mom), k, eps, opts, w_floor);

    const Eigen::MatrixXd fit_xs = samples.xs.rightCols(n - n_mom);
    const Eigen::Index n_fit = fit_xs.cols();
    const Eigen::Index n_coarse = std::min<Eigen::Index>(n_fit, 20000);

    GmmDensityResult out;
    const Eigen::MatrixXd L1 = detail::gaussian_logdens_matrix(candidates, fit_xs.leftCols(n_coarse));
    const MixtureFitResult coarse = fit_mixture_weights_core(L1, 0.25, 1e-6, 400);
    const double floor1 = 0.25 / static_cast<double>(candidates.size());
    std::vector<Eigen::VectorXd> kept;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (coarse.weights[static_cast<Eigen::Index>(i)] > 1.5 * floor1) kept.push_back(candidates[i]);
    }
    if (kept.empty()) kept = candidates;

    const double eps_fit = std::max(0.02, eps / 5.0);
    const Eigen::MatrixXd L2 = detail::gaussian_logdens_matrix(kept, fit_xs);
    const MixtureFitResult fine = fit_mixture_weights_core(L2, eps_fit, 1e-8, 4000);

    out.candidate_means.resize(samples.dim(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        out.candidate_means.col(static_cast<Eigen::Index>(i)) = kept[i];
    }
    out.weights = fine.weights;
    out.fit_objective = fine.objective;
    out.note = "candidates=" + std::to_string(candidates.size()) +
               " kept=" + std::to_string(kept.size());
    return out;
}

struct gmm_cluster_count_error : std::runtime_error {
    explicit gmm_cluster_count_error(int found, int want)
        : std::runtime_error("parameter clustering found " + std::to_string(found) +
                             " clusters, expected " + std::to_string(want)) {}
};

namespace detail {

// Approximate feasibility of the candidate-goodness program
//   max sum_x u_x  s.t.  u in [0,1],  sum_{x in A_j} u_x <= cap for all j,
// decided through a feasible point from multiplicative repair. A_j collects
// the samples beyond the directional margin toward candidate j.
inline bool lp_filter_good(const Eigen::MatrixXd& T, const std::vector<Eigen::VectorXd>& cands,
                           std::size_t self, double margin, double cap, double need) {
    const Eigen::VectorXd& c = cands[self];
    std::vector<std::vector<int>> sets;
    for (std::size_t j = 0; j < cands.size(); ++j) {
        if (j == self) continue;
        const Eigen::VectorXd dir = cands[j] - c;
        const double nd = dir.norm();
        if (nd < 1e-12) continue;
        std::vector<int> A;
        for (Eigen::Index s = 0; s < T.cols(); ++s) {
            if ((T.col(s) - c).dot(dir) / nd > margin) A.push_back(static_cast<int>(s));
        }
        if (!A.empty()) sets.push_back(std::move(A));
    }
    Eigen::VectorXd u = Eigen::VectorXd::Ones(T.cols());
    for (int pass = 0; pass < 60; ++pass) {
        bool violated = false;
        for (const auto& A : sets) {
            double sum = 0.0;
            for (int s : A) sum += u[s];
            if (sum > cap) {
                violated = true;
                const double scale = cap / sum;
                for (int s : A) u[s] *= scale;
            }
        }
        if (!violated) break;
    }
    return u.sum() >= need;
}

}  // namespace detail

// Parameter estimation under mean separation: cover candidates, the weighted
// LP goodness filter, a maximal separated good subset, nearest-representative
// assignment with linkage clustering, per-cluster means, and Lloyd polishing.
inline GmmParams gmm_parameter_estimate(const SampleSet& samples, int k, double p_min, double eps,
                                        GmmLearnOptions opts = {}, std::string* warn = nullptr) {
    (void)eps;
    const int m = samples.dim();
    const Eigen::Index n = samples.count();
    const double slog = std::sqrt(std::log(1.0 / p_min));
    if (warn) *warn = "";

    const Eigen::Index n_mom = n / 2;
    const double w_floor = std::max(0.01, p_min / 2.0);
    auto candidates = detail::gmm_candidate_means(samples.xs.leftCols(n_mom), k, 0.5, opts, w_floor);
    candidates = detail::thin_points(candidates, 0.3);

    // LP goodness filter on a fresh batch.
    const Eigen::Index n_lp = std::min<Eigen::Index>(2000, (n - n_mom) / 3);
    const Eigen::MatrixXd Tb = samples.xs.middleCols(n_mom, n_lp);
    const double margin = opts.lp_margin_mult * slog;
    const double cap = p_min * p_min * static_cast<double>(n_lp) / 10.0;
    const double need = p_min * static_cast<double>(n_lp) / 2.0;
    std::vector<Eigen::VectorXd> good;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (detail::lp_filter_good(Tb, candidates, i, margin, cap, need)) {
            good.push_back(candidates[i]);
        }
    }
    if (good.empty()) good = candidates;

    // Maximal separated good subset.
    std::vector<Eigen::VectorXd> reps;
    for (const auto& g : good) {
        bool far = true;
        for (const auto& r : reps) {
            if ((g - r).norm() <= opts.separated_mult * slog) {
                far = false;
                break;
            }
        }
        if (far) reps.push_back(g);
    }

    // Assign fresh samples to the nearest representative and link clusters.
    const Eigen::Index n_assign = n - n_mom - n_lp;
    const Eigen::MatrixXd Ab = samples.xs.rightCols(n_assign);
    std::vector<int> rep_of(static_cast<std::size_t>(Ab.cols()));
    for (Eigen::Index s = 0; s < Ab.cols(); ++s) {
        int best = 0;
        double bd = (Ab.col(s) - reps[0]).norm();
        for (std::size_t r = 1; r < reps.size(); ++r) {
            const double d2 = (Ab.col(s) - reps[r]).norm();
            if (d2 < bd) {
                bd = d2;
                best = static_cast<int>(r);
            }
        }
        rep_of[static_cast<std::size_t>(s)] = best;
    }
    // Link representatives that received samples and lie close together.
    const double link = opts.same_cluster_link_mult * slog;
    std::vector<int> rep_cluster(reps.size());
    std::iota(rep_cluster.begin(), rep_cluster.end(), 0);
    for (std::size_t a = 0; a < reps.size(); ++a) {
        for (std::size_t b = a + 1; b < reps.size(); ++b) {
            if ((reps[a] - reps[b]).norm() <= link) {
                const int ca = rep_cluster[a], cb = rep_cluster[b];
                for (auto& c : rep_cluster) {
                    if (c == cb) c = ca;
                }
            }
        }
    }
    std::vector<int> relabel(reps.size(), -1);
    int n_clusters = 0;
    for (std::size_t r = 0; r < reps.size(); ++r) {
        const int c = rep_cluster[r];
        if (relabel[static_cast<std::size_t>(c)] < 0) relabel[static_cast<std::size_t>(c)] = n_clusters++;
    }
    std::vector<double> cluster_count(static_cast<std::size_t>(n_clusters), 0.0);
    std::vector<Eigen::VectorXd> cluster_sum(static_cast<std::size_t>(n_clusters),
                                             Eigen::VectorXd::Zero(m));
    for (Eigen::Index s = 0; s < Ab.cols(); ++s) {
        const int cl = relabel[static_cast<std::size_t>(rep_cluster[static_cast<std::size_t>(
            rep_of[static_cast<std::size_t>(s)])])];
        cluster_count[static_cast<std::size_t>(cl)] += 1.0;
        cluster_sum[static_cast<std::size_t>(cl)] += Ab.col(s);
    }

    std::vector<std::pair<double, int>> by_size;
    for (int c = 0; c < n_clusters; ++c) {
        if (cluster_count[static_cast<std::size_t>(c)] > 0) {
            by_size.emplace_back(-cluster_count[static_cast<std::size_t>(c)], c);
        }
    }
    std::sort(by_size.begin(), by_size.end());
    if (static_cast<int>(by_size.size()) < k) {
        throw gmm_cluster_count_error(static_cast<int>(by_size.size()), k);
    }
    Eigen::MatrixXd means(m, k);
    for (int c = 0; c < k; ++c) {
        const int cl = by_size[static_cast<std::size_t>(c)].second;
        means.col(c) = cluster_sum[static_cast<std::size_t>(cl)] /
                       cluster_count[static_cast<std::size_t>(cl)];
    }

    // Lloyd polishing with hard assignments.
    Eigen::VectorXd counts(k);
    for (int round = 0; round < opts.lloyd_rounds; ++round) {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, k);
        counts.setZero();
        for (Eigen::Index s = 0; s < Ab.cols(); ++s) {
            int best = 0;
            double bd = (Ab.col(s) - means.col(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d2 = (Ab.col(s) - means.col(c)).squaredNorm();
                if (d2 < bd) {
                    bd = d2;
                    best = c;
                }
            }
            sums.col(best) += Ab.col(s);
            counts[best] += 1.0;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) means.col(c) = sums.col(c) / counts[c];
        }
    }

    GmmParams out;
    out.means = means;
    out.weights = counts / counts.sum();
    if (warn) {
        double min_sep = std::numeric_limits<double>::infinity();
        for (int a = 0; a < k; ++a) {
            for (int b = a + 1; b < k; ++b) {
                min_sep = std::min(min_sep, (means.col(a) - means.col(b)).norm());
            }
        }
        if (min_sep < opts.separation_warn_mult * slog) {
            *warn = "estimated separation " + std::to_string(min_sep) +
                    " below the theoretical working threshold " +
                    std::to_string(opts.separation_warn_mult * slog);
        }
    }
    return out;
}

}  // namespace varcover
