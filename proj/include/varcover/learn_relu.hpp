#pragma once

// PAC learning positive combinations of ReLUs (and of generalized linear
// models with a non-vanishing even Hermite coefficient): order-2 dimension
// reduction, a moment cover of the unit directions, then a non-negative
// least-squares fit over the candidate dictionary.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varcover/estimators.hpp"
#include "varcover/moment_cover.hpp"
#include "varcover/rng.hpp"

namespace varcover {

// E[ReLU(u.x) ReLU(v.x)] for unit u, v under the standard Gaussian
// (the arccos kernel): (sin th + (pi - th) cos th) / (2 pi).
inline double relu_kernel(double cos_theta) {
    const double c = std::clamp(cos_theta, -1.0, 1.0);
    const double th = std::acos(c);
    return (std::sin(th) + (M_PI - th) * c) / (2.0 * M_PI);
}

// ||sum_i a_i ReLU(u_i . x) - sum_j b_j ReLU(v_j . x)||_2^2 through the
// kernel; all directions must be unit vectors.
inline double relu_l2_distance2(const Eigen::MatrixXd& ua, const Eigen::VectorXd& ca,
                                const Eigen::MatrixXd& ub, const Eigen::VectorXd& cb) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < ua.cols(); ++i) {
        for (Eigen::Index j = 0; j < ua.cols(); ++j) {
            s += ca[i] * ca[j] * relu_kernel(ua.col(i).dot(ua.col(j)));
        }
    }
    for (Eigen::Index i = 0; i < ub.cols(); ++i) {
        for (Eigen::Index j = 0; j < ub.cols(); ++j) {
            s += cb[i] * cb[j] * relu_kernel(ub.col(i).dot(ub.col(j)));
        }
    }
    for (Eigen::Index i = 0; i < ua.cols(); ++i) {
        for (Eigen::Index j = 0; j < ub.cols(); ++j) {
            s -= 2.0 * ca[i] * cb[j] * relu_kernel(ua.col(i).dot(ub.col(j)));
        }
    }
    return std::max(0.0, s);
}

struct NetLearnOptions {
    int d = 2;
    double cover_eps = 0.05;    // direction cover radius inside the reduced space
    double dir_thin = 0.025;    // angular dedup after unit normalization
    double coeff_floor = 0.0;   // candidates below this fitted coefficient are dropped
    int threads = 1;
    int pgd_iters = 4000;
    CoverParams cover;
    std::size_t mc_gram = 60000;  // Monte-Carlo batch for GLM Gram entries
};

struct NetFitResult {
    Eigen::MatrixXd dirs;    // unit columns in the ambient space
    Eigen::VectorXd coeffs;  // non-negative
    double scale = 1.0;      // response normalization that was applied
    std::string note;
};

namespace detail {

inline std::vector<Eigen::VectorXd> unit_candidates(const Cover& cov, double thin_tau) {
    std::vector<Eigen::VectorXd> unit;
    for (const auto& c : cov.points) {
        const double n = c.norm();
        if (n < 0.3) continue;  // cannot be within a small eps of a unit vector
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

// min_a a^T G a - 2 b^T a over a >= 0 (optionally sum a <= cap) by projected
// gradient with a fixed 1/L step.
inline Eigen::VectorXd nonneg_quadratic_min(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                                            double sum_cap, int iters) {
    const Eigen::Index n = G.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const double L = std::max(1e-12, es.eigenvalues().maxCoeff());
    const double step = 1.0 / L;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd y = a;
    double t_prev = 1.0;
    auto project = [&](Eigen::VectorXd v) {
        v = v.cwiseMax(0.0);
        if (sum_cap > 0.0 && v.sum() > sum_cap) {
            // Euclidean projection onto the capped simplex {a >= 0, sum <= cap}.
            std::vector<double> sorted(v.data(), v.data() + v.size());
            std::sort(sorted.begin(), sorted.end(), std::greater<double>());
            double acc = 0.0, theta = 0.0;
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                acc += sorted[i];
                const double t = (acc - sum_cap) / static_cast<double>(i + 1);
                if (t < sorted[i]) theta = t;
            }
            theta = std::max(0.0, theta);
            v = (v.array() - theta).cwiseMax(0.0);
        }
        return v;
    };
    for (int it = 0; it < iters; ++it) {
        const Eigen::VectorXd grad = G * y - b;
        Eigen::VectorXd a_next = project(y - step * grad);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
        y = a_next + ((t_prev - 1.0) / t_next) * (a_next - a);
        if ((a_next - a).norm() <= 1e-12 * std::max(1.0, a.norm())) {
            a = a_next;
            break;
        }
        a = a_next;
        t_prev = t_next;
    }
    return a;
}

}  // namespace detail

// PAC learner for positive combinations of k ReLU units under Gaussian
// inputs; the hypothesis is a non-negative combination over cover directions.
inline NetFitResult relu_pac_learn(const SampleSet& samples, int k, int d, double eps,
                                   NetLearnOptions opts = {}) {
    opts.d = d;
    const Eigen::Index n = samples.count();
    if (!samples.has_response()) throw std::invalid_argument("relu_pac_learn: responses required");

    // Normalize so ||F|| + sigma is about 1.
    const double scale = std::sqrt(samples.ys.squaredNorm() / static_cast<double>(n)) + 1e-12;
    SampleSet norm = samples;
    norm.ys /= scale;

    const Eigen::Index n_half = n / 2;
    SampleSet head;
    head.xs = norm.xs.leftCols(n_half);
    head.ys = norm.ys.head(n_half);

    double d2 = 0.0;
    const SymTensor T2 = relu_moment_tensor(head, 1, opts.threads, &d2);
    // After normalization the coefficients sum to about sqrt(2 pi); directions
    // carrying less than ~0.15 of that mass are below the error budget anyway.
    Eigen::MatrixXd U = dimension_reduce(T2, std::max(0.15, eps / (4.0 * k)), d2);
    if (U.cols() == 0) {
        // No direction carries weight above the floor: the zero hypothesis.
        NetFitResult out;
        out.dirs = Eigen::MatrixXd::Zero(samples.dim(), 0);
        out.coeffs = Eigen::VectorXd::Zero(0);
        out.scale = scale;
        out.note = "empty reduction";
        return out;
    }
    if (U.cols() > k) U = U.rightCols(k);

    SampleSet zs;
    zs.xs = U.transpose() * head.xs;
    zs.ys = head.ys;
    double dt = 0.0;
    const SymTensor T = relu_moment_tensor(zs, d, opts.threads, &dt);
    ParameterCoverOptions pco;
    pco.weight_floor = std::max(0.02, eps / (4.0 * k));
    pco.cover = opts.cover;
    const Cover cov = parameter_cover(T, 1.1, opts.cover_eps, dt, k, pco);
    const auto cands = detail::unit_candidates(cov, opts.dir_thin);
    if (cands.empty()) {
        NetFitResult out;
        out.dirs = Eigen::MatrixXd::Zero(samples.dim(), 0);
        out.coeffs = Eigen::VectorXd::Zero(0);
        out.scale = scale;
        out.note = "no candidates";
        return out;
    }

    // Cross moments from the held-out half; Gram from the closed form.
    const Eigen::MatrixXd tail_z = U.transpose() * norm.xs.rightCols(n - n_half);
    const Eigen::VectorXd tail_y = norm.ys.tail(n - n_half);
    const Eigen::Index nc = static_cast<Eigen::Index>(cands.size());
    Eigen::VectorXd b(nc);
    Eigen::MatrixXd C(U.cols(), nc);
    for (Eigen::Index i = 0; i < nc; ++i) C.col(i) = cands[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd proj = C.transpose() * tail_z;  // nc x n_tail
    for (Eigen::Index i = 0; i < nc; ++i) {
        b[i] = (proj.row(i).array().max(0.0) * tail_y.transpose().array()).mean();
    }
    Eigen::MatrixXd G(nc, nc);
    for (Eigen::Index i = 0; i < nc; ++i) {
        for (Eigen::Index j = i; j < nc; ++j) {
            G(i, j) = G(j, i) = relu_kernel(C.col(i).dot(C.col(j)));
        }
    }
    const Eigen::VectorXd a = detail::nonneg_quadratic_min(G, b, 0.0, opts.pgd_iters);

    const double floor = opts.coeff_floor > 0.0 ? opts.coeff_floor : 1e-6;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < nc; ++i) {
        if (a[i] > floor) keep.push_back(i);
    }
    NetFitResult out;
    out.dirs.resize(samples.dim(), static_cast<Eigen::Index>(keep.size()));
    out.coeffs.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.dirs.col(static_cast<Eigen::Index>(i)) = U * C.col(keep[i]);
        out.coeffs[static_cast<Eigen::Index>(i)] = a[keep[i]] * scale;
    }
    out.scale = scale;
    out.note = "candidates=" + std::to_string(cands.size());
    return out;
}

// GLM learner: identical pipeline with the activation's own even-degree
// coefficient (the applicability gate), covers at eps/(4L), and a fit with
// non-negative coefficients summing to at most 1; Gram entries by
// Monte-Carlo.
inline NetFitResult glm_learn(const SampleSet& samples, int k, int d, double eps,
                              const std::function<double(double)>& activation,
                              const std::string& activation_name, double L,
                              NetLearnOptions opts = {}) {
    opts.d = d;
    const double c2d = activation_hermite_coeff(activation, 2 * d);
    if (std::abs(c2d) < 1e-9) {
        throw estimator_gate_error("activation '" + activation_name +
                                   "' has vanishing even Hermite coefficient at degree " +
                                   std::to_string(2 * d) +
                                   "; the even-degree moment gate fails (odd activations are "
                                   "unidentifiable from these moments)");
    }
    const double c2 = activation_hermite_coeff(activation, 2);
    if (std::abs(c2) < 1e-9) {
        throw estimator_gate_error("activation '" + activation_name +
                                   "' has vanishing degree-2 coefficient; order-2 dimension "
                                   "reduction is unavailable");
    }
    const Eigen::Index n = samples.count();
    const Eigen::Index n_half = n / 2;
    SampleSet head;
    head.xs = samples.xs.leftCols(n_half);
    head.ys = samples.ys.head(n_half);

    double d2 = 0.0;
    const SymTensor T2 = glm_moment_tensor(head, 1, c2, opts.threads, &d2);
    Eigen::MatrixXd U = dimension_reduce(T2, std::max(0.15, eps / (4.0 * k)), d2);
    if (U.cols() == 0) {
        U = Eigen::MatrixXd::Zero(samples.dim(), 1);
        U(0, 0) = 1.0;
    }
    if (U.cols() > k) U = U.rightCols(k);

    SampleSet zs;
    zs.xs = U.transpose() * head.xs;
    zs.ys = head.ys;
    double dt = 0.0;
    const SymTensor T = glm_moment_tensor(zs, d, c2d, opts.threads, &dt);
    ParameterCoverOptions pco;
    pco.weight_floor = std::max(0.02, eps / (8.0 * k));
    pco.cover = opts.cover;
    const Cover cov = parameter_cover(T, 1.1, std::min(opts.cover_eps, eps / (4.0 * L)), dt, k, pco);
    auto cands = detail::unit_candidates(cov, opts.dir_thin);
    if (cands.empty()) cands.push_back(Eigen::VectorXd::Unit(U.cols(), 0));

    const Eigen::Index nc = static_cast<Eigen::Index>(cands.size());
    Eigen::MatrixXd C(U.cols(), nc);
    for (Eigen::Index i = 0; i < nc; ++i) C.col(i) = cands[static_cast<std::size_t>(i)];

    // Cross moments from held-out samples; Gram by Monte-Carlo.
    const Eigen::MatrixXd tail_z = U.transpose() * samples.xs.rightCols(n - n_half);
    const Eigen::VectorXd tail_y = samples.ys.tail(n - n_half);
    const Eigen::MatrixXd proj = C.transpose() * tail_z;
    Eigen::VectorXd b(nc);
    for (Eigen::Index i = 0; i < nc; ++i) {
        double s = 0.0;
        for (Eigen::Index t = 0; t < proj.cols(); ++t) s += activation(proj(i, t)) * tail_y[t];
        b[i] = s / static_cast<double>(proj.cols());
    }
    RandomStream rs(derive_seed(samples.seed, 0x6C47ULL));
    Eigen::MatrixXd Zmc(U.cols(), static_cast<Eigen::Index>(opts.mc_gram));
    for (Eigen::Index t = 0; t < Zmc.cols(); ++t) {
        for (Eigen::Index v = 0; v < Zmc.rows(); ++v) Zmc(v, t) = rs.normal();
    }
    Eigen::MatrixXd A = C.transpose() * Zmc;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index t = 0; t < A.cols(); ++t) A(i, t) = activation(A(i, t));
    }
    Eigen::MatrixXd G = (A * A.transpose()) / static_cast<double>(Zmc.cols());
    G.diagonal().array() += 1e-10;

    const Eigen::VectorXd a = detail::nonneg_quadratic_min(G, b, 1.0, opts.pgd_iters);
    const double floor = opts.coeff_floor > 0.0 ? opts.coeff_floor : 1e-6;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < nc; ++i) {
        if (a[i] > floor) keep.push_back(i);
    }
    NetFitResult out;
    out.dirs.resize(samples.dim(), static_cast<Eigen::Index>(keep.size()));
    out.coeffs.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.dirs.col(static_cast<Eigen::Index>(i)) = U * C.col(keep[i]);
        out.coeffs[static_cast<Eigen::Index>(i)] = a[keep[i]];
    }
    out.note = "candidates=" + std::to_string(cands.size()) + " c2d=" + std::to_string(c2d);
    return out;
}

}  // namespace varcover
