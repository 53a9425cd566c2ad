#pragma once

// Unbiased weighted moment-tensor estimators: Hermite products for spherical
// Gaussian mixtures, response-weighted Hermite features for ReLU networks and
// GLMs, conditional dual-basis moments for mixtures of linear regressions,
// and the alternating covariance identity for hyperplane mixtures. Entries
// are accumulated one orbit representative at a time in a fixed sample order,
// so results do not depend on the thread count.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varcover/hermite.hpp"
#include "varcover/parallel.hpp"
#include "varcover/sym_tensor.hpp"

namespace varcover {

struct SampleSet {
    Eigen::MatrixXd xs;                       // one column per sample
    Eigen::VectorXd ys;                       // empty when the model has no response
    std::uint64_t seed = 0;                   // seed that produced the samples
    std::vector<std::uint8_t> condition_mask; // empty = no conditioning event

    Eigen::Index count() const { return xs.cols(); }
    int dim() const { return static_cast<int>(xs.rows()); }
    bool has_response() const { return ys.size() == xs.cols(); }
};

// Thrown when a model-specific applicability gate fails (for example a
// vanishing even-degree activation coefficient).
struct estimator_gate_error : std::runtime_error {
    explicit estimator_gate_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// mean and an estimate of Var/N for a per-sample functional, in fixed order
inline void orbit_mean(const std::function<double(Eigen::Index)>& f, Eigen::Index n, double& mean,
                       double& var_of_mean) {
    double s = 0.0, s2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = f(i);
        s += v;
        s2 += v * v;
    }
    mean = s / static_cast<double>(n);
    const double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
    var_of_mean = (n > 1) ? var / static_cast<double>(n - 1) : 0.0;
}

inline double finish_delta_hat(const Eigen::VectorXd& var_of_mean, int m, int order) {
    const Eigen::VectorXd& mult = orbit_multiplicities(m, order);
    return std::sqrt((var_of_mean.array() * mult.array()).sum());
}

}  // namespace detail

// Entries of sum_i w_i mu_i^{tensor 2d} for a spherical Gaussian mixture:
// E[prod_j He_{a_j}(X_j)] = sum_i w_i mu_i^a, estimated by empirical means.
inline SymTensor gmm_moment_tensor(const SampleSet& samples, int d, int threads = 1,
                                   double* delta_hat = nullptr) {
    const int m = samples.dim();
    const int order = 2 * d;
    const auto& monos = monomials_of(m, order);
    SymTensor T(m, order);
    Eigen::VectorXd vom = Eigen::VectorXd::Zero(T.vals.size());
    const Eigen::Index n = samples.count();
    parallel_for(monos.size(), threads, [&](std::size_t oi) {
        const MultiIndex& a = monos[oi];
        double mean, v;
        detail::orbit_mean(
            [&](Eigen::Index s) {
                double prod = 1.0;
                for (int j = 0; j < m; ++j) {
                    const int e = a[static_cast<std::size_t>(j)];
                    if (e > 0) prod *= hermite_he(e, samples.xs(j, s));
                }
                return prod;
            },
            n, mean, v);
        T.vals[static_cast<Eigen::Index>(oi)] = mean;
        vom[static_cast<Eigen::Index>(oi)] = v;
    });
    if (delta_hat) *delta_hat = detail::finish_delta_hat(vom, m, order);
    return T;
}

// Entries of sum_i a_i w_i^{tensor 2d} for y = sum_i a_i sigma(w_i . x) + noise:
// sqrt(a!/(2d)!) / c_{2d} times the empirical mean of y h_a(x).
inline SymTensor response_moment_tensor(const SampleSet& samples, int d, double c_2d,
                                        int threads = 1, double* delta_hat = nullptr) {
    if (!samples.has_response()) {
        throw std::invalid_argument("response_moment_tensor: samples carry no responses");
    }
    if (std::abs(c_2d) < 1e-9) {
        throw estimator_gate_error(
            "activation coefficient c_{2d} vanishes at degree " + std::to_string(2 * d) +
            "; even-degree moment gate failed (odd activations are unidentifiable)");
    }
    const int m = samples.dim();
    const int order = 2 * d;
    const auto& monos = monomials_of(m, order);
    SymTensor T(m, order);
    Eigen::VectorXd vom = Eigen::VectorXd::Zero(T.vals.size());
    const Eigen::Index n = samples.count();
    const double logfact_2d = log_factorial(order);
    parallel_for(monos.size(), threads, [&](std::size_t oi) {
        const MultiIndex& a = monos[oi];
        const double scale = std::exp(0.5 * (mi_log_factorial(a) - logfact_2d)) / c_2d;
        double mean, v;
        detail::orbit_mean(
            [&](Eigen::Index s) {
                double prod = samples.ys[s];
                for (int j = 0; j < m; ++j) {
                    const int e = a[static_cast<std::size_t>(j)];
                    if (e > 0) prod *= hermite_h(e, samples.xs(j, s));
                }
                return prod;
            },
            n, mean, v);
        T.vals[static_cast<Eigen::Index>(oi)] = scale * mean;
        vom[static_cast<Eigen::Index>(oi)] = scale * scale * v;
    });
    if (delta_hat) *delta_hat = detail::finish_delta_hat(vom, m, order);
    return T;
}

inline SymTensor relu_moment_tensor(const SampleSet& samples, int d, int threads = 1,
                                    double* delta_hat = nullptr) {
    return response_moment_tensor(samples, d, relu_hermite_coeff(2 * d), threads, delta_hat);
}

inline SymTensor glm_moment_tensor(const SampleSet& samples, int d, double c_2d, int threads = 1,
                                   double* delta_hat = nullptr) {
    return response_moment_tensor(samples, d, c_2d, threads, delta_hat);
}

// ---------------------------------------------------------------------------
// Conditional dual-basis machinery for mixtures of linear regressions.

struct mlr_conditioning_error : std::runtime_error {
    explicit mlr_conditioning_error(const std::string& what) : std::runtime_error(what) {}
};

// All multi-indices over `ell` variables of total degree <= max_deg, graded.
inline std::vector<MultiIndex> graded_monomials_upto(int ell, int max_deg) {
    std::vector<MultiIndex> out;
    for (int t = 0; t <= max_deg; ++t) {
        auto level = enumerate_monomials(ell, t);
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

// Dual polynomials on the conditioned coordinate block: p_a satisfies
// E[p_a(x) q(x) | E] = (x^a-coefficient of q) for every polynomial q of
// degree <= 2d on the block.
struct MlrDualBasis {
    int ell = 0;
    int two_d = 0;
    std::vector<MultiIndex> basis;      // |b| <= 2d, graded order
    Eigen::MatrixXd gram;               // conditional Hermite Gram with ridge
    Eigen::MatrixXd mono_in_h;          // row gamma: x^gamma over the h-basis
    Eigen::LDLT<Eigen::MatrixXd> gram_ldlt;
    double event_rate = 1.0;

    Eigen::Index index_of(const MultiIndex& a) const {
        std::size_t off = 0;
        const int t = mi_degree(a);
        for (int s = 0; s < t; ++s) off += static_cast<std::size_t>(monomial_count(ell, s));
        return static_cast<Eigen::Index>(off + monomial_rank(a));
    }

    // Hermite-basis coefficients of p_a.
    Eigen::VectorXd dual_coeffs(const MultiIndex& a) const {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
        e[index_of(a)] = 1.0;
        const Eigen::VectorXd v = mono_in_h.fullPivLu().solve(e);
        return gram_ldlt.solve(v);
    }

    double eval(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& x) const {
        std::vector<double> h(static_cast<std::size_t>(two_d) + 1);
        Eigen::MatrixXd table(static_cast<Eigen::Index>(two_d) + 1, ell);
        for (int j = 0; j < ell; ++j) {
            hermite_h_all(two_d, x[j], h.data());
            for (int e = 0; e <= two_d; ++e) table(e, j) = h[static_cast<std::size_t>(e)];
        }
        double s = 0.0;
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const double c = coeffs[static_cast<Eigen::Index>(i)];
            if (c == 0.0) continue;
            double prod = c;
            for (int j = 0; j < ell; ++j) {
                const int e = basis[i][static_cast<std::size_t>(j)];
                if (e > 0) prod *= table(e, j);
            }
            s += prod;
        }
        return s;
    }
};

// Builds the conditional Gram over the Hermite basis of the block from the
// samples flagged by condition_mask (an empty mask means no conditioning).
// Rejects event rates below 1/2 (minus a small allowance for binomial noise
// in the empirical rate) and numerically singular Grams.
inline MlrDualBasis build_mlr_dual_basis(const SampleSet& samples, int two_d,
                                         double ridge_scale = 1e-8,
                                         double rate_slack = 0.03) {
    MlrDualBasis D;
    D.ell = samples.dim();
    D.two_d = two_d;
    D.basis = graded_monomials_upto(D.ell, two_d);
    const Eigen::Index nb = static_cast<Eigen::Index>(D.basis.size());
    const Eigen::Index n = samples.count();

    Eigen::Index kept = 0;
    for (Eigen::Index s = 0; s < n; ++s) {
        const bool in = samples.condition_mask.empty() ||
                        samples.condition_mask[static_cast<std::size_t>(s)] != 0;
        if (in) ++kept;
    }
    D.event_rate = n > 0 ? static_cast<double>(kept) / static_cast<double>(n) : 0.0;
    if (!samples.condition_mask.empty() && D.event_rate < 0.5 - rate_slack) {
        throw mlr_conditioning_error("conditioning event rate " + std::to_string(D.event_rate) +
                                     " below 1/2");
    }
    if (kept == 0) throw mlr_conditioning_error("no samples pass the conditioning event");

    D.gram = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd feats(nb);
    Eigen::MatrixXd table(two_d + 1, D.ell);
    std::vector<double> h(static_cast<std::size_t>(two_d) + 1);
    for (Eigen::Index s = 0; s < n; ++s) {
        const bool in = samples.condition_mask.empty() ||
                        samples.condition_mask[static_cast<std::size_t>(s)] != 0;
        if (!in) continue;
        for (int j = 0; j < D.ell; ++j) {
            hermite_h_all(two_d, samples.xs(j, s), h.data());
            for (int e = 0; e <= two_d; ++e) table(e, j) = h[static_cast<std::size_t>(e)];
        }
        for (Eigen::Index i = 0; i < nb; ++i) {
            double prod = 1.0;
            for (int j = 0; j < D.ell; ++j) {
                const int e = D.basis[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (e > 0) prod *= table(e, j);
            }
            feats[i] = prod;
        }
        D.gram.selfadjointView<Eigen::Lower>().rankUpdate(feats, 1.0);
    }
    D.gram = D.gram.selfadjointView<Eigen::Lower>();
    D.gram /= static_cast<double>(kept);
    D.gram.diagonal().array() += ridge_scale * D.gram.trace() / static_cast<double>(nb);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D.gram, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 1e-12) {
        throw mlr_conditioning_error("conditional Gram matrix numerically singular (min eigenvalue " +
                                     std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
    D.gram_ldlt.compute(D.gram);

    // mono_in_h(row = gamma, col = beta): coefficient of h_beta in x^gamma.
    const Eigen::MatrixXd K1 = monomial_in_hermite(two_d);
    D.mono_in_h = Eigen::MatrixXd::Zero(nb, nb);
    for (Eigen::Index g = 0; g < nb; ++g) {
        for (Eigen::Index b = 0; b < nb; ++b) {
            double prod = 1.0;
            for (int j = 0; j < D.ell && prod != 0.0; ++j) {
                prod *= K1(D.basis[static_cast<std::size_t>(g)][static_cast<std::size_t>(j)],
                           D.basis[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)]);
            }
            D.mono_in_h(g, b) = prod;
        }
    }
    return D;
}

// Single dual vector for one multi-index (over the Hermite basis up to 2d).
inline Eigen::VectorXd mlr_dual_basis(const SampleSet& samples, const MultiIndex& alpha, int two_d,
                                      double ridge_scale = 1e-8) {
    const MlrDualBasis D = build_mlr_dual_basis(samples, two_d, ridge_scale);
    return D.dual_coeffs(alpha);
}

// Entries of sum_i w_i beta_i^{tensor 2d} over the block coordinates:
// a!/(2d)! times the conditional mean of y^{2d} p_a(x).
inline SymTensor mlr_moment_tensor(const SampleSet& samples, int d, const MlrDualBasis& duals,
                                   int threads = 1, double* delta_hat = nullptr) {
    if (!samples.has_response()) {
        throw std::invalid_argument("mlr_moment_tensor: samples carry no responses");
    }
    const int m = samples.dim();
    const int order = 2 * d;
    const auto& monos = monomials_of(m, order);
    SymTensor T(m, order);
    Eigen::VectorXd vom = Eigen::VectorXd::Zero(T.vals.size());

    std::vector<Eigen::Index> sel;
    for (Eigen::Index s = 0; s < samples.count(); ++s) {
        const bool in = samples.condition_mask.empty() ||
                        samples.condition_mask[static_cast<std::size_t>(s)] != 0;
        if (in) sel.push_back(s);
    }
    if (sel.empty()) throw mlr_conditioning_error("no samples pass the conditioning event");

    const double logfact_2d = log_factorial(order);
    parallel_for(monos.size(), threads, [&](std::size_t oi) {
        const MultiIndex& a = monos[oi];
        const Eigen::VectorXd b = duals.dual_coeffs(a);
        const double scale = std::exp(mi_log_factorial(a) - logfact_2d);
        double mean, v;
        detail::orbit_mean(
            [&](Eigen::Index i) {
                const Eigen::Index s = sel[static_cast<std::size_t>(i)];
                const double y = samples.ys[s];
                return std::pow(y, order) * duals.eval(b, samples.xs.col(s));
            },
            static_cast<Eigen::Index>(sel.size()), mean, v);
        T.vals[static_cast<Eigen::Index>(oi)] = scale * mean;
        vom[static_cast<Eigen::Index>(oi)] = scale * scale * v;
    });
    if (delta_hat) *delta_hat = detail::finish_delta_hat(vom, m, order);
    return T;
}

// ---------------------------------------------------------------------------
// Hyperplane mixtures.

// Empirical E[X^{tensor order}] as a symmetric tensor of orbit means.
inline SymTensor empirical_power_tensor(const SampleSet& samples, int order, int threads = 1,
                                        double* delta_hat = nullptr) {
    const int m = samples.dim();
    const auto& monos = monomials_of(m, order);
    SymTensor T(m, order);
    Eigen::VectorXd vom = Eigen::VectorXd::Zero(T.vals.size());
    const Eigen::Index n = samples.count();
    parallel_for(monos.size(), threads, [&](std::size_t oi) {
        const MultiIndex& a = monos[oi];
        double mean, v;
        detail::orbit_mean(
            [&](Eigen::Index s) {
                double prod = 1.0;
                for (int j = 0; j < m; ++j) {
                    const int e = a[static_cast<std::size_t>(j)];
                    for (int r = 0; r < e; ++r) prod *= samples.xs(j, s);
                }
                return prod;
            },
            n, mean, v);
        T.vals[static_cast<Eigen::Index>(oi)] = mean;
        vom[static_cast<Eigen::Index>(oi)] = v;
    });
    if (delta_hat) *delta_hat = detail::finish_delta_hat(vom, m, order);
    return T;
}

// sum_i w_i v_i^{tensor 2d} from samples of sum_i w_i N(0, I - v_i v_i^T) via
// the alternating identity
//   sum_i w_i v_i^{tensor 2d}
//     = sum_t (-1)^t C(d,t) / (2t-1)!! Sym(E[X^{tensor 2t}] x I^{tensor d-t}),
// implemented through the polynomial correspondence (Sym(A x I^s) is the
// tensor of q_A(x) ||x||^{2s}).
inline SymTensor hyperplane_moment_tensor(const SampleSet& samples, int d, int threads = 1,
                                          double* delta_hat = nullptr) {
    const int m = samples.dim();
    HomogeneousPoly norm2(m, 2);
    for (int i = 0; i < m; ++i) {
        MultiIndex a(static_cast<std::size_t>(m), 0);
        a[static_cast<std::size_t>(i)] = 2;
        norm2.coeffs[static_cast<Eigen::Index>(monomial_rank(a))] = 1.0;
    }
    HomogeneousPoly acc(m, 2 * d);
    double err2 = 0.0;
    for (int t = 0; t <= d; ++t) {
        double dh = 0.0;
        SymTensor Mt = (t == 0) ? SymTensor(m, 0) : empirical_power_tensor(samples, 2 * t, threads,
                                                                           delta_hat ? &dh : nullptr);
        const double coef = ((t % 2 == 0) ? 1.0 : -1.0) *
                            static_cast<double>(binomial(d, t)) / double_factorial_odd(t);
        HomogeneousPoly term;
        if (t == 0) {
            term = HomogeneousPoly(m, 0);
            term.coeffs[0] = 1.0;
        } else {
            term = poly_of(Mt);
        }
        for (int s = 0; s < d - t; ++s) term = multiply(term, norm2);
        acc.coeffs += coef * term.coeffs;
        err2 += coef * coef * dh * dh;
    }
    if (delta_hat) *delta_hat = std::sqrt(err2);
    return tensor_of(acc);
}

// ---------------------------------------------------------------------------
// Majority-vote boosting over repeated estimates: returns the first tensor
// within 2 delta/3 of at least half of the others.
inline SymTensor boosted_tensor_estimate(const std::function<SymTensor(int)>& estimate, int repeats,
                                         double delta) {
    if (repeats < 3 || repeats % 2 == 0) {
        throw std::invalid_argument("boosted_tensor_estimate: repeats must be odd and >= 3");
    }
    std::vector<SymTensor> ts;
    ts.reserve(static_cast<std::size_t>(repeats));
    for (int i = 0; i < repeats; ++i) ts.push_back(estimate(i));
    const int need = (repeats - 1) / 2;
    for (int i = 0; i < repeats; ++i) {
        int close = 0;
        for (int j = 0; j < repeats; ++j) {
            if (j == i) continue;
            if (tensor_dist(ts[static_cast<std::size_t>(i)], ts[static_cast<std::size_t>(j)]) <=
                2.0 * delta / 3.0) {
                ++close;
            }
        }
        if (close >= need) return ts[static_cast<std::size_t>(i)];
    }
    throw std::runtime_error("boosted_tensor_estimate: no estimate agrees with a majority");
}

// ---------------------------------------------------------------------------
// Advisory sample sizes from the variance bounds with all constants set to 1.

inline double suggested_samples_gmm(double R, int m, int d, double delta) {
    return std::pow(std::max(1.0, R) * m * d, d) / (delta * delta);
}
inline double suggested_samples_response(int d, double delta) {
    return std::pow(std::max(1, d), d) / (delta * delta);
}
inline double suggested_samples_mlr(double R, double sigma, int d, double delta) {
    return std::pow(std::max(1, d), d) * std::pow(R + sigma, 4 * d) / (delta * delta);
}
inline double suggested_samples_hyperplane(int m, int d, double delta) {
    return std::pow(static_cast<double>(m) * d, d) / (delta * delta);
}

}  // namespace varcover
