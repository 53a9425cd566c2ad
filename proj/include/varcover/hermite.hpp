#pragma once

// Probabilist's Hermite polynomials He_n and their orthonormal scaling
// h_n = He_n / sqrt(n!), Gauss-Hermite quadrature for one-dimensional
// Gaussian integrals, and the monomial <-> Hermite change of basis.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "varcover/multi_index.hpp"

namespace varcover {

// He_{n+1}(t) = t He_n(t) - n He_{n-1}(t)
inline double hermite_he(int n, double t) {
    if (n == 0) return 1.0;
    double prev = 1.0, cur = t;
    for (int j = 1; j < n; ++j) {
        const double next = t * cur - static_cast<double>(j) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

// h_{n+1}(t) = (t h_n(t) - sqrt(n) h_{n-1}(t)) / sqrt(n+1)
inline double hermite_h(int n, double t) {
    if (n == 0) return 1.0;
    double prev = 1.0, cur = t;
    for (int j = 1; j < n; ++j) {
        const double next =
            (t * cur - std::sqrt(static_cast<double>(j)) * prev) / std::sqrt(static_cast<double>(j + 1));
        prev = cur;
        cur = next;
    }
    return cur;
}

// Fills out[0..nmax] with h_0(t), ..., h_nmax(t).
inline void hermite_h_all(int nmax, double t, double* out) {
    out[0] = 1.0;
    if (nmax == 0) return;
    out[1] = t;
    for (int j = 1; j < nmax; ++j) {
        out[j + 1] = (t * out[j] - std::sqrt(static_cast<double>(j)) * out[j - 1]) /
                     std::sqrt(static_cast<double>(j + 1));
    }
}

// Fixed-degree evaluation table for He_n and h_n; rejects n over the limit.
struct HermiteTable {
    int max_degree = 0;
    explicit HermiteTable(int max_degree_) : max_degree(max_degree_) {}
    double he(int n, double t) const {
        if (n < 0 || n > max_degree) throw std::out_of_range("HermiteTable: degree over limit");
        return hermite_he(n, t);
    }
    double h(int n, double t) const {
        if (n < 0 || n > max_degree) throw std::out_of_range("HermiteTable: degree over limit");
        return hermite_h(n, t);
    }
    // h_a(x) = prod_i h_{a_i}(x_i)
    double h_multi(const MultiIndex& a, const Eigen::VectorXd& x) const {
        double r = 1.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] > 0) r *= h(a[i], x[static_cast<Eigen::Index>(i)]);
        }
        return r;
    }
};

struct GaussHermiteRule {
    Eigen::VectorXd nodes;    // integrates against the standard normal density
    Eigen::VectorXd weights;  // weights sum to 1
};

// Golub-Welsch nodes/weights for E_{G ~ N(0,1)}[f(G)]; exact for polynomials
// of degree < 2n.
inline GaussHermiteRule gauss_hermite_rule(int n) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int i = 1; i < n; ++i) sub[i - 1] = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub);
    GaussHermiteRule rule;
    rule.nodes = es.eigenvalues();
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        const double v = es.eigenvectors()(0, i);
        rule.weights[i] = v * v;
    }
    return rule;
}

// Cached 200-node rule; the in-repo oracle for all 1-D Gaussian integrals.
inline const GaussHermiteRule& default_gauss_hermite() {
    static const GaussHermiteRule rule = gauss_hermite_rule(200);
    return rule;
}

inline double gaussian_expectation(const std::function<double(double)>& f) {
    const auto& rule = default_gauss_hermite();
    double s = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        s += rule.weights[i] * f(rule.nodes[i]);
    }
    return s;
}

struct GaussLegendreRule {
    Eigen::VectorXd nodes;    // on [-1, 1]
    Eigen::VectorXd weights;  // sum to 2
};

inline const GaussLegendreRule& default_gauss_legendre() {
    static const GaussLegendreRule rule = [] {
        const int n = 64;
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd sub(n - 1);
        for (int j = 1; j < n; ++j) {
            sub[j - 1] = static_cast<double>(j) / std::sqrt(4.0 * j * j - 1.0);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, sub);
        GaussLegendreRule r;
        r.nodes = es.eigenvalues();
        r.weights.resize(n);
        for (int i = 0; i < n; ++i) {
            const double v = es.eigenvectors()(0, i);
            r.weights[i] = 2.0 * v * v;
        }
        return r;
    }();
    return rule;
}

// E[f(G)] by composite Gauss-Legendre with a panel break at 0, accurate for
// integrands that are smooth away from a kink at the origin (ReLU, |t|).
inline double gaussian_expectation_split(const std::function<double(double)>& f) {
    const auto& gl = default_gauss_legendre();
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
    double s = 0.0;
    for (int panel = -12; panel < 12; ++panel) {
        const double a = static_cast<double>(panel);
        const double b = a + 1.0;
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (Eigen::Index i = 0; i < gl.nodes.size(); ++i) {
            const double t = mid + half * gl.nodes[i];
            s += half * gl.weights[i] * f(t) * std::exp(-0.5 * t * t) * inv_sqrt_2pi;
        }
    }
    return s;
}

// c_n = E[ReLU(G) h_n(G)], computed by quadrature.
inline double relu_hermite_coeff(int n) {
    return gaussian_expectation_split(
        [n](double t) { return (t > 0.0 ? t : 0.0) * hermite_h(n, t); });
}

// c_n = E[sigma(G) h_n(G)] for an arbitrary activation.
inline double activation_hermite_coeff(const std::function<double(double)>& activation, int n) {
    return gaussian_expectation_split([&](double t) { return activation(t) * hermite_h(n, t); });
}

// K1[n][j] = coefficient of h_j in t^n, from t h_j = sqrt(j+1) h_{j+1} + sqrt(j) h_{j-1}.
inline Eigen::MatrixXd monomial_in_hermite(int nmax) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nmax + 1, nmax + 1);
    K(0, 0) = 1.0;
    for (int n = 1; n <= nmax; ++n) {
        for (int j = 0; j <= n - 1; ++j) {
            const double c = K(n - 1, j);
            if (c == 0.0) continue;
            K(n, j + 1) += c * std::sqrt(static_cast<double>(j + 1));
            if (j > 0) K(n, j - 1) += c * std::sqrt(static_cast<double>(j));
        }
    }
    return K;
}

}  // namespace varcover
