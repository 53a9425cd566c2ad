#pragma once

// Maximum-likelihood mixing weights over a floored simplex by exponentiated
// gradient with backtracking, so the objective never decreases.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace varcover {

struct MixtureFitResult {
    Eigen::VectorXd weights;      // on the floored simplex, w_i >= eps/n
    double objective = 0.0;       // mean log-likelihood at the returned iterate
    int iterations = 0;
    std::vector<double> objective_trace;
};

namespace detail {

// Mean log-density of the mixture and the gradient wrt weights.
// logdens is n_candidates x n_samples.
inline double mixture_objective(const Eigen::MatrixXd& logdens, const Eigen::VectorXd& w,
                                Eigen::VectorXd* grad) {
    const Eigen::Index n = logdens.rows();
    const Eigen::Index N = logdens.cols();
    const Eigen::VectorXd logw = w.array().log().matrix();
    double obj = 0.0;
    if (grad) grad->setZero(n);
    for (Eigen::Index s = 0; s < N; ++s) {
        Eigen::VectorXd t = logdens.col(s) + logw;
        const double mx = t.maxCoeff();
        const Eigen::VectorXd e = (t.array() - mx).exp();
        const double z = e.sum();
        obj += mx + std::log(z);
        if (grad) {
            // d/dw_i log sum_j w_j p_j = p_i / sum = exp(logdens_i - logsum)
            const double logsum = mx + std::log(z);
            grad->noalias() += ((logdens.col(s).array() - logsum).exp()).matrix();
        }
    }
    obj /= static_cast<double>(N);
    if (grad) *grad /= static_cast<double>(N);
    return obj;
}

}  // namespace detail

// Maximizes the empirical mean log-density over {w : w_i >= eps/n, sum w = 1}
// until the relative objective change drops below rel_tol or max_iters.
inline MixtureFitResult fit_mixture_weights_core(const Eigen::MatrixXd& logdens, double eps,
                                                 double rel_tol = 1e-8, int max_iters = 10000) {
    const Eigen::Index n = logdens.rows();
    if (n == 0) throw std::invalid_argument("fit_mixture_weights: no candidates");
    const double floor = eps / static_cast<double>(n);
    if (!(floor >= 0.0) || floor * static_cast<double>(n) >= 1.0) {
        throw std::invalid_argument("fit_mixture_weights: need 0 <= eps < 1");
    }
    const double free_mass = 1.0 - floor * static_cast<double>(n);

    MixtureFitResult res;
    Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    Eigen::VectorXd w = (free_mass * u).array() + floor;

    Eigen::VectorXd grad(n);
    double obj = detail::mixture_objective(logdens, w, &grad);
    res.objective_trace.push_back(obj);
    double step = 1.0;
    int it = 0;
    for (; it < max_iters; ++it) {
        // gradient wrt u picks up the free-mass factor; shift for stability
        Eigen::VectorXd g = free_mass * grad;
        g.array() -= g.maxCoeff();
        bool accepted = false;
        for (int back = 0; back < 50; ++back) {
            Eigen::VectorXd u_try = (u.array() * (step * g.array()).exp()).matrix();
            u_try /= u_try.sum();
            Eigen::VectorXd w_try = (free_mass * u_try).array() + floor;
            Eigen::VectorXd grad_try(n);
            const double obj_try = detail::mixture_objective(logdens, w_try, &grad_try);
            if (obj_try >= obj - 1e-12) {
                const double rel = std::abs(obj_try - obj) / std::max(1.0, std::abs(obj_try));
                u = u_try;
                w = w_try;
                grad = grad_try;
                const bool converged = rel < rel_tol;
                obj = obj_try;
                res.objective_trace.push_back(obj);
                accepted = true;
                step *= 1.5;
                if (converged) it = max_iters;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no ascent step found at any scale
    }
    res.weights = w;
    res.objective = obj;
    res.iterations = static_cast<int>(res.objective_trace.size()) - 1;
    return res;
}

}  // namespace varcover
