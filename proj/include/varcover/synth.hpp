#pragma once

// Seeded generators for the four latent-variable models, assignment-matched
// parameter error metrics, and a Monte-Carlo total-variation oracle.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "varcover/estimators.hpp"
#include "varcover/rng.hpp"

namespace varcover {

struct GmmParams {
    Eigen::MatrixXd means;    // one column per component
    Eigen::VectorXd weights;
};

struct ReluNetParams {
    Eigen::MatrixXd dirs;     // unit columns
    Eigen::VectorXd coeffs;   // non-negative
    double noise_sigma = 0.0;
};

struct GlmParams {
    std::string activation;   // "relu" | "abs" | "identity"
    Eigen::MatrixXd dirs;
    Eigen::VectorXd coeffs;
    double noise_sigma = 0.0;
};

struct MlrParams {
    Eigen::MatrixXd betas;    // one column per component
    Eigen::VectorXd weights;
    double sigma = 0.0;
};

struct HyperplaneMixParams {
    Eigen::MatrixXd normals;  // unit columns, identifiable up to sign
    Eigen::VectorXd weights;
};

using ModelParams = std::variant<GmmParams, ReluNetParams, GlmParams, MlrParams, HyperplaneMixParams>;

struct GenSpec {
    ModelParams params;
    Eigen::Index n = 0;
    std::uint64_t seed = 0;
};

inline std::function<double(double)> activation_by_name(const std::string& name) {
    if (name == "relu") return [](double t) { return t > 0.0 ? t : 0.0; };
    if (name == "abs") return [](double t) { return std::abs(t); };
    if (name == "identity") return [](double t) { return t; };
    throw std::invalid_argument("unknown activation: " + name);
}

namespace detail {

inline std::vector<int> assign_components(const Eigen::VectorXd& weights, Eigen::Index n,
                                          std::uint64_t seed) {
    RandomStream rs(derive_seed(seed, 0xA551671ULL));
    std::vector<int> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = rs.uniform01();
        double acc = 0.0;
        int pick = static_cast<int>(weights.size()) - 1;
        for (int j = 0; j < weights.size(); ++j) {
            acc += weights[j];
            if (u <= acc) {
                pick = j;
                break;
            }
        }
        out[static_cast<std::size_t>(i)] = pick;
    }
    return out;
}

}  // namespace detail

// i.i.d. draws per the model; deterministic per seed with one stream per
// component so generation is order-independent across components.
inline SampleSet sample(const GenSpec& spec) {
    SampleSet out;
    out.seed = spec.seed;

    const auto gen_mixture = [&](const Eigen::MatrixXd& centers, const Eigen::VectorXd& weights,
                                 const std::function<Eigen::VectorXd(int, RandomStream&)>& draw,
                                 const std::function<double(int, const Eigen::VectorXd&, RandomStream&)>* respond) {
        const int m = static_cast<int>(centers.rows());
        const auto comp = detail::assign_components(weights, spec.n, spec.seed);
        std::vector<RandomStream> streams;
        for (int j = 0; j < weights.size(); ++j) {
            streams.emplace_back(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(j)));
        }
        out.xs.resize(m, spec.n);
        if (respond) out.ys.resize(spec.n);
        for (Eigen::Index i = 0; i < spec.n; ++i) {
            const int j = comp[static_cast<std::size_t>(i)];
            auto& rs = streams[static_cast<std::size_t>(j)];
            const Eigen::VectorXd x = draw(j, rs);
            out.xs.col(i) = x;
            if (respond) out.ys[i] = (*respond)(j, x, rs);
        }
    };

    if (const auto* g = std::get_if<GmmParams>(&spec.params)) {
        gen_mixture(
            g->means, g->weights,
            [&](int j, RandomStream& rs) {
                Eigen::VectorXd x(g->means.rows());
                for (Eigen::Index v = 0; v < x.size(); ++v) x[v] = rs.normal();
                return Eigen::VectorXd(g->means.col(j) + x);
            },
            nullptr);
        return out;
    }
    if (const auto* h = std::get_if<HyperplaneMixParams>(&spec.params)) {
        gen_mixture(
            h->normals, h->weights,
            [&](int j, RandomStream& rs) {
                Eigen::VectorXd z(h->normals.rows());
                for (Eigen::Index v = 0; v < z.size(); ++v) z[v] = rs.normal();
                const Eigen::VectorXd vj = h->normals.col(j);
                return Eigen::VectorXd(z - (vj.dot(z)) * vj);
            },
            nullptr);
        return out;
    }
    if (const auto* r = std::get_if<MlrParams>(&spec.params)) {
        const std::function<double(int, const Eigen::VectorXd&, RandomStream&)> respond =
            [&](int j, const Eigen::VectorXd& x, RandomStream& rs) {
                return r->betas.col(j).dot(x) + r->sigma * rs.normal();
            };
        gen_mixture(
            r->betas, r->weights,
            [&](int /*j*/, RandomStream& rs) {
                Eigen::VectorXd x(r->betas.rows());
                for (Eigen::Index v = 0; v < x.size(); ++v) x[v] = rs.normal();
                return x;
            },
            &respond);
        return out;
    }
    const auto build_net = [&](const Eigen::MatrixXd& dirs, const Eigen::VectorXd& coeffs,
                               double sigma, const std::function<double(double)>& act) {
        RandomStream rs(derive_seed(spec.seed, 1000));
        const int m = static_cast<int>(dirs.rows());
        out.xs.resize(m, spec.n);
        out.ys.resize(spec.n);
        for (Eigen::Index i = 0; i < spec.n; ++i) {
            Eigen::VectorXd x(m);
            for (int v = 0; v < m; ++v) x[v] = rs.normal();
            double y = 0.0;
            for (Eigen::Index j = 0; j < coeffs.size(); ++j) y += coeffs[j] * act(dirs.col(j).dot(x));
            out.xs.col(i) = x;
            out.ys[i] = y + sigma * rs.normal();
        }
    };
    if (const auto* rn = std::get_if<ReluNetParams>(&spec.params)) {
        build_net(rn->dirs, rn->coeffs, rn->noise_sigma, activation_by_name("relu"));
        return out;
    }
    const auto& gl = std::get<GlmParams>(spec.params);
    build_net(gl.dirs, gl.coeffs, gl.noise_sigma, activation_by_name(gl.activation));
    return out;
}

// ---------------------------------------------------------------------------
// Assignment matching.

// Hungarian method: minimum-cost perfect matching on a square cost matrix;
// returns the column matched to each row.
inline std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // match[col] = row
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, INF);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = match[static_cast<std::size_t>(j0)];
            double delta = INF;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)]) - 1] = j - 1;
    return row_to_col;
}

struct MatchError {
    double param_error = 0.0;   // max matched component distance
    double weight_error = 0.0;  // max matched weight difference
};

namespace detail {

struct ComponentView {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd weights;  // may be coefficients; empty if none
};

inline ComponentView component_view(const ModelParams& p) {
    ComponentView v;
    if (const auto* g = std::get_if<GmmParams>(&p)) {
        v.vectors = g->means;
        v.weights = g->weights;
    } else if (const auto* r = std::get_if<ReluNetParams>(&p)) {
        v.vectors = r->dirs;
        v.weights = r->coeffs;
    } else if (const auto* gl = std::get_if<GlmParams>(&p)) {
        v.vectors = gl->dirs;
        v.weights = gl->coeffs;
    } else if (const auto* ml = std::get_if<MlrParams>(&p)) {
        v.vectors = ml->betas;
        v.weights = ml->weights;
    } else {
        const auto& h = std::get<HyperplaneMixParams>(p);
        v.vectors = h.normals;
        v.weights = h.weights;
    }
    return v;
}

}  // namespace detail

// Optimal-assignment parameter error; with up_to_sign the per-pair distance
// is minimized over the sign orbit {v, -v}.
inline MatchError match_error(const ModelParams& estimate, const ModelParams& truth,
                              bool up_to_sign = false) {
    const auto a = detail::component_view(estimate);
    const auto b = detail::component_view(truth);
    if (a.vectors.cols() != b.vectors.cols()) {
        throw std::invalid_argument("match_error: component count mismatch");
    }
    const int k = static_cast<int>(a.vectors.cols());
    Eigen::MatrixXd cost(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            double d = (a.vectors.col(i) - b.vectors.col(j)).norm();
            if (up_to_sign) d = std::min(d, (a.vectors.col(i) + b.vectors.col(j)).norm());
            cost(i, j) = d;
        }
    }
    const auto asg = hungarian(cost);
    MatchError e;
    for (int i = 0; i < k; ++i) {
        e.param_error = std::max(e.param_error, cost(i, asg[static_cast<std::size_t>(i)]));
        if (a.weights.size() == k && b.weights.size() == k) {
            e.weight_error = std::max(
                e.weight_error, std::abs(a.weights[i] - b.weights[asg[static_cast<std::size_t>(i)]]));
        }
    }
    return e;
}

// ---------------------------------------------------------------------------
// Total-variation oracle: 1/2 E_{x~q} |p(x)/q(x) - 1| with a jackknife
// standard error, for explicit densities p and q with q samplable.

struct TvEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
};

template <typename Sampler>
TvEstimate tv_estimate(const std::function<double(const Eigen::VectorXd&)>& log_p,
                       const std::function<double(const Eigen::VectorXd&)>& log_q,
                       Sampler&& sample_q, Eigen::Index n) {
    double s = 0.0, s2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = sample_q(i);
        const double v = 0.5 * std::abs(std::exp(log_p(x) - log_q(x)) - 1.0);
        s += v;
        s2 += v * v;
    }
    TvEstimate out;
    out.estimate = s / static_cast<double>(n);
    const double var = std::max(0.0, s2 / static_cast<double>(n) - out.estimate * out.estimate);
    // Jackknife of a sample mean reduces to the usual standard error.
    out.stderr_ = std::sqrt(var / static_cast<double>(n > 1 ? n - 1 : 1));
    return out;
}

// log density of N(mu, I) mixtures and of MLR joint (x, y) densities.
inline double log_gaussian_mixture_density(const Eigen::MatrixXd& means, const Eigen::VectorXd& logw,
                                           const Eigen::VectorXd& x) {
    const double c = -0.5 * static_cast<double>(x.size()) * std::log(2.0 * M_PI);
    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd terms(means.cols());
    for (Eigen::Index j = 0; j < means.cols(); ++j) {
        terms[j] = logw[j] - 0.5 * (x - means.col(j)).squaredNorm();
        best = std::max(best, terms[j]);
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < terms.size(); ++j) acc += std::exp(terms[j] - best);
    return c + best + std::log(acc);
}

// Density of the pair (x, y) under an MLR with given regressors and noise.
inline double log_mlr_density(const Eigen::MatrixXd& betas, const Eigen::VectorXd& logw, double sigma,
                              const Eigen::VectorXd& x, double y) {
    const double cx = -0.5 * static_cast<double>(x.size()) * std::log(2.0 * M_PI) - 0.5 * x.squaredNorm();
    const double cy = -0.5 * std::log(2.0 * M_PI) - std::log(sigma);
    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd terms(betas.cols());
    for (Eigen::Index j = 0; j < betas.cols(); ++j) {
        const double r = (y - betas.col(j).dot(x)) / sigma;
        terms[j] = logw[j] - 0.5 * r * r;
        best = std::max(best, terms[j]);
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < terms.size(); ++j) acc += std::exp(terms[j] - best);
    return cx + cy + best + std::log(acc);
}

}  // namespace varcover
