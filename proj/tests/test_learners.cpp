#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "support/oracles.hpp"
#include "varcover/learn_gmm.hpp"
#include "varcover/learn_hyperplane.hpp"
#include "varcover/learn_mlr.hpp"
#include "varcover/learn_relu.hpp"
#include "varcover/mixture_fit.hpp"
#include "varcover/synth.hpp"

using namespace varcover;

namespace {

TEST(FitMixtureWeights, CoreProperties) {
    // one candidate: weight vector (1)
    Eigen::MatrixXd L1(1, 100);
    L1.setConstant(-1.0);
    const auto r1 = fit_mixture_weights_core(L1, 0.1);
    ASSERT_EQ(r1.weights.size(), 1);
    EXPECT_NEAR(r1.weights[0], 1.0, 1e-12);

    // planted two-component problem
    RandomStream rs(5);
    const int n = 3;
    const Eigen::Index N = 20000;
    Eigen::VectorXd truth(n);
    truth << 0.65, 0.35, 0.0;  // third candidate is junk
    Eigen::MatrixXd means(1, n);
    means << -2.0, 2.0, 30.0;
    Eigen::MatrixXd L(n, N);
    for (Eigen::Index s = 0; s < N; ++s) {
        const double mu = rs.uniform01() < truth[0] ? -2.0 : 2.0;
        const double x = mu + rs.normal();
        for (int c = 0; c < n; ++c) {
            L(c, s) = -0.5 * (x - means(0, c)) * (x - means(0, c));
        }
    }
    const double eps = 0.06;
    const auto fit = fit_mixture_weights_core(L, eps);
    // floor respected
    for (int c = 0; c < n; ++c) EXPECT_GE(fit.weights[c], eps / n - 1e-12);
    // monotone objective trace
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
        EXPECT_GE(fit.objective_trace[i], fit.objective_trace[i - 1] - 1e-12);
    }
    // final objective at least the planted-weight value minus slack
    Eigen::VectorXd wt(n);
    wt << truth[0] - eps / n, truth[1] - eps / n, 0.0;
    wt[2] = 1.0 - wt[0] - wt[1];
    double planted_obj = 0.0;
    {
        Eigen::VectorXd logw = wt.array().max(1e-300).log().matrix();
        for (Eigen::Index s = 0; s < N; ++s) {
            Eigen::VectorXd t = L.col(s) + logw;
            const double mx = t.maxCoeff();
            planted_obj += mx + std::log((t.array() - mx).exp().sum());
        }
        planted_obj /= static_cast<double>(N);
    }
    EXPECT_GE(fit.objective, planted_obj - 1e-4);
    // weights close to the truth
    EXPECT_NEAR(fit.weights[0], truth[0], 0.03);
    EXPECT_NEAR(fit.weights[1], truth[1], 0.03);
}

TEST(GmmRoughCluster, SplitAndMergeExamples) {
    // two components at +-50 e1 in R^5 split into 2 clusters whose centers
    // sit within 3 sqrt(m) of the means (proof-constant linkage)
    GmmParams p;
    p.means = Eigen::MatrixXd::Zero(5, 2);
    p.means(0, 0) = 50.0;
    p.means(0, 1) = -50.0;
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    const SampleSet s = sample(GenSpec{p, 1200, 3});
    const auto clu = gmm_rough_cluster(s.xs, 0.05, 10.0, 4.0);
    ASSERT_EQ(clu.centers.cols(), 2);
    for (int c = 0; c < 2; ++c) {
        double best = 1e18;
        for (int j = 0; j < 2; ++j) best = std::min(best, (clu.centers.col(c) - p.means.col(j)).norm());
        EXPECT_LE(best, 3.0 * std::sqrt(5.0));
    }
    // classifier sends fresh samples to the right cluster
    const SampleSet fresh = sample(GenSpec{p, 500, 4});
    int assigned = 0;
    for (Eigen::Index i = 0; i < fresh.count(); ++i) {
        if (clu.classify(fresh.xs.col(i)) >= 0) ++assigned;
    }
    EXPECT_GE(assigned, 490);

    // one component: one cluster
    GmmParams one;
    one.means = Eigen::MatrixXd::Zero(5, 1);
    one.weights = Eigen::VectorXd::Ones(1);
    const SampleSet s1 = sample(GenSpec{one, 800, 5});
    EXPECT_EQ(gmm_rough_cluster(s1.xs, 0.05).centers.cols(), 1);

    // components 1 apart merge into a single cluster
    GmmParams near_p;
    near_p.means = Eigen::MatrixXd::Zero(5, 2);
    near_p.means(0, 1) = 1.0;
    near_p.weights = Eigen::VectorXd::Constant(2, 0.5);
    const SampleSet sn = sample(GenSpec{near_p, 800, 6});
    EXPECT_EQ(gmm_rough_cluster(sn.xs, 0.05).centers.cols(), 1);
}

TEST(GmmLearn, ParameterRecoverySeparated) {
    // k = 2 at +-20 e1 with uniform weights: means to 0.1, weights to 0.05.
    GmmParams p;
    p.means = Eigen::MatrixXd::Zero(6, 2);
    p.means(0, 0) = 20.0;
    p.means(0, 1) = -20.0;
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    const SampleSet s = sample(GenSpec{p, 60000, 7});
    GmmLearnOptions opts;
    const GmmParams est = gmm_parameter_estimate(s, 2, 0.5, 0.1, opts);
    const MatchError err = match_error(est, p);
    EXPECT_LE(err.param_error, 0.1);
    EXPECT_LE(err.weight_error, 0.05);
}

TEST(GmmLearn, SingleComponentIsSampleMean) {
    GmmParams p;
    p.means = Eigen::MatrixXd::Zero(4, 1);
    p.means(2, 0) = 1.5;
    p.weights = Eigen::VectorXd::Ones(1);
    const SampleSet s = sample(GenSpec{p, 30000, 8});
    const GmmParams est = gmm_parameter_estimate(s, 1, 1.0, 0.1);
    const MatchError err = match_error(est, p);
    EXPECT_LE(err.param_error, 3.0 * std::sqrt(4.0 / 30000.0) + 0.05);
}

TEST(GmmLearn, DensitySingleComponent) {
    GmmParams p;
    p.means = Eigen::MatrixXd::Zero(4, 1);
    p.weights = Eigen::VectorXd::Ones(1);
    const SampleSet s = sample(GenSpec{p, 120000, 9});
    const GmmDensityResult h = gmm_density_estimate(s, 1, 2, 0.1);

    const Eigen::VectorXd logw = h.weights.array().log().matrix();
    RandomStream rs(17);
    auto logp = [&](const Eigen::VectorXd& x) {
        return log_gaussian_mixture_density(h.candidate_means, logw, x);
    };
    auto logq = [&](const Eigen::VectorXd& x) {
        return -0.5 * x.squaredNorm() - 2.0 * std::log(2.0 * M_PI);
    };
    const TvEstimate tv = tv_estimate(
        logp, logq,
        [&](Eigen::Index) {
            Eigen::VectorXd x(4);
            for (int i = 0; i < 4; ++i) x[i] = rs.normal();
            return x;
        },
        200000);
    EXPECT_LE(tv.estimate, 0.05 + 3.0 * tv.stderr_);
}

TEST(ReluLearn, SingleDirection) {
    ReluNetParams p;
    p.dirs = Eigen::MatrixXd::Zero(4, 1);
    p.dirs(0, 0) = 1.0;
    p.coeffs = Eigen::VectorXd::Ones(1);
    p.noise_sigma = 0.1;
    const SampleSet s = sample(GenSpec{p, 300000, 11});
    const NetFitResult fit = relu_pac_learn(s, 1, 2, 0.1);
    ASSERT_GT(fit.dirs.cols(), 0);
    const double err2 = relu_l2_distance2(fit.dirs, fit.coeffs, p.dirs, p.coeffs);
    const double f2 = relu_l2_distance2(p.dirs, p.coeffs,
                                        Eigen::MatrixXd::Zero(4, 0), Eigen::VectorXd::Zero(0));
    EXPECT_LE(err2, 0.1 * 0.1 * (f2 + p.noise_sigma * p.noise_sigma));
}

TEST(ReluLearn, ZeroFunction) {
    ReluNetParams p;
    p.dirs = Eigen::MatrixXd::Identity(4, 1);
    p.coeffs = Eigen::VectorXd::Zero(1);
    p.noise_sigma = 0.05;
    const SampleSet s = sample(GenSpec{p, 60000, 13});
    const NetFitResult fit = relu_pac_learn(s, 1, 2, 0.1);
    const double h2 = relu_l2_distance2(fit.dirs, fit.coeffs,
                                        Eigen::MatrixXd::Zero(4, 0), Eigen::VectorXd::Zero(0));
    EXPECT_LE(std::sqrt(h2), 0.05);
}

TEST(GlmLearn, ParityGateAndAbs) {
    GlmParams p;
    p.activation = "identity";
    p.dirs = Eigen::MatrixXd::Identity(4, 1);
    p.coeffs = Eigen::VectorXd::Ones(1);
    const SampleSet s = sample(GenSpec{p, 5000, 14});
    EXPECT_THROW(
        glm_learn(s, 1, 1, 0.15, activation_by_name("identity"), "identity", 1.0),
        estimator_gate_error);

    GlmParams pa;
    pa.activation = "abs";
    pa.dirs = Eigen::MatrixXd::Zero(4, 1);
    pa.dirs(0, 0) = 1.0;
    pa.coeffs = Eigen::VectorXd::Ones(1);
    const SampleSet sa = sample(GenSpec{pa, 200000, 15});
    const NetFitResult fit = glm_learn(sa, 1, 1, 0.15, activation_by_name("abs"), "abs", 1.0);
    ASSERT_GT(fit.dirs.cols(), 0);
    // Monte-Carlo L2 oracle for the fitted combination vs truth
    RandomStream rs(19);
    double acc = 0.0;
    const Eigen::Index N = 200000;
    for (Eigen::Index t = 0; t < N; ++t) {
        Eigen::VectorXd x(4);
        for (int i = 0; i < 4; ++i) x[i] = rs.normal();
        double h = 0.0;
        for (Eigen::Index c = 0; c < fit.dirs.cols(); ++c) {
            h += fit.coeffs[c] * std::abs(fit.dirs.col(c).dot(x));
        }
        const double f = std::abs(x[0]);
        acc += (h - f) * (h - f);
    }
    const double rel = std::sqrt(acc / static_cast<double>(N)) /
                       std::sqrt(1.0);  // ||abs(x1)||_2 = 1
    EXPECT_LE(rel, 0.15);
}

TEST(MlrCluster, BasicsAndEvent) {
    // k = 1 with a single cover point: everything maps to that representative.
    SRCover cover;
    cover.points = {Eigen::VectorXd::Zero(3)};
    cover.points[0][0] = 2.0;
    cover.s_bound = 1;
    cover.r = 0.5;
    const MlrClustering clu = mlr_cluster(cover, 1, 0.1, 0.05);
    EXPECT_EQ(clu.reps.size(), 1u);
    Eigen::VectorXd x(3);
    x << 1.0, -1.0, 0.5;
    EXPECT_TRUE(clu.event(x));  // no pairs
    EXPECT_EQ(clu.classify(x, 5.0), 0);

    // well-separated planted pair with a tight cover: low misclassification
    // under the event, and the event keeps at least half the mass
    MlrParams p;
    p.betas = Eigen::MatrixXd::Zero(4, 2);
    p.betas(0, 0) = 3.0;
    p.betas(1, 1) = -3.0;
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    p.sigma = 0.01;
    const SampleSet s = sample(GenSpec{p, 20000, 21});

    SRCover tight;
    tight.points = {p.betas.col(0), p.betas.col(1)};
    for (auto& pt : tight.points) pt.array() += 0.01;  // off by the cover radius
    tight.s_bound = 2;
    tight.r = 0.02;
    MlrClusterOptions mco;
    mco.close_mult = 0.5;
    const MlrClustering c2 = mlr_cluster(tight, 2, p.sigma, 0.05, mco);
    ASSERT_EQ(c2.reps.size(), 2u);

    const auto comp_assign = [&](Eigen::Index i) {
        // true component: smaller residual against the planted betas
        const double r0 = std::abs(s.ys[i] - p.betas.col(0).dot(s.xs.col(i)));
        const double r1 = std::abs(s.ys[i] - p.betas.col(1).dot(s.xs.col(i)));
        return r0 < r1 ? 0 : 1;
    };
    Eigen::Index in_event = 0, wrong = 0;
    for (Eigen::Index i = 0; i < s.count(); ++i) {
        if (!c2.event(s.xs.col(i))) continue;
        ++in_event;
        const int truth = comp_assign(i);
        const int got = c2.classify(s.xs.col(i), s.ys[i]);
        const int want = c2.rep_near(p.betas.col(truth));
        if (got != want) ++wrong;
    }
    EXPECT_GE(in_event, s.count() / 2 - s.count() / 20);
    EXPECT_LE(static_cast<double>(wrong) / static_cast<double>(in_event), 0.02);
}

TEST(MlrRefine, PlantedSurviveDecoysRejected) {
    MlrParams p;
    p.betas = Eigen::MatrixXd::Zero(4, 2);
    p.betas(0, 0) = 2.0;
    p.betas(1, 1) = -1.5;
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    p.sigma = 0.05;
    const SampleSet s = sample(GenSpec{p, 4000, 23});

    SRCover cover;
    cover.r = 0.05;
    cover.s_bound = 52;
    cover.points.push_back(p.betas.col(0));
    cover.points.push_back(p.betas.col(1));
    auto g = vartest::rng(23);
    for (int i = 0; i < 50; ++i) {
        cover.points.push_back(p.betas.col(i % 2) + vartest::random_vector(g, 4).normalized() * 1.0);
    }
    const SRCover refined = mlr_refine_cover(cover, s, 2, 0.5, p.sigma);
    ASSERT_EQ(refined.points.size(), 2u);
    for (int c = 0; c < 2; ++c) {
        double best = 1e18;
        for (const auto& pt : refined.points) best = std::min(best, (pt - p.betas.col(c)).norm());
        EXPECT_LE(best, 2.0 * (cover.r + p.sigma));
    }

    // all hypotheses equal: a single representative padded to k
    SRCover ones;
    ones.points.assign(5, p.betas.col(0));
    ones.s_bound = 5;
    ones.r = 0.05;
    const SRCover ref1 = mlr_refine_cover(ones, s, 2, 0.5, p.sigma);
    EXPECT_EQ(ref1.points.size(), 2u);
    EXPECT_EQ(ref1.points[0], ref1.points[1]);

    // no good hypotheses: diagnostic
    SRCover junk;
    junk.points.assign(3, Eigen::VectorXd::Constant(4, 25.0));
    junk.s_bound = 3;
    junk.r = 0.05;
    EXPECT_THROW(mlr_refine_cover(junk, s, 2, 0.5, p.sigma), mlr_refine_error);
}

TEST(MlrIterate, RadiusHalvesAndFloor) {
    MlrParams p;
    p.betas = Eigen::MatrixXd::Zero(5, 2);
    p.betas(0, 0) = 2.0;
    p.betas(1, 1) = -2.0;
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    p.sigma = 0.01;
    const SampleSet s = sample(GenSpec{p, 60000, 29});

    SRCover cover;
    cover.points.assign(2, Eigen::VectorXd::Zero(5));
    cover.s_bound = 2;
    cover.r = 3.0;
    MlrIterateOptions opts;
    const SRCover next = mlr_iterate_cover(cover, s, 2, 0.5, p.sigma, opts);
    EXPECT_LE(next.r, cover.r / 2.0);
    // measured radius: every beta near some point at the reported radius
    for (int c = 0; c < 2; ++c) {
        double best = 1e18;
        for (const auto& pt : next.points) best = std::min(best, (pt - p.betas.col(c)).norm());
        EXPECT_LE(best, next.r);
    }

    // floor violation rejected
    SRCover low = cover;
    low.r = 0.5 * opts.floor_mult * p.sigma;
    EXPECT_THROW(mlr_iterate_cover(low, s, 2, 0.5, p.sigma, opts), mlr_floor_error);

    // zero-noise fixed point: an exact cover stays (numerically) exact
    MlrParams p0 = p;
    p0.sigma = 0.0;
    const SampleSet s0 = sample(GenSpec{p0, 60000, 31});
    SRCover c0;
    c0.points = {p0.betas.col(0), p0.betas.col(1)};
    c0.s_bound = 2;
    c0.r = 0.05;
    const SRCover n0 = mlr_iterate_cover(c0, s0, 2, 0.5, 0.0, opts);
    EXPECT_LE(n0.r, c0.r / 2.0);
    for (int c = 0; c < 2; ++c) {
        double best = 1e18;
        for (const auto& pt : n0.points) best = std::min(best, (pt - p0.betas.col(c)).norm());
        EXPECT_LE(best, n0.r);
    }

    // repeated halving terminates in about log2(R / floor) rounds
    const double floor = opts.floor_mult * p.sigma;
    int rounds = 0;
    SRCover it = cover;
    while (it.r > floor && rounds < 30) {
        try {
            it = mlr_iterate_cover(it, s, 2, 0.5, p.sigma, opts);
        } catch (const mlr_floor_error&) {
            break;
        }
        ++rounds;
    }
    EXPECT_LE(rounds, static_cast<int>(std::ceil(std::log2(cover.r / floor))) + 2);
}

TEST(MlrParams, NoiselessExactRecovery) {
    MlrParams p;
    p.betas = Eigen::MatrixXd::Zero(6, 2);
    p.betas(0, 0) = 3.0;
    p.betas(1, 1) = -2.0;
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    p.sigma = 0.0;
    const SampleSet s = sample(GenSpec{p, 80000, 37});
    const MlrParams est = mlr_parameter_estimate(s, 2, 0.5, 0.0, std::sqrt(13.0), 0.1, true);
    const MatchError err = match_error(est, p);
    EXPECT_LE(err.param_error, 1e-9);
}

TEST(MlrParams, NoisySingleComponentRate) {
    MlrParams p;
    p.betas = Eigen::MatrixXd::Zero(5, 1);
    p.betas(0, 0) = 1.0;
    p.betas(4, 0) = -0.5;
    p.weights = Eigen::VectorXd::Ones(1);
    p.sigma = 0.1;
    const SampleSet s = sample(GenSpec{p, 40000, 41});
    const MlrParams est = mlr_parameter_estimate(s, 1, 1.0, p.sigma, 10.0, 0.05, false);
    const MatchError err = match_error(est, p);
    EXPECT_LE(err.param_error, 3.0 * p.sigma * std::sqrt(5.0 / 16000.0) + 0.01);
}

TEST(MlrParams, GatesEnforced) {
    MlrParams p;
    p.betas = Eigen::MatrixXd::Zero(4, 2);
    p.betas(0, 0) = 1.0;
    p.betas(0, 1) = 0.9;
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    p.sigma = 0.05;
    const SampleSet s = sample(GenSpec{p, 2000, 43});
    // separation gate: Delta / sigma = 2 below the threshold
    EXPECT_THROW(mlr_parameter_estimate(s, 2, 0.5, p.sigma, 0.1, 0.05, false), mlr_gate_error);
    // noiseless flag must match sigma
    EXPECT_THROW(mlr_parameter_estimate(s, 2, 0.5, p.sigma, 5.0, 0.05, true),
                 std::invalid_argument);
}

TEST(Hyperplanes, SingleNormalExact) {
    HyperplaneMixParams p;
    p.normals = Eigen::MatrixXd::Zero(4, 1);
    p.normals(0, 0) = 1.0;
    p.weights = Eigen::VectorXd::Ones(1);
    const SampleSet s = sample(GenSpec{p, 30000, 47});
    const HyperplaneMixParams est = hyperplane_learn(s, 1, std::sqrt(2.0), 2);
    const MatchError err = match_error(est, p, true);
    EXPECT_LE(err.param_error, 1e-8);
}

TEST(Hyperplanes, TwoNormalsAndSignGate) {
    HyperplaneMixParams p;
    p.normals = Eigen::MatrixXd::Zero(5, 2);
    p.normals(0, 0) = 1.0;
    p.normals(0, 1) = 1.0 / std::sqrt(2.0);
    p.normals(1, 1) = 1.0 / std::sqrt(2.0);
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    double delta = 1e18;
    for (double sa : {-1.0, 1.0}) {
        for (double sb : {-1.0, 1.0}) {
            delta = std::min(delta, (sa * p.normals.col(0) - sb * p.normals.col(1)).norm());
        }
    }
    const SampleSet s = sample(GenSpec{p, 120000, 53});
    const HyperplaneMixParams est = hyperplane_learn(s, 2, delta, 2);
    const MatchError err = match_error(est, p, true);
    EXPECT_LE(err.param_error, 1e-6);

    // v2 = -v1: sign-invariant separation zero, rejected
    EXPECT_THROW(hyperplane_learn(s, 2, 0.0, 2), hyperplane_gate_error);
}

}  // namespace
