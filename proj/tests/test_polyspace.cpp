#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "support/oracles.hpp"
#include "varcover/poly.hpp"
#include "varcover/subspace.hpp"
#include "varcover/sym_tensor.hpp"

using namespace varcover;

namespace {

HomogeneousPoly monomial(int m, const MultiIndex& a, double c = 1.0) {
    HomogeneousPoly p(m, mi_degree(a));
    p.coeffs[static_cast<Eigen::Index>(monomial_rank(a))] = c;
    return p;
}

TEST(MultiIndex, EnumerationOrderAndCounts) {
    const auto ms22 = enumerate_monomials(2, 2);
    ASSERT_EQ(ms22.size(), 3u);
    EXPECT_EQ(ms22[0], (MultiIndex{2, 0}));
    EXPECT_EQ(ms22[1], (MultiIndex{1, 1}));
    EXPECT_EQ(ms22[2], (MultiIndex{0, 2}));

    EXPECT_EQ(enumerate_monomials(3, 2).size(), 6u);  // binomial(4,2)
    const auto ms15 = enumerate_monomials(1, 5);
    ASSERT_EQ(ms15.size(), 1u);
    EXPECT_EQ(ms15[0], (MultiIndex{5}));

    // rank is the inverse of enumeration
    for (int m = 1; m <= 4; ++m) {
        for (int d = 0; d <= 4; ++d) {
            const auto ms = enumerate_monomials(m, d);
            for (std::size_t i = 0; i < ms.size(); ++i) {
                EXPECT_EQ(monomial_rank(ms[i]), i);
            }
        }
    }
}

TEST(InnerProduct, MonomialValues) {
    const auto p12 = monomial(2, {1, 1});
    EXPECT_NEAR(inner_product(p12, p12), 0.5, 1e-12);

    const auto p20 = monomial(2, {2, 0});
    const auto p02 = monomial(2, {0, 2});
    EXPECT_NEAR(inner_product(p20, p02), 0.0, 1e-12);
    EXPECT_NEAR(inner_product(p20, p20), 1.0, 1e-12);

    EXPECT_THROW(inner_product(p20, monomial(3, {2, 0, 0})), std::invalid_argument);
}

TEST(Evaluate, ExamplesAndBound) {
    const auto p = monomial(2, {1, 1});
    Eigen::VectorXd x(2);
    x << 2.0, 3.0;
    EXPECT_NEAR(evaluate(p, x), 6.0, 1e-12);

    const auto q = monomial(2, {2, 0});
    Eigen::VectorXd one(2);
    one << 1.0, 1.0;
    EXPECT_LE(std::abs(evaluate(q, one)), one.norm() * one.norm() * poly_norm(q) + 1e-12);

    HomogeneousPoly zero(2, 3);
    EXPECT_EQ(evaluate(zero, x), 0.0);

    auto g = vartest::rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 1 + static_cast<int>(g() % 4);
        const int d = 1 + static_cast<int>(g() % 4);
        const auto pr = vartest::random_poly(g, m, d);
        const auto xr = vartest::random_vector(g, m);
        EXPECT_LE(std::abs(evaluate(pr, xr)),
                  std::pow(xr.norm(), d) * poly_norm(pr) * (1.0 + 1e-9));
    }
}

TEST(Evaluate, LipschitzBound) {
    auto g = vartest::rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const int m = 1 + static_cast<int>(g() % 4);
        const int d = 1 + static_cast<int>(g() % 4);
        const auto p = vartest::random_poly(g, m, d);
        const auto x = vartest::random_vector(g, m);
        const auto y = vartest::random_vector(g, m);
        const double lhs = std::abs(evaluate(p, x) - evaluate(p, y));
        const double rhs = d * std::pow(std::max(x.norm(), y.norm()), d - 1) * (x - y).norm() *
                           poly_norm(p);
        EXPECT_LE(lhs, rhs * (1.0 + 1e-9));
    }
}

TEST(Restrict, SplitExamples) {
    // p = x1 * y1 over (x1; y1): restriction at x0 = 2 is 2 y1.
    const auto p = monomial(2, {1, 1});
    Eigen::VectorXd x0(1);
    x0 << 2.0;
    const auto parts = restrict_split(p, 1, x0);
    ASSERT_EQ(parts.size(), 3u);
    EXPECT_NEAR(parts[1].coeffs[0], 2.0, 1e-12);
    EXPECT_NEAR(parts[0].coeffs[0], 0.0, 1e-12);
    EXPECT_NEAR(parts[2].coeffs[0], 0.0, 1e-12);

    // p = x1^2: the degree-0 part is x0^2.
    const auto q = monomial(2, {2, 0});
    Eigen::VectorXd c(1);
    c << -1.5;
    const auto qparts = restrict_split(q, 1, c);
    EXPECT_NEAR(qparts[0].coeffs[0], 2.25, 1e-12);
}

TEST(Restrict, EvaluationConsistency) {
    auto g = vartest::rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 3 + static_cast<int>(g() % 2);
        const int d = 2 + static_cast<int>(g() % 2);
        const int mh = 1 + static_cast<int>(g() % (m - 1));
        const auto p = vartest::random_poly(g, m, d);
        const auto x0 = vartest::random_vector(g, mh);
        const auto parts = restrict_split(p, mh, x0);
        for (int rep = 0; rep < 5; ++rep) {
            const auto y = vartest::random_vector(g, m - mh);
            Eigen::VectorXd full(m);
            full.head(mh) = x0;
            full.tail(m - mh) = y;
            double sum = 0.0;
            for (const auto& part : parts) sum += evaluate(part, y);
            const double direct = evaluate(p, full);
            EXPECT_NEAR(sum, direct, 1e-10 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST(SymTensorOps, TensorPolyBijection) {
    const auto p = monomial(2, {1, 1});
    const SymTensor t = tensor_of(p);
    EXPECT_NEAR(t.entry({0, 1}), 0.5, 1e-12);
    EXPECT_NEAR(t.entry({1, 0}), 0.5, 1e-12);
    EXPECT_NEAR(tensor_norm(t), std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(tensor_norm(t), poly_norm(p), 1e-12);

    for (int d = 1; d <= 4; ++d) {
        MultiIndex a(3, 0);
        a[0] = d;
        const auto pd = monomial(3, a);
        const SymTensor td = tensor_of(pd);
        EXPECT_NEAR(tensor_norm(td), 1.0, 1e-12);
        std::vector<int> tuple(static_cast<std::size_t>(d), 0);
        EXPECT_NEAR(td.entry(tuple), 1.0, 1e-12);
    }

    auto g = vartest::rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 1 + static_cast<int>(g() % 4);
        const int d = 1 + static_cast<int>(g() % 4);
        const auto pr = vartest::random_poly(g, m, d);
        const auto back = poly_of(tensor_of(pr));
        EXPECT_LT((back.coeffs - pr.coeffs).lpNorm<Eigen::Infinity>(), 1e-12);
        EXPECT_NEAR(tensor_norm(tensor_of(pr)), poly_norm(pr), 1e-10 * poly_norm(pr));
    }
}

TEST(SymTensorOps, FrobeniusMatchesDenseExpansion) {
    auto g = vartest::rng(19);
    for (int m = 1; m <= 3; ++m) {
        for (int order = 1; order <= 4; ++order) {
            const auto p = vartest::random_poly(g, m, order);
            const SymTensor t = tensor_of(p);
            const auto dense = to_dense(t);
            double s = 0.0;
            for (double v : dense) s += v * v;
            EXPECT_NEAR(tensor_norm(t), std::sqrt(s), 1e-10 * (1.0 + std::sqrt(s)));
        }
    }
}

TEST(SquareTensor, ContractionMatchesSquare) {
    // d = 1, p = x1: tensor e1 x e1, contraction at v = 3 gives 9.
    const auto p1 = monomial(1, {1});
    const SymTensor s1 = square_tensor(p1);
    Eigen::VectorXd v(1);
    v << 3.0;
    EXPECT_NEAR(contract_power(s1, v), 9.0, 1e-12);

    HomogeneousPoly psum(2, 1);
    psum.coeffs << 1.0, 1.0;
    Eigen::VectorXd ones(2);
    ones << 1.0, 1.0;
    EXPECT_NEAR(contract_power(square_tensor(psum), ones), 4.0, 1e-12);

    auto g = vartest::rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int m = 1 + static_cast<int>(g() % 3);
        const int d = 1 + static_cast<int>(g() % 3);
        const auto pr = vartest::random_poly(g, m, d);
        const auto xr = vartest::random_vector(g, m);
        const double direct = evaluate(pr, xr);
        EXPECT_NEAR(contract_power(square_tensor(pr), xr), direct * direct,
                    1e-10 * std::max(1.0, direct * direct));
        // Cauchy-Schwarz: ||A_p|| <= ||p||^2
        EXPECT_LE(tensor_norm(square_tensor(pr)), poly_norm(pr) * poly_norm(pr) * (1.0 + 1e-9));
    }
}

TEST(Orthonormalize, RankAndIdempotence) {
    const auto a = monomial(2, {2, 0});
    auto b = a;
    b.coeffs *= 2.0;
    EXPECT_EQ(orthonormalize({a, b}).dim(), 1);

    const auto c = monomial(2, {0, 2});
    const auto V = orthonormalize({a, c});
    ASSERT_EQ(V.dim(), 2);
    EXPECT_NEAR(inner_product(V.basis[0], V.basis[1]), 0.0, 1e-12);

    // 50 random polynomials in a 10-dimensional space have rank at most 10.
    auto g = vartest::rng(29);
    std::vector<HomogeneousPoly> many;
    for (int i = 0; i < 50; ++i) many.push_back(vartest::random_poly(g, 4, 3));  // dim C(6,3)=20
    std::vector<HomogeneousPoly> constrained;
    // Confine them to a 10-dimensional span.
    std::vector<HomogeneousPoly> span10(many.begin(), many.begin() + 10);
    for (int i = 0; i < 50; ++i) {
        HomogeneousPoly mix(4, 3);
        std::normal_distribution<double> N(0.0, 1.0);
        for (const auto& s : span10) mix.coeffs += N(g) * s.coeffs;
        constrained.push_back(mix);
    }
    const auto Vbig = orthonormalize(constrained);
    EXPECT_LE(Vbig.dim(), 10);
    // rank oracle: dense factorization of the coefficient matrix
    Eigen::MatrixXd M(50, constrained[0].coeffs.size());
    for (int i = 0; i < 50; ++i) M.row(i) = onb_coords(constrained[static_cast<std::size_t>(i)]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()[i] > 1e-9 * svd.singularValues()[0]) ++rank;
    }
    EXPECT_EQ(Vbig.dim(), rank);

    // Idempotence up to sign.
    const auto Vre = orthonormalize(Vbig.basis);
    ASSERT_EQ(Vre.dim(), Vbig.dim());
    for (int i = 0; i < Vre.dim(); ++i) {
        const double ip = inner_product(Vre.basis[static_cast<std::size_t>(i)],
                                        Vbig.basis[static_cast<std::size_t>(i)]);
        EXPECT_NEAR(std::abs(ip), 1.0, 1e-10);
    }

    EXPECT_EQ(orthonormalize({}).dim(), 0);
}

TEST(RestrictSubspace, ExamplesAndCodimBound) {
    // V = span{x2} in R^2 (d=1), coords {0}: zero subspace.
    const auto x2 = monomial(2, {0, 1});
    const auto V = orthonormalize({x2});
    EXPECT_EQ(restrict_subspace_to_coords(V, {0}).dim(), 0);

    // Full space restricted to any coords stays full.
    const auto F = full_space(3, 2);
    const auto Fr = restrict_subspace_to_coords(F, {0, 2});
    EXPECT_EQ(Fr.codim(), 0);

    auto g = vartest::rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 3 + static_cast<int>(g() % 2);
        const int d = 2 + static_cast<int>(g() % 2);
        const int k = 1 + static_cast<int>(g() % 4);
        const auto Vr = vartest::random_subspace_codim(g, m, d, k);
        std::vector<int> coords;
        for (int i = 0; i < m - 1; ++i) coords.push_back(i);
        const auto W = restrict_subspace_to_coords(Vr, coords);
        EXPECT_LE(W.codim(), Vr.codim());
        // restricted polynomials still lie in V (as lifted polynomials)
        for (const auto& w : W.basis) {
            const auto lifted = lift_from_coords(w, m, coords);
            double proj2 = 0.0;
            for (const auto& b : Vr.basis) {
                const double ip = inner_product(lifted, b);
                proj2 += ip * ip;
            }
            EXPECT_NEAR(proj2, inner_product(lifted, lifted), 1e-8);
        }
    }
}

TEST(BilinearSlice, ExamplesAndCodim) {
    const int m = 4, d = 3, mh = 2;
    const auto F = full_space(m, d);
    const auto W = bilinear_slice(F, mh);
    EXPECT_EQ(W.dim(), bidegree_dim(m, mh, d));

    // x-only monomials have no bidegree-(1, d-1) part.
    std::vector<HomogeneousPoly> xonly;
    for (const auto& a : enumerate_monomials(m, d)) {
        if (a[2] == 0 && a[3] == 0) xonly.push_back(monomial(m, a));
    }
    EXPECT_EQ(bilinear_slice(orthonormalize(xonly), mh).dim(), 0);

    auto g = vartest::rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 1 + static_cast<int>(g() % 5);
        const auto V = vartest::random_subspace_codim(g, m, d, k);
        const auto Wk = bilinear_slice(V, mh);
        EXPECT_LE(bidegree_dim(m, mh, d) - Wk.dim(), k);
    }
}

TEST(Invariants, ProductInnerProductIdentity) {
    auto g = vartest::rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const int mx = 1 + static_cast<int>(g() % 2);
        const int my = 1 + static_cast<int>(g() % 2);
        const int d = 2 + static_cast<int>(g() % 3);  // total degree <= 4
        const int m = mx + my;
        // q's are degree 1 in the x-block, p's are degree d-1 in the y-block.
        auto lift_x = [&](const HomogeneousPoly& q) {
            std::vector<int> coords;
            for (int i = 0; i < mx; ++i) coords.push_back(i);
            return lift_from_coords(q, m, coords);
        };
        auto lift_y = [&](const HomogeneousPoly& p) {
            std::vector<int> coords;
            for (int i = 0; i < my; ++i) coords.push_back(mx + i);
            return lift_from_coords(p, m, coords);
        };
        const auto q1 = vartest::random_poly(g, mx, 1);
        const auto q2 = vartest::random_poly(g, mx, 1);
        const auto p1 = vartest::random_poly(g, my, d - 1);
        const auto p2 = vartest::random_poly(g, my, d - 1);
        const double lhs = inner_product(multiply(lift_x(q1), lift_y(p1)),
                                         multiply(lift_x(q2), lift_y(p2)));
        const double rhs = (1.0 / d) * inner_product(q1, q2) * inner_product(p1, p2);
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
    }
}

TEST(Invariants, RotationInvarianceOfNorm) {
    auto g = vartest::rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const int m = 2 + static_cast<int>(g() % 3);
        const int d = 1 + static_cast<int>(g() % 3);
        const auto p = vartest::random_poly(g, m, d);
        const auto Q = vartest::random_orthogonal(g, m);
        const auto rotated = compose_linear(p, Q);
        EXPECT_NEAR(poly_norm(rotated), poly_norm(p), 1e-9 * poly_norm(p));
        // spot check: evaluation agrees with composition
        const auto z = vartest::random_vector(g, m);
        EXPECT_NEAR(evaluate(rotated, z), evaluate(p, Q * z),
                    1e-9 * std::max(1.0, std::abs(evaluate(p, Q * z))));
    }
}

TEST(Subspace, ComplementAndFullSpace) {
    const auto F = full_space(3, 2);
    EXPECT_EQ(F.dim(), 6);
    EXPECT_EQ(complement(F).dim(), 0);
    for (int i = 0; i < F.dim(); ++i) {
        for (int j = 0; j < F.dim(); ++j) {
            EXPECT_NEAR(inner_product(F.basis[static_cast<std::size_t>(i)],
                                      F.basis[static_cast<std::size_t>(j)]),
                        i == j ? 1.0 : 0.0, 1e-10);
        }
    }
    auto g = vartest::rng(47);
    const auto V = vartest::random_subspace_codim(g, 3, 2, 2);
    EXPECT_EQ(V.codim(), 2);
    const auto C = complement(V);
    EXPECT_EQ(C.dim(), 2);
    for (const auto& c : C.basis) {
        for (const auto& v : V.basis) EXPECT_NEAR(inner_product(c, v), 0.0, 1e-9);
    }
}

}  // namespace
