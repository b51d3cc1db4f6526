#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cxsim/baselines.hpp"
#include "cxsim/cx.hpp"
#include "cxsim/rng.hpp"

using namespace cxsim;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (double& v : m.data) v = rng.normal();
    return m;
}

Matrix cycle_rows(const Matrix& m, std::size_t shift) {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t c = 0; c < m.cols; ++c) out.at(i, c) = m.at((i + shift) % m.rows, c);
    return out;
}

// independent Gram construction: explicit triple loop, no shared helpers
std::vector<double> plain_gram(const Matrix& f) {
    std::vector<double> g(f.cols * f.cols, 0.0);
    for (std::size_t a = 0; a < f.cols; ++a)
        for (std::size_t b = 0; b < f.cols; ++b) {
            double sum = 0;
            for (std::size_t i = 0; i < f.rows; ++i) sum += f.at(i, a) * f.at(i, b);
            g[a * f.cols + b] = sum / (static_cast<double>(f.rows) * static_cast<double>(f.cols));
        }
    return g;
}

}  // namespace

TEST_CASE("pixel l1 loss") {
    REQUIRE(l1_loss({0.2, 0.7, 0.4}, {0.2, 0.7, 0.4}) == 0.0);
    REQUIRE(l1_loss({1.0, 2.0}, {0.0, 0.0}) == 3.0);
    const std::vector<double> a = {0.1, 0.9, 0.5};
    const std::vector<double> b = {0.4, 0.2, 0.8};
    REQUIRE(l1_loss(a, b) == l1_loss(b, a));
    REQUIRE_THROWS_AS(l1_loss({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("pixel l2 loss") {
    REQUIRE(l2_loss({3.0, 4.0}, {0.0, 0.0}) == 5.0);
    REQUIRE(l2_loss({1.0, 1.0}, {1.0, 1.0}) == 0.0);
    Rng rng(88);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> u(6), v(6), w(6);
        for (std::size_t i = 0; i < 6; ++i) {
            u[i] = rng.normal();
            v[i] = rng.normal();
            w[i] = rng.normal();
        }
        REQUIRE(l2_loss(u, w) <= l2_loss(u, v) + l2_loss(v, w) + 1e-12);
    }
}

TEST_CASE("feature l1 loss") {
    const Matrix x = random_matrix(5, 3, 21);
    REQUIRE(feature_l1_loss(x, x) == 0.0);

    Matrix a(2, 2, 0.0), b(2, 2, 0.0);
    b.at(1, 1) = 0.5;
    REQUIRE(feature_l1_loss(a, b) == 0.5);

    // aligned, not permutation-invariant
    const Matrix y = cycle_rows(x, 2);
    REQUIRE(feature_l1_loss(x, y) > 0.01);

    REQUIRE_THROWS_WITH(feature_l1_loss(Matrix(2, 3, 0.0), Matrix(3, 3, 0.0)),
                        Catch::Matchers::ContainsSubstring("2") &&
                            Catch::Matchers::ContainsSubstring("3"));
}

TEST_CASE("gram matrix") {
    const Matrix f = random_matrix(6, 4, 31);
    const GramMatrix g = gram_matrix(f);
    REQUIRE(g.dim == 4);
    const std::vector<double> oracle = plain_gram(f);
    for (std::size_t k = 0; k < oracle.size(); ++k)
        REQUIRE(g.data.data[k] == Catch::Approx(oracle[k]).margin(1e-12));
    // symmetry
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b)
            REQUIRE(std::abs(g.data.at(a, b) - g.data.at(b, a)) <= 1e-9);
    // positive semidefinite: random quadratic forms stay nonnegative
    Rng rng(32);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> v(4);
        for (double& e : v) e = rng.normal();
        double q = 0;
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b) q += v[a] * g.data.at(a, b) * v[b];
        REQUIRE(q >= -1e-9);
    }
}

TEST_CASE("gram loss") {
    const Matrix x = random_matrix(7, 3, 41);
    REQUIRE(gram_loss(x, x) == 0.0);

    SECTION("row permutations leave the gram untouched") {
        Matrix reversed(x.rows, x.cols);
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t c = 0; c < x.cols; ++c)
                reversed.at(i, c) = x.at(x.rows - 1 - i, c);
        REQUIRE(gram_loss(x, reversed) == 0.0);
        REQUIRE(gram_loss(x, cycle_rows(x, 3)) == 0.0);
    }

    SECTION("hand value for one feature each") {
        // x=(1,0): gram [[1,0],[0,0]]/2; y=(0,1): [[0,0],[0,1]]/2
        // squared Frobenius distance = 2 * (1/2)^2 = 0.5
        Matrix a(1, 2, 0.0), b(1, 2, 0.0);
        a.at(0, 0) = 1.0;
        b.at(0, 1) = 1.0;
        REQUIRE(gram_loss(a, b) == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("different feature counts allowed, dims must match") {
        const Matrix y = random_matrix(12, 3, 42);
        REQUIRE(gram_loss(x, y) >= 0.0);
        REQUIRE_THROWS_WITH(gram_loss(x, random_matrix(5, 4, 43)),
                            Catch::Matchers::ContainsSubstring("x has 3") &&
                                Catch::Matchers::ContainsSubstring("y has 4"));
    }
}

TEST_CASE("permutation sensitivity across measures") {
    const Matrix x = random_matrix(10, 4, 51);
    const Matrix y = cycle_rows(x, 4);
    // second-order statistics ignore feature order entirely
    REQUIRE(gram_loss(x, y) == 0.0);
    // cx treats sets, so a permutation drifts by rounding only
    const CxParams params;
    REQUIRE(std::abs(contextual_similarity(x, y, params) -
                     contextual_similarity(x, x, params)) <= 1e-12);
    // aligned l1 sees the difference
    REQUIRE(feature_l1_loss(x, y) > 0.01);
}
