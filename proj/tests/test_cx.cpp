#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "cxsim/cx.hpp"
#include "cxsim/features.hpp"
#include "cxsim/parallel.hpp"
#include "cxsim/rng.hpp"

using namespace cxsim;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
    return m;
}

// brute-force NN-hit fraction, written independently of the pipeline:
// single-accumulator distance loops, explicit argmin scan
double nn_hit_oracle(const Matrix& x, const Matrix& y, DistanceKind kind) {
    std::vector<bool> hit(y.rows, false);
    std::vector<double> mu(x.cols, 0.0);
    if (kind == DistanceKind::cosine_target_centered) {
        for (std::size_t j = 0; j < y.rows; ++j)
            for (std::size_t c = 0; c < y.cols; ++c) mu[c] += y.at(j, c);
        for (std::size_t c = 0; c < y.cols; ++c) mu[c] /= static_cast<double>(y.rows);
    }
    for (std::size_t i = 0; i < x.rows; ++i) {
        double best = 0;
        std::size_t arg = 0;
        for (std::size_t j = 0; j < y.rows; ++j) {
            double d = 0;
            if (kind == DistanceKind::squared_euclidean) {
                for (std::size_t c = 0; c < x.cols; ++c) {
                    const double e = x.at(i, c) - y.at(j, c);
                    d += e * e;
                }
            } else if (kind == DistanceKind::absolute) {
                for (std::size_t c = 0; c < x.cols; ++c) d += std::abs(x.at(i, c) - y.at(j, c));
            } else {
                double dot = 0, nx = 0, ny = 0;
                for (std::size_t c = 0; c < x.cols; ++c) {
                    const double a = x.at(i, c) - mu[c];
                    const double b = y.at(j, c) - mu[c];
                    dot += a * b;
                    nx += a * a;
                    ny += b * b;
                }
                const double denom =
                    std::max(std::sqrt(nx), 1e-12) * std::max(std::sqrt(ny), 1e-12);
                d = std::clamp(1.0 - dot / denom, 0.0, 2.0);
            }
            if (j == 0 || d < best) {
                best = d;
                arg = j;
            }
        }
        hit[arg] = true;
    }
    std::size_t count = 0;
    for (bool b : hit) count += b;
    return static_cast<double>(count) / static_cast<double>(y.rows);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (double& v : m.data) v = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("squared euclidean and absolute distances") {
    const Matrix x = from_rows({{0, 0}, {1, 1}});
    const Matrix y = from_rows({{0, 1}, {2, 2}});
    const Matrix sq = pairwise_distances(x, y, DistanceKind::squared_euclidean);
    REQUIRE(sq.at(0, 0) == 1.0);
    REQUIRE(sq.at(0, 1) == 8.0);
    REQUIRE(sq.at(1, 0) == 1.0);
    REQUIRE(sq.at(1, 1) == 2.0);

    const Matrix ab = pairwise_distances(x, y, DistanceKind::absolute);
    REQUIRE(ab.at(0, 0) == 1.0);
    REQUIRE(ab.at(0, 1) == 4.0);
    REQUIRE(ab.at(1, 0) == 1.0);
    REQUIRE(ab.at(1, 1) == 2.0);

    const Matrix single = pairwise_distances(from_rows({{0, 0}}), from_rows({{3, 4}}),
                                             DistanceKind::squared_euclidean);
    REQUIRE(single.at(0, 0) == 25.0);
}

TEST_CASE("cosine distance centers by the target mean") {
    // y has mean (1,1); centered targets are (1,0) and (-1,0)
    const Matrix y = from_rows({{2, 1}, {0, 1}});
    const Matrix x = from_rows({{4, 1}, {1, 4}});
    const Matrix d = pairwise_distances(x, y, DistanceKind::cosine_target_centered);
    REQUIRE(d.at(0, 0) == Catch::Approx(0.0).margin(1e-12));  // parallel after centering
    REQUIRE(d.at(0, 1) == Catch::Approx(2.0).margin(1e-12));  // antiparallel
    REQUIRE(d.at(1, 0) == Catch::Approx(1.0).margin(1e-12));  // orthogonal
    REQUIRE(d.at(1, 1) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("cosine guard handles zero-norm features") {
    const Matrix y = from_rows({{1, 0}, {-1, 0}});
    const Matrix x = from_rows({{0, 0}});  // equals the target mean
    const Matrix d = pairwise_distances(x, y, DistanceKind::cosine_target_centered);
    REQUIRE(d.at(0, 0) == 1.0);
    REQUIRE(d.at(0, 1) == 1.0);

    const Matrix same = from_rows({{3, 3}, {3, 3}});  // all targets equal the mean
    const Matrix d2 = pairwise_distances(from_rows({{1, 2}}), same,
                                         DistanceKind::cosine_target_centered);
    REQUIRE(d2.at(0, 0) == 1.0);
    REQUIRE(d2.at(0, 1) == 1.0);
}

TEST_CASE("distance validation") {
    REQUIRE_THROWS_WITH(pairwise_distances(Matrix(1, 3, 0.0), Matrix(1, 2, 0.0),
                                           DistanceKind::squared_euclidean),
                        Catch::Matchers::ContainsSubstring("x has 3") &&
                            Catch::Matchers::ContainsSubstring("y has 2"));
    REQUIRE_THROWS_AS(pairwise_distances(Matrix(0, 2), Matrix(1, 2), DistanceKind::absolute),
                      std::invalid_argument);
}

TEST_CASE("normalize distances") {
    SECTION("epsilon offsets a zero minimum") {
        const Matrix out = normalize_distances(from_rows({{0, 1}}), 1e-5);
        REQUIRE(out.at(0, 0) == 0.0);
        REQUIRE(out.at(0, 1) == Catch::Approx(1e5).epsilon(1e-12));
    }
    SECTION("epsilon zero divides by the row minimum") {
        const Matrix out = normalize_distances(from_rows({{2, 4}, {3, 3}}), 0.0);
        REQUIRE(out.at(0, 0) == 1.0);
        REQUIRE(out.at(0, 1) == 2.0);
        REQUIRE(out.at(1, 0) == 1.0);
        REQUIRE(out.at(1, 1) == 1.0);
    }
    SECTION("equal entries approach one") {
        const Matrix out = normalize_distances(from_rows({{7, 7, 7}}), 1e-9);
        for (std::size_t j = 0; j < 3; ++j) REQUIRE(out.at(0, j) == Catch::Approx(1.0).epsilon(1e-9));
    }
    SECTION("all-zero row with epsilon zero is degenerate") {
        REQUIRE_THROWS_WITH(normalize_distances(from_rows({{0, 0}}), 0.0),
                            Catch::Matchers::ContainsSubstring("degenerate row"));
    }
    SECTION("negative epsilon rejected") {
        REQUIRE_THROWS_AS(normalize_distances(from_rows({{1}}), -1.0), std::invalid_argument);
    }
}

TEST_CASE("similarities") {
    SECTION("unit normalized distance maps to one") {
        const Matrix out = similarities(from_rows({{1.0}}), 0.7);
        REQUIRE(out.at(0, 0) == 1.0);
    }
    SECTION("zero maps to exp(1/h)") {
        const Matrix out = similarities(from_rows({{0.0}}), 0.5);
        REQUIRE(out.at(0, 0) == Catch::Approx(std::exp(2.0)).epsilon(1e-15));
    }
    SECTION("huge values hit the floor") {
        const Matrix out = similarities(from_rows({{1e5}}), 0.5);
        REQUIRE(out.at(0, 0) == 1e-300);
    }
    SECTION("h must be positive") {
        REQUIRE_THROWS_WITH(similarities(from_rows({{1.0}}), 0.0),
                            Catch::Matchers::ContainsSubstring("h must be > 0"));
        REQUIRE_THROWS_AS(similarities(from_rows({{1.0}}), -0.5), std::invalid_argument);
    }
}

TEST_CASE("row normalize") {
    const Matrix out = row_normalize(from_rows({{1, 1, 2}}));
    REQUIRE(out.at(0, 0) == 0.25);
    REQUIRE(out.at(0, 1) == 0.25);
    REQUIRE(out.at(0, 2) == 0.5);

    // homogeneity, exact for a power-of-two scale
    const Matrix a = row_normalize(from_rows({{0.3, 0.9, 1.7}}));
    const Matrix b = row_normalize(from_rows({{0.6, 1.8, 3.4}}));
    REQUIRE(a.data == b.data);

    const Matrix single = row_normalize(from_rows({{42.0}}));
    REQUIRE(single.at(0, 0) == 1.0);
}

TEST_CASE("identity comparison scores one") {
    // well-separated directions so the diagonal dominates
    Matrix x(8, 2);
    for (std::size_t i = 0; i < 8; ++i) {
        const double angle = 6.283185307179586 * static_cast<double>(i) / 8.0 + 0.3;
        x.at(i, 0) = std::cos(angle) * (1.0 + 0.1 * static_cast<double>(i));
        x.at(i, 1) = std::sin(angle) * (1.0 + 0.1 * static_cast<double>(i));
    }
    for (DistanceKind kind :
         {DistanceKind::cosine_target_centered, DistanceKind::squared_euclidean}) {
        CxParams params;
        params.distance = kind;
        const auto [value, stages] = contextual_similarity_with_stages(x, x, params);
        REQUIRE(std::abs(value - 1.0) <= 1e-6);
        REQUIRE(contextual_loss(x, x, params) <= 2e-6);
        // per-target maxima sit on the diagonal
        for (std::size_t j = 0; j < 8; ++j) {
            for (std::size_t i = 0; i < 8; ++i)
                if (i != j) REQUIRE(stages.cx.at(j, j) > stages.cx.at(i, j));
        }
    }
}

TEST_CASE("equidistant sets score one over n") {
    SECTION("via distance matrices") {
        for (std::size_t n : {2u, 4u, 8u, 16u, 64u}) {
            const Matrix d(n, n, 3.7);
            const double value = cx_from_distances(d, CxParams{});
            REQUIRE(std::abs(value - 1.0 / static_cast<double>(n)) <= 1e-9);
        }
    }
    SECTION("via one-hot feature geometry") {
        const std::size_t n = 4;
        const Matrix x(n, n, 0.0);
        Matrix y(n, n, 0.0);
        for (std::size_t j = 0; j < n; ++j) y.at(j, j) = 2.5;
        CxParams params;
        params.distance = DistanceKind::squared_euclidean;
        const double value = contextual_similarity(x, y, params);
        REQUIRE(std::abs(value - 0.25) <= 1e-9);
        REQUIRE(contextual_loss(x, y, params) == Catch::Approx(std::log(4.0)).epsilon(1e-9));
    }
    SECTION("loss grows by log two when the value halves") {
        const double l2 = -std::log(cx_from_distances(Matrix(2, 2, 1.0), CxParams{}));
        const double l4 = -std::log(cx_from_distances(Matrix(4, 4, 1.0), CxParams{}));
        REQUIRE(l4 - l2 == Catch::Approx(std::log(2.0)).epsilon(1e-9));
    }
}

TEST_CASE("single pair comparisons are uninformative") {
    CxParams params;
    params.distance = DistanceKind::squared_euclidean;
    params.epsilon = 0.0;
    const Matrix x = from_rows({{1, 0}});
    const Matrix y = from_rows({{0, 1}});
    const StageMatrices s = compute_stages(x, y, params);
    REQUIRE(s.dist.at(0, 0) == 2.0);
    REQUIRE(s.dist_norm.at(0, 0) == 1.0);
    REQUIRE(s.sim.at(0, 0) == 1.0);
    REQUIRE(s.cx.at(0, 0) == 1.0);
    REQUIRE(contextual_similarity(x, y, params) == 1.0);
}

TEST_CASE("pipeline range and row stochasticity") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const Matrix x = random_matrix(13, 5, seed);
        const Matrix y = random_matrix(9, 5, seed + 100);
        for (DistanceKind kind : {DistanceKind::cosine_target_centered,
                                  DistanceKind::squared_euclidean, DistanceKind::absolute}) {
            CxParams params;
            params.distance = kind;
            const auto [value, s] = contextual_similarity_with_stages(x, y, params);
            REQUIRE(value > 0.0);
            REQUIRE(value <= 1.0);
            REQUIRE(s.dist.rows == 13);
            REQUIRE(s.dist.cols == 9);
            for (double v : s.dist.data) {
                REQUIRE(v >= 0.0);
                if (kind == DistanceKind::cosine_target_centered) REQUIRE(v <= 2.0);
            }
            for (double v : s.sim.data) REQUIRE(v > 0.0);
            for (std::size_t i = 0; i < s.cx.rows; ++i) {
                double sum = 0;
                for (std::size_t j = 0; j < s.cx.cols; ++j) sum += s.cx.at(i, j);
                REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
            }
        }
    }
}

TEST_CASE("permutation invariance") {
    const Matrix x = random_matrix(12, 4, 77);
    const Matrix y = random_matrix(10, 4, 78);
    const CxParams params;
    const double base = contextual_similarity(x, y, params);

    Matrix xp(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t c = 0; c < x.cols; ++c) xp.at(i, c) = x.at((i + 5) % x.rows, c);
    REQUIRE(std::abs(contextual_similarity(xp, y, params) - base) <= 1e-12);

    Matrix yp(y.rows, y.cols);
    for (std::size_t j = 0; j < y.rows; ++j)
        for (std::size_t c = 0; c < y.cols; ++c) yp.at(j, c) = y.at((j + 3) % y.rows, c);
    REQUIRE(std::abs(contextual_similarity(x, yp, params) - base) <= 1e-12);
}

TEST_CASE("distance scale invariance with epsilon zero") {
    Rng rng(4242);
    Matrix d(10, 8);
    for (double& v : d.data) v = 0.5 + rng.uniform();  // positive row minima
    CxParams params;
    params.epsilon = 0.0;
    const double base = cx_from_distances(d, params);
    for (double c : {1e-3, 1.0, 1e3}) {
        Matrix scaled = d;
        for (double& v : scaled.data) v *= c;
        REQUIRE(std::abs(cx_from_distances(scaled, params) - base) <= 1e-12);
    }
}

TEST_CASE("binarized similarity") {
    SECTION("identity hits every target") {
        Matrix x(6, 3);
        Rng rng(11);
        for (double& v : x.data) v = rng.normal();
        REQUIRE(binarized_similarity(x, x, DistanceKind::squared_euclidean) == 1.0);
    }
    SECTION("shared nearest neighbor hits one target") {
        const Matrix x = from_rows({{0.1}, {-0.1}, {0.2}});
        const Matrix y = from_rows({{0.0}, {50.0}, {-50.0}});
        REQUIRE(binarized_similarity(x, y, DistanceKind::squared_euclidean) ==
                Catch::Approx(1.0 / 3.0));
    }
    SECTION("argmin ties break toward the smallest index") {
        const Matrix x = from_rows({{0.0}});
        const Matrix y = from_rows({{1.0}, {-1.0}});
        // both targets at absolute distance 1; index 0 wins
        const Matrix d = pairwise_distances(x, y, DistanceKind::absolute);
        REQUIRE(d.at(0, 0) == d.at(0, 1));
        REQUIRE(binarized_similarity(x, y, DistanceKind::absolute) == 0.5);
    }
    SECTION("matches the brute-force oracle") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Matrix x = random_matrix(32, 4, 1000 + seed);
            const Matrix y = random_matrix(32, 4, 2000 + seed);
            for (DistanceKind kind : {DistanceKind::cosine_target_centered,
                                      DistanceKind::squared_euclidean, DistanceKind::absolute})
                REQUIRE(binarized_similarity(x, y, kind) == nn_hit_oracle(x, y, kind));
        }
    }
}

TEST_CASE("small h approaches the binarized measure") {
    const Matrix x = random_matrix(20, 3, 314);
    const Matrix y = random_matrix(20, 3, 159);
    const double dis = binarized_similarity(x, y, DistanceKind::squared_euclidean);
    double prev = 10.0;
    for (double h : {0.5, 0.1, 0.01, 0.001}) {
        CxParams params;
        params.h = h;
        params.distance = DistanceKind::squared_euclidean;
        const double gap = std::abs(contextual_similarity(x, y, params) - dis);
        REQUIRE(gap <= prev + 1e-15);
        prev = gap;
    }
    REQUIRE(prev <= 1e-3);
}

TEST_CASE("results do not depend on worker count") {
    const Matrix x = random_matrix(33, 7, 5150);
    const Matrix y = random_matrix(29, 7, 5151);
    std::vector<Matrix> dists;
    std::vector<double> values;
    for (int workers : {1, 2, 5}) {
        set_worker_count(workers);
        dists.push_back(pairwise_distances(x, y, DistanceKind::cosine_target_centered));
        values.push_back(contextual_similarity(x, y, CxParams{}));
    }
    set_worker_count(0);
    REQUIRE(dists[0].data == dists[1].data);
    REQUIRE(dists[0].data == dists[2].data);
    REQUIRE(values[0] == values[1]);
    REQUIRE(values[0] == values[2]);
}

TEST_CASE("params validation") {
    CxParams params;
    params.h = 0.0;
    REQUIRE_THROWS_WITH(validate(params), Catch::Matchers::ContainsSubstring("h must be > 0"));
    params.h = 0.5;
    params.epsilon = -1e-9;
    REQUIRE_THROWS_AS(validate(params), std::invalid_argument);
}
