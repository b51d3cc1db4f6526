#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cxsim/parallel.hpp"
#include "cxsim/tensor.hpp"

namespace cxsim {

enum class DistanceKind { cosine_target_centered, squared_euclidean, absolute };

struct CxParams {
    double h = 0.5;
    double epsilon = 1e-5;
    DistanceKind distance = DistanceKind::cosine_target_centered;
};

inline void validate(const CxParams& params) {
    if (!(params.h > 0)) throw std::invalid_argument("h must be > 0");
    if (params.epsilon < 0) throw std::invalid_argument("epsilon must be >= 0");
}

// Intermediate matrices of the pipeline, all N x M with rows indexed by
// candidate features and columns by target features.
struct StageMatrices {
    Matrix dist;       // raw pairwise distances
    Matrix dist_norm;  // distances scaled by per-row minimum
    Matrix sim;        // exponentiated, floored below
    Matrix cx;         // row-normalized similarities
};

inline constexpr double kNormGuard = 1e-12;
inline constexpr double kSimFloor = 1e-300;

namespace detail {

// Fixed 4-way accumulation order so results are identical across worker
// counts and shared between the forward and gradient paths.
inline double dot4(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

inline double sqdist4(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double e0 = a[i] - b[i];
        const double e1 = a[i + 1] - b[i + 1];
        const double e2 = a[i + 2] - b[i + 2];
        const double e3 = a[i + 3] - b[i + 3];
        s0 += e0 * e0;
        s1 += e1 * e1;
        s2 += e2 * e2;
        s3 += e3 * e3;
    }
    double tail = 0;
    for (; i < n; ++i) {
        const double e = a[i] - b[i];
        tail += e * e;
    }
    return ((s0 + s1) + (s2 + s3)) + tail;
}

inline double absdist4(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += std::abs(a[i] - b[i]);
        s1 += std::abs(a[i + 1] - b[i + 1]);
        s2 += std::abs(a[i + 2] - b[i + 2]);
        s3 += std::abs(a[i + 3] - b[i + 3]);
    }
    double tail = 0;
    for (; i < n; ++i) tail += std::abs(a[i] - b[i]);
    return ((s0 + s1) + (s2 + s3)) + tail;
}

inline std::vector<double> column_mean(const Matrix& m) {
    std::vector<double> mu(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) mu[c] += row[c];
    }
    for (double& v : mu) v /= static_cast<double>(m.rows);
    return mu;
}

inline void check_pair(const Matrix& x, const Matrix& y) {
    if (x.rows == 0 || y.rows == 0)
        throw std::invalid_argument("pairwise_distances: empty feature set");
    if (x.cols != y.cols)
        throw std::invalid_argument("feature dims differ: x has " + std::to_string(x.cols) +
                                    ", y has " + std::to_string(y.cols));
}

}  // namespace detail

// Cosine distances center both sets by the target mean before measuring the
// angle; norms are guarded below by kNormGuard and the result is clamped to
// [0, 2].
inline Matrix pairwise_distances(const Matrix& x, const Matrix& y, DistanceKind kind) {
    detail::check_pair(x, y);
    const std::size_t n = x.rows, m = y.rows, d = x.cols;
    Matrix dist(n, m);

    if (kind == DistanceKind::cosine_target_centered) {
        const std::vector<double> mu = detail::column_mean(y);
        Matrix xc(n, d), yc(m, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) xc.at(i, c) = x.at(i, c) - mu[c];
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t c = 0; c < d; ++c) yc.at(j, c) = y.at(j, c) - mu[c];
        std::vector<double> nx(n), ny(m);
        for (std::size_t i = 0; i < n; ++i)
            nx[i] = std::max(std::sqrt(detail::dot4(xc.row(i), xc.row(i), d)), kNormGuard);
        for (std::size_t j = 0; j < m; ++j)
            ny[j] = std::max(std::sqrt(detail::dot4(yc.row(j), yc.row(j), d)), kNormGuard);
        parallel_for(n, [&](std::size_t i) {
            const double* xi = xc.row(i);
            double* out = dist.row(i);
            for (std::size_t j = 0; j < m; ++j) {
                const double cos = detail::dot4(xi, yc.row(j), d) / (nx[i] * ny[j]);
                out[j] = std::clamp(1.0 - cos, 0.0, 2.0);
            }
        });
    } else if (kind == DistanceKind::squared_euclidean) {
        parallel_for(n, [&](std::size_t i) {
            const double* xi = x.row(i);
            double* out = dist.row(i);
            for (std::size_t j = 0; j < m; ++j) out[j] = detail::sqdist4(xi, y.row(j), d);
        });
    } else {
        parallel_for(n, [&](std::size_t i) {
            const double* xi = x.row(i);
            double* out = dist.row(i);
            for (std::size_t j = 0; j < m; ++j) out[j] = detail::absdist4(xi, y.row(j), d);
        });
    }
    return dist;
}

// Scales each row by its minimum plus epsilon, making the per-row best match
// land near 1 regardless of scale.
inline Matrix normalize_distances(const Matrix& dist, double epsilon) {
    if (epsilon < 0) throw std::invalid_argument("epsilon must be >= 0");
    Matrix out(dist.rows, dist.cols);
    for (std::size_t i = 0; i < dist.rows; ++i) {
        const double* row = dist.row(i);
        double m = row[0];
        for (std::size_t j = 1; j < dist.cols; ++j)
            if (row[j] < m) m = row[j];
        const double denom = m + epsilon;
        if (denom == 0)
            throw std::runtime_error("normalize_distances: degenerate row (all-zero distances with epsilon 0)");
        double* dst = out.row(i);
        for (std::size_t j = 0; j < dist.cols; ++j) dst[j] = row[j] / denom;
    }
    return out;
}

inline Matrix similarities(const Matrix& normalized, double h) {
    if (!(h > 0)) throw std::invalid_argument("h must be > 0");
    Matrix out(normalized.rows, normalized.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::max(std::exp((1.0 - normalized.data[i]) / h), kSimFloor);
    return out;
}

inline Matrix row_normalize(const Matrix& w) {
    Matrix out(w.rows, w.cols);
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* row = w.row(i);
        double sum = 0;
        for (std::size_t j = 0; j < w.cols; ++j) sum += row[j];
        double* dst = out.row(i);
        for (std::size_t j = 0; j < w.cols; ++j) dst[j] = row[j] / sum;
    }
    return out;
}

inline StageMatrices stages_from_distances(Matrix distances, const CxParams& params) {
    validate(params);
    StageMatrices s;
    s.dist_norm = normalize_distances(distances, params.epsilon);
    s.sim = similarities(s.dist_norm, params.h);
    s.cx = row_normalize(s.sim);
    s.dist = std::move(distances);
    return s;
}

inline StageMatrices compute_stages(const Matrix& x, const Matrix& y, const CxParams& params) {
    validate(params);
    return stages_from_distances(pairwise_distances(x, y, params.distance), params);
}

// Mean over target features of the best matching score; always in (0, 1].
inline double value_from_stages(const StageMatrices& s) {
    const Matrix& cx = s.cx;
    double sum = 0;
    for (std::size_t j = 0; j < cx.cols; ++j) {
        double best = cx.at(0, j);
        for (std::size_t i = 1; i < cx.rows; ++i)
            if (cx.at(i, j) > best) best = cx.at(i, j);
        sum += best;
    }
    return sum / static_cast<double>(cx.cols);
}

inline double cx_from_distances(const Matrix& distances, const CxParams& params) {
    return value_from_stages(stages_from_distances(distances, params));
}

inline double contextual_similarity(const Matrix& x, const Matrix& y, const CxParams& params) {
    return value_from_stages(compute_stages(x, y, params));
}

inline double contextual_similarity(const FeatureSet& x, const FeatureSet& y,
                                    const CxParams& params) {
    return contextual_similarity(x.features, y.features, params);
}

inline std::pair<double, StageMatrices> contextual_similarity_with_stages(const Matrix& x,
                                                                          const Matrix& y,
                                                                          const CxParams& params) {
    StageMatrices stages = compute_stages(x, y, params);
    const double value = value_from_stages(stages);
    return {value, std::move(stages)};
}

inline std::pair<double, StageMatrices> contextual_similarity_with_stages(const FeatureSet& x,
                                                                          const FeatureSet& y,
                                                                          const CxParams& params) {
    return contextual_similarity_with_stages(x.features, y.features, params);
}

inline double contextual_loss(const Matrix& x, const Matrix& y, const CxParams& params) {
    return -std::log(contextual_similarity(x, y, params));
}

inline double contextual_loss(const FeatureSet& x, const FeatureSet& y, const CxParams& params) {
    return contextual_loss(x.features, y.features, params);
}

// Fraction of target features that are the nearest neighbor of at least one
// candidate feature; ties go to the smallest index.
inline double binarized_similarity(const Matrix& x, const Matrix& y, DistanceKind kind) {
    const Matrix dist = pairwise_distances(x, y, kind);
    std::vector<char> hit(dist.cols, 0);
    for (std::size_t i = 0; i < dist.rows; ++i) {
        const double* row = dist.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < dist.cols; ++j)
            if (row[j] < row[best]) best = j;
        hit[best] = 1;
    }
    std::size_t count = 0;
    for (char c : hit) count += c;
    return static_cast<double>(count) / static_cast<double>(dist.cols);
}

inline double binarized_similarity(const FeatureSet& x, const FeatureSet& y, DistanceKind kind) {
    return binarized_similarity(x.features, y.features, kind);
}

}  // namespace cxsim
