#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cxsim/cx.hpp"
#include "cxsim/features.hpp"
#include "cxsim/parallel.hpp"
#include "cxsim/rng.hpp"
#include "cxsim/tensor.hpp"

namespace cxsim {

struct GradReport {
    double max_abs_err = 0;
    double max_rel_err = 0;
    std::size_t checked_coords = 0;
    double tie_margin = std::numeric_limits<double>::infinity();
    std::size_t skipped = 0;
};

// Smallest gap protecting the argmax/argmin selections: per-column top-two
// gap of cx and per-row bottom-two gap of the distances. Subgradients equal
// gradients only when this is positive.
inline double tie_margin(const StageMatrices& s) {
    double margin = std::numeric_limits<double>::infinity();
    const Matrix& cx = s.cx;
    for (std::size_t j = 0; j < cx.cols; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        double second = best;
        for (std::size_t i = 0; i < cx.rows; ++i) {
            const double v = cx.at(i, j);
            if (v > best) {
                second = best;
                best = v;
            } else if (v > second) {
                second = v;
            }
        }
        if (cx.rows > 1) margin = std::min(margin, best - second);
    }
    const Matrix& d = s.dist;
    for (std::size_t i = 0; i < d.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        double second = best;
        for (std::size_t j = 0; j < d.cols; ++j) {
            const double v = d.at(i, j);
            if (v < best) {
                second = best;
                best = v;
            } else if (v < second) {
                second = v;
            }
        }
        if (d.cols > 1) margin = std::min(margin, second - best);
    }
    return margin;
}

// Reverse-mode gradient of -log(cx value) with respect to x. The target set
// (including its mean, for cosine) is constant. At argmax/argmin selections
// the smallest-index branch carries the full derivative, matching the
// forward tie-breaking; floored similarities pass zero.
inline Matrix loss_grad_features(const Matrix& x, const Matrix& y, const CxParams& params,
                                 const StageMatrices& stages, double* loss_out = nullptr) {
    detail::check_pair(x, y);
    const std::size_t n = x.rows, m = y.rows, d = x.cols;
    if (stages.cx.rows != n || stages.cx.cols != m)
        throw std::invalid_argument("stage matrices do not match the feature sets");

    // column argmax (smallest index) and the cx value, summed in the same
    // order as the forward pass
    std::vector<std::size_t> col_best(m);
    double value = 0;
    for (std::size_t j = 0; j < m; ++j) {
        double best = stages.cx.at(0, j);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (stages.cx.at(i, j) > best) {
                best = stages.cx.at(i, j);
                arg = i;
            }
        col_best[j] = arg;
        value += best;
    }
    value /= static_cast<double>(m);
    if (loss_out) *loss_out = -std::log(value);

    // hit lists per row, in ascending column order
    std::vector<std::vector<std::size_t>> hits(n);
    for (std::size_t j = 0; j < m; ++j) hits[col_best[j]].push_back(j);
    const double gmax = -1.0 / (value * static_cast<double>(m));

    // target-side constants for the cosine kernel, recomputed exactly as in
    // the forward pass
    std::vector<double> mu;
    Matrix b;
    if (params.distance == DistanceKind::cosine_target_centered) {
        mu = detail::column_mean(y);
        b = Matrix(m, d);
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t c = 0; c < d; ++c) b.at(j, c) = y.at(j, c) - mu[c];
            const double norm = std::max(std::sqrt(detail::dot4(b.row(j), b.row(j), d)), kNormGuard);
            for (std::size_t c = 0; c < d; ++c) b.at(j, c) /= norm;
        }
    }

    Matrix grad(n, d);
    parallel_for(n, [&](std::size_t i) {
        if (hits[i].empty()) return;

        // through row normalization: gW_ij = (gCX_ij - T_i) / S_i
        double ti = 0;
        for (std::size_t j : hits[i]) ti += gmax * stages.cx.at(i, j);
        const double* wrow = stages.sim.row(i);
        double si = 0;
        for (std::size_t j = 0; j < m; ++j) si += wrow[j];

        // through the exponential and the row-min scaling
        const double* drow = stages.dist.row(i);
        const double* ntrow = stages.dist_norm.row(i);
        double dmin = drow[0];
        std::size_t kmin = 0;
        for (std::size_t j = 1; j < m; ++j)
            if (drow[j] < dmin) {
                dmin = drow[j];
                kmin = j;
            }
        const double denom = dmin + params.epsilon;

        std::vector<double> gd(m);
        double corr = 0;
        std::size_t next_hit = 0;
        for (std::size_t j = 0; j < m; ++j) {
            double gcx = 0;
            if (next_hit < hits[i].size() && hits[i][next_hit] == j) {
                gcx = gmax;
                ++next_hit;
            }
            const double gw = (gcx - ti) / si;
            const double gt = wrow[j] <= kSimFloor ? 0.0 : -gw * wrow[j] / params.h;
            corr += gt * ntrow[j];
            gd[j] = gt / denom;
        }
        gd[kmin] -= corr / denom;

        // through the distance kernel
        double* out = grad.row(i);
        if (params.distance == DistanceKind::squared_euclidean) {
            double r = 0;
            for (std::size_t j = 0; j < m; ++j) r += gd[j];
            std::vector<double> sy(d, 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                const double* yj = y.row(j);
                for (std::size_t c = 0; c < d; ++c) sy[c] += gd[j] * yj[c];
            }
            const double* xi = x.row(i);
            for (std::size_t c = 0; c < d; ++c) out[c] = 2.0 * (r * xi[c] - sy[c]);
        } else if (params.distance == DistanceKind::absolute) {
            const double* xi = x.row(i);
            for (std::size_t j = 0; j < m; ++j) {
                const double* yj = y.row(j);
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = xi[c] - yj[c];
                    if (diff > 0)
                        out[c] += gd[j];
                    else if (diff < 0)
                        out[c] -= gd[j];
                }
            }
        } else {
            std::vector<double> u(d);
            for (std::size_t c = 0; c < d; ++c) u[c] = x.at(i, c) - mu[c];
            const double raw = std::sqrt(detail::dot4(u.data(), u.data(), d));
            const double ni = std::max(raw, kNormGuard);
            std::vector<double> sb(d, 0.0);
            double t = 0;
            for (std::size_t j = 0; j < m; ++j) {
                const double* bj = b.row(j);
                for (std::size_t c = 0; c < d; ++c) sb[c] += gd[j] * bj[c];
                t += gd[j] * (1.0 - drow[j]);
            }
            if (raw > kNormGuard) {
                for (std::size_t c = 0; c < d; ++c) out[c] = -(sb[c] - (u[c] / ni) * t) / ni;
            } else {
                // norm pinned at the guard: only the direct term survives
                for (std::size_t c = 0; c < d; ++c) out[c] = -sb[c] / ni;
            }
        }
    });
    return grad;
}

inline Matrix loss_grad_features(const Matrix& x, const Matrix& y, const CxParams& params,
                                 double* loss_out = nullptr) {
    return loss_grad_features(x, y, params, compute_stages(x, y, params), loss_out);
}

inline Matrix loss_grad_features(const FeatureSet& x, const FeatureSet& y,
                                 const CxParams& params, double* loss_out = nullptr) {
    return loss_grad_features(x.features, y.features, params, loss_out);
}

// Adjoint of extract_patches: each feature-gradient entry is added back to
// the pixel it was read from. Returned flat buffer has height*width*channels
// entries in (row, col, channel) order and is not clamped.
inline std::vector<double> scatter_patch_gradient(const Matrix& feat_grad,
                                                  const std::vector<std::array<std::size_t, 2>>& origins,
                                                  const PatchSpec& spec, std::size_t height,
                                                  std::size_t width, std::size_t channels) {
    validate(spec);
    const std::size_t p = spec.patch_size;
    if (feat_grad.rows != origins.size())
        throw std::invalid_argument("scatter_patch_gradient: origins count mismatch");
    if (feat_grad.cols != p * p * channels)
        throw std::invalid_argument("scatter_patch_gradient: feature dim does not match patch spec");
    std::vector<double> pixel_grad(height * width * channels, 0.0);
    const std::size_t row_chunk = p * channels;
    for (std::size_t k = 0; k < origins.size(); ++k) {
        const auto [r0, c0] = origins[k];
        if (r0 + p > height || c0 + p > width)
            throw std::invalid_argument("scatter_patch_gradient: origin out of bounds");
        const double* src = feat_grad.row(k);
        for (std::size_t dr = 0; dr < p; ++dr) {
            double* dst = &pixel_grad[((r0 + dr) * width + c0) * channels];
            for (std::size_t c = 0; c < row_chunk; ++c) dst[c] += src[dr * row_chunk + c];
        }
    }
    return pixel_grad;
}

template <typename F>
std::vector<double> finite_diff_grad(F&& loss_fn, std::vector<double> point, double step) {
    if (!(step > 0)) throw std::invalid_argument("step must be > 0");
    std::vector<double> grad(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double orig = point[i];
        point[i] = orig + step;
        const double fp = loss_fn(point);
        point[i] = orig - step;
        const double fm = loss_fn(point);
        point[i] = orig;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

// Compares the analytic gradient with central differences on `trials`
// perturbed copies of the base instance. Near-tie instances (margin below
// 1e-6) are counted as skipped and resampled so every trial is generic.
inline GradReport grad_check(const Matrix& x, const Matrix& y, const CxParams& params,
                             double step, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("grad_check: trials must be >= 1");
    validate(params);
    GradReport report;
    const double perturb = 0.05;
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t attempt = 0; attempt < 64; ++attempt) {
            Rng rng(derive_seed(seed, t * 64 + attempt));
            Matrix xt(x.rows, x.cols), yt(y.rows, y.cols);
            for (std::size_t i = 0; i < x.data.size(); ++i)
                xt.data[i] = x.data[i] + perturb * rng.normal();
            for (std::size_t i = 0; i < y.data.size(); ++i)
                yt.data[i] = y.data[i] + perturb * rng.normal();

            const StageMatrices stages = compute_stages(xt, yt, params);
            const double margin = tie_margin(stages);
            if (margin < 1e-6) {
                ++report.skipped;
                continue;
            }
            report.tie_margin = std::min(report.tie_margin, margin);

            const Matrix analytic = loss_grad_features(xt, yt, params, stages);
            const auto loss_fn = [&](const std::vector<double>& flat) {
                Matrix xp(xt.rows, xt.cols);
                xp.data = flat;
                return contextual_loss(xp, yt, params);
            };
            const std::vector<double> fd = finite_diff_grad(loss_fn, xt.data, step);
            for (std::size_t i = 0; i < fd.size(); ++i) {
                const double a = analytic.data[i];
                const double abs_err = std::abs(a - fd[i]);
                const double rel = abs_err / std::max({std::abs(a), std::abs(fd[i]), 1e-6});
                report.max_abs_err = std::max(report.max_abs_err, abs_err);
                report.max_rel_err = std::max(report.max_rel_err, rel);
            }
            report.checked_coords += fd.size();
            break;
        }
    }
    return report;
}

inline GradReport grad_check(const FeatureSet& x, const FeatureSet& y, const CxParams& params,
                             double step, std::size_t trials, std::uint64_t seed) {
    return grad_check(x.features, y.features, params, step, trials, seed);
}

}  // namespace cxsim
