#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cxsim/cx.hpp"
#include "cxsim/features.hpp"
#include "cxsim/grad.hpp"
#include "cxsim/rng.hpp"
#include "cxsim/tensor.hpp"

namespace cxsim {

enum class LossKind { cx, l1, l2 };

enum class TargetSchedule { cycle, random };

struct OptimizeConfig {
    LossKind loss_kind = LossKind::cx;
    CxParams cx_params;
    PatchSpec patch;
    std::size_t iters = 400;
    std::optional<double> step_size;  // unset: per-loss default
    TargetSchedule target_schedule = TargetSchedule::cycle;
    std::uint64_t seed = 0;
    std::size_t log_every = 10;
};

// per-pixel gradient scales differ by orders: the l1 subgradient is +-1 per
// pixel, the l2 direction and the cx pixel gradient spread over the image
inline double default_step(LossKind kind) {
    switch (kind) {
        case LossKind::cx: return 1.0;
        case LossKind::l1: return 0.005;
        default: return 0.5;
    }
}

inline double effective_step(const OptimizeConfig& config) {
    const double step = config.step_size.value_or(default_step(config.loss_kind));
    if (!(step > 0)) throw std::invalid_argument("step_size must be > 0");
    return step;
}

struct TraceEntry {
    std::size_t iteration;
    std::size_t target;
    double loss;
};

struct OptimizeTrace {
    std::vector<TraceEntry> entries;
};

// Plain projected gradient descent directly on pixel values: each step picks
// a target by the schedule, takes one step against it, and clamps back to
// [0, 1].
inline std::pair<ImageGrid, OptimizeTrace> reconstruct(const ImageGrid& source,
                                                       const std::vector<ImageGrid>& targets,
                                                       const OptimizeConfig& config) {
    if (targets.empty()) throw std::invalid_argument("reconstruct: need at least one target");
    for (const ImageGrid& t : targets)
        if (t.height != source.height || t.width != source.width || t.channels != source.channels)
            throw std::invalid_argument("reconstruct: target shape mismatch");
    if (config.iters < 1) throw std::invalid_argument("reconstruct: iters must be >= 1");
    if (config.log_every < 1) throw std::invalid_argument("reconstruct: log_every must be >= 1");
    validate(config.cx_params);
    const double step = effective_step(config);

    std::vector<FeatureSet> target_feats;
    if (config.loss_kind == LossKind::cx) {
        validate(config.patch);
        if (source.height < config.patch.patch_size || source.width < config.patch.patch_size)
            throw std::invalid_argument("reconstruct: patch larger than image");
        target_feats.reserve(targets.size());
        for (const ImageGrid& t : targets) target_feats.push_back(extract_patches(t, config.patch));
    }

    std::vector<double> s = source.data;
    const std::size_t n_pix = s.size();
    Rng schedule_rng(derive_seed(config.seed, 0x7c9));
    OptimizeTrace trace;

    for (std::size_t iter = 0; iter < config.iters; ++iter) {
        const std::size_t k = config.target_schedule == TargetSchedule::cycle
                                  ? iter % targets.size()
                                  : static_cast<std::size_t>(schedule_rng.bounded(targets.size()));
        double loss = 0;
        std::vector<double> grad;

        if (config.loss_kind == LossKind::cx) {
            const ImageGrid current(source.height, source.width, source.channels, s);
            const FeatureSet xs = extract_patches(current, config.patch);
            const Matrix feat_grad = loss_grad_features(xs.features, target_feats[k].features,
                                                        config.cx_params, &loss);
            grad = scatter_patch_gradient(feat_grad, *xs.origins, config.patch, source.height,
                                          source.width, source.channels);
        } else if (config.loss_kind == LossKind::l1) {
            grad.assign(n_pix, 0.0);
            const std::vector<double>& t = targets[k].data;
            for (std::size_t p = 0; p < n_pix; ++p) {
                const double diff = s[p] - t[p];
                loss += std::abs(diff);
                if (diff > 0)
                    grad[p] = 1.0;
                else if (diff < 0)
                    grad[p] = -1.0;
            }
        } else {
            grad.assign(n_pix, 0.0);
            const std::vector<double>& t = targets[k].data;
            double sq = 0;
            for (std::size_t p = 0; p < n_pix; ++p) {
                const double diff = s[p] - t[p];
                sq += diff * diff;
            }
            loss = std::sqrt(sq);
            if (loss > 0)
                for (std::size_t p = 0; p < n_pix; ++p) grad[p] = (s[p] - t[p]) / loss;
        }

        if (iter % config.log_every == 0 || iter + 1 == config.iters)
            trace.entries.push_back({iter, k, loss});
        for (std::size_t p = 0; p < n_pix; ++p)
            s[p] = std::clamp(s[p] - step * grad[p], 0.0, 1.0);
    }
    return {ImageGrid(source.height, source.width, source.channels, std::move(s)), std::move(trace)};
}

}  // namespace cxsim
