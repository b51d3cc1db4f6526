#pragma once

#include <algorithm>
#include <array>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cxsim/rng.hpp"
#include "cxsim/tensor.hpp"

namespace cxsim {

struct PatchSpec {
    std::size_t patch_size = 5;
    std::size_t stride = 2;
};

inline void validate(const PatchSpec& spec) {
    if (spec.patch_size < 1 || spec.stride < 1)
        throw std::invalid_argument("patch size and stride must be >= 1");
}

// Sliding-window patches vectorized in (row, col, channel) order; origins
// record each patch's top-left pixel. N = (floor((H-p)/stride)+1) *
// (floor((W-p)/stride)+1), D = p*p*C.
inline FeatureSet extract_patches(const ImageGrid& image, const PatchSpec& spec) {
    validate(spec);
    const std::size_t p = spec.patch_size;
    if (image.height < p || image.width < p)
        throw std::invalid_argument("image smaller than patch size");
    const std::size_t n_rows = (image.height - p) / spec.stride + 1;
    const std::size_t n_cols = (image.width - p) / spec.stride + 1;
    const std::size_t n = n_rows * n_cols;
    const std::size_t dim = p * p * image.channels;

    Matrix feats(n, dim);
    std::vector<std::array<std::size_t, 2>> origins(n);
    const std::size_t row_chunk = p * image.channels;  // contiguous per patch row
    std::size_t idx = 0;
    for (std::size_t pr = 0; pr < n_rows; ++pr) {
        for (std::size_t pc = 0; pc < n_cols; ++pc, ++idx) {
            const std::size_t r0 = pr * spec.stride;
            const std::size_t c0 = pc * spec.stride;
            origins[idx] = {r0, c0};
            double* dst = feats.row(idx);
            for (std::size_t dr = 0; dr < p; ++dr) {
                const double* src = &image.data[((r0 + dr) * image.width + c0) * image.channels];
                std::memcpy(dst + dr * row_chunk, src, row_chunk * sizeof(double));
            }
        }
    }
    return FeatureSet(std::move(feats), std::move(origins));
}

namespace detail {

inline FeatureSet take_rows(const FeatureSet& src, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), src.dim());
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::memcpy(out.row(i), src.features.row(idx[i]), src.dim() * sizeof(double));
    if (src.origins) {
        std::vector<std::array<std::size_t, 2>> origins(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) origins[i] = (*src.origins)[idx[i]];
        return FeatureSet(std::move(out), std::move(origins));
    }
    return FeatureSet(std::move(out));
}

}  // namespace detail

// Equal-cardinality convention: samples min(|x|,|y|) features from the bigger
// set, uniformly without replacement; the smaller set passes through.
inline std::pair<FeatureSet, FeatureSet> subsample_to_match(const FeatureSet& x,
                                                            const FeatureSet& y,
                                                            std::uint64_t seed) {
    if (x.count() == 0 || y.count() == 0)
        throw std::invalid_argument("subsample_to_match: empty feature set");
    if (x.count() == y.count()) return {x, y};

    const FeatureSet& big = x.count() > y.count() ? x : y;
    const std::size_t keep = std::min(x.count(), y.count());
    std::vector<std::size_t> indices(big.count());
    std::iota(indices.begin(), indices.end(), 0);
    Rng rng(derive_seed(seed, 0x5ab));
    // partial Fisher-Yates: the first `keep` slots are a uniform sample
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(indices.size() - i));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(keep);
    std::sort(indices.begin(), indices.end());
    FeatureSet sampled = detail::take_rows(big, indices);
    if (x.count() > y.count()) return {std::move(sampled), y};
    return {x, std::move(sampled)};
}

// n features of dimension dim, i.i.d. Normal(mean, stddev^2) per coordinate.
inline FeatureSet sample_gaussian_features(std::size_t n, std::size_t dim, double mean,
                                           double stddev, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_gaussian_features: n must be >= 1");
    if (stddev < 0) throw std::invalid_argument("sample_gaussian_features: stddev must be >= 0");
    Matrix feats(n, dim);
    Rng rng(derive_seed(seed, 0x6ab));
    for (double& v : feats.data) v = rng.normal(mean, stddev);
    return FeatureSet(std::move(feats));
}

}  // namespace cxsim
