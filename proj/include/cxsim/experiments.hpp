#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cxsim/cx.hpp"
#include "cxsim/features.hpp"
#include "cxsim/optimize.hpp"
#include "cxsim/parallel.hpp"
#include "cxsim/rng.hpp"
#include "cxsim/tensor.hpp"

namespace cxsim {

enum class GridMeasure { cx, dis, l2 };

struct GridSpec {
    std::vector<double> mu_values;
    std::vector<double> sigma_values;

    static GridSpec integer_range(int mu_min, int mu_max, int sigma_min, int sigma_max) {
        if (mu_max < mu_min || sigma_max < sigma_min)
            throw std::invalid_argument("grid range is empty");
        GridSpec spec;
        for (int v = mu_min; v <= mu_max; ++v) spec.mu_values.push_back(v);
        for (int v = sigma_min; v <= sigma_max; ++v) spec.sigma_values.push_back(v);
        return spec;
    }
};

struct CellStat {
    double mean = 0;
    double se = 0;
    std::size_t trials = 0;
};

struct ExperimentGrid {
    std::vector<double> mu_values;
    std::vector<double> sigma_values;
    std::vector<CellStat> cells;  // mu-major

    CellStat& cell(std::size_t i_mu, std::size_t i_sigma) {
        return cells[i_mu * sigma_values.size() + i_sigma];
    }
    const CellStat& cell(std::size_t i_mu, std::size_t i_sigma) const {
        return cells[i_mu * sigma_values.size() + i_sigma];
    }
};

namespace detail {

// mean over target features of the squared distance to their nearest
// candidate
inline double mean_min_sqdist(const Matrix& x, const Matrix& y) {
    const Matrix dist = pairwise_distances(x, y, DistanceKind::squared_euclidean);
    double sum = 0;
    for (std::size_t j = 0; j < dist.cols; ++j) {
        double best = dist.at(0, j);
        for (std::size_t i = 1; i < dist.rows; ++i)
            if (dist.at(i, j) < best) best = dist.at(i, j);
        sum += best;
    }
    return sum / static_cast<double>(dist.cols);
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

// Monte-Carlo estimate of the chosen measure between a candidate set drawn
// from N(0,1) and a target set drawn from N(mu,sigma), per grid cell. The
// 1-D features are compared with squared euclidean distance; each cell draws
// its own generator streams so results do not depend on scheduling.
inline ExperimentGrid expectation_grid(GridMeasure measure, std::size_t n_points,
                                       const GridSpec& spec, double h, std::size_t trials,
                                       std::uint64_t seed) {
    if (n_points < 2) throw std::invalid_argument("expectation_grid: n_points must be >= 2");
    if (trials < 1) throw std::invalid_argument("expectation_grid: trials must be >= 1");
    if (measure == GridMeasure::cx && !(h > 0)) throw std::invalid_argument("h must be > 0");

    ExperimentGrid grid;
    grid.mu_values = spec.mu_values;
    grid.sigma_values = spec.sigma_values;
    grid.cells.resize(spec.mu_values.size() * spec.sigma_values.size());

    CxParams params;
    params.h = h;
    params.distance = DistanceKind::squared_euclidean;

    parallel_for(grid.cells.size(), [&](std::size_t idx) {
        const double mu = spec.mu_values[idx / spec.sigma_values.size()];
        const double sigma = spec.sigma_values[idx % spec.sigma_values.size()];
        const std::uint64_t cell_seed = derive_seed(seed, idx);
        double sum = 0, sumsq = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            const FeatureSet x =
                sample_gaussian_features(n_points, 1, 0.0, 1.0, derive_seed(cell_seed, 2 * t));
            const FeatureSet y =
                sample_gaussian_features(n_points, 1, mu, sigma, derive_seed(cell_seed, 2 * t + 1));
            double v = 0;
            switch (measure) {
                case GridMeasure::cx: v = contextual_similarity(x, y, params); break;
                case GridMeasure::dis:
                    v = binarized_similarity(x, y, DistanceKind::squared_euclidean);
                    break;
                case GridMeasure::l2: v = detail::mean_min_sqdist(x.features, y.features); break;
            }
            sum += v;
            sumsq += v * v;
        }
        CellStat& cell = grid.cells[idx];
        cell.trials = trials;
        cell.mean = sum / static_cast<double>(trials);
        if (trials > 1) {
            const double var =
                std::max(0.0, (sumsq - sum * cell.mean) / static_cast<double>(trials - 1));
            cell.se = std::sqrt(var / static_cast<double>(trials));
        }
    });
    return grid;
}

inline std::string to_csv(const ExperimentGrid& grid) {
    std::string out = "mu,sigma,mean,stderr,trials\n";
    for (std::size_t i = 0; i < grid.mu_values.size(); ++i) {
        for (std::size_t j = 0; j < grid.sigma_values.size(); ++j) {
            const CellStat& cell = grid.cell(i, j);
            out += detail::format_number(grid.mu_values[i]) + ',' +
                   detail::format_number(grid.sigma_values[j]) + ',' +
                   detail::format_number(cell.mean) + ',' + detail::format_number(cell.se) + ',' +
                   std::to_string(cell.trials) + '\n';
        }
    }
    return out;
}

inline double psnr(const ImageGrid& a, const ImageGrid& b) {
    if (a.data.size() != b.data.size()) throw std::invalid_argument("psnr: shape mismatch");
    double sq = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double diff = a.data[i] - b.data[i];
        sq += diff * diff;
    }
    const double mse = sq / static_cast<double>(a.data.size());
    return 10.0 * std::log10(1.0 / std::max(mse, 1e-12));
}

// Energy left after removing a 3x3 box blur (averaging whatever neighbors
// are in bounds).
inline double high_frequency_energy(const ImageGrid& img) {
    double energy = 0;
    for (std::size_t r = 0; r < img.height; ++r)
        for (std::size_t c = 0; c < img.width; ++c)
            for (std::size_t ch = 0; ch < img.channels; ++ch) {
                double sum = 0;
                int count = 0;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const long long rr = static_cast<long long>(r) + dr;
                        const long long cc = static_cast<long long>(c) + dc;
                        if (rr < 0 || cc < 0 || rr >= static_cast<long long>(img.height) ||
                            cc >= static_cast<long long>(img.width))
                            continue;
                        sum += img.at(rr, cc, ch);
                        ++count;
                    }
                const double diff = img.at(r, c, ch) - sum / count;
                energy += diff * diff;
            }
    return energy;
}

inline ImageGrid crop_image(const ImageGrid& img, std::size_t r0, std::size_t c0,
                            std::size_t size) {
    if (r0 + size > img.height || c0 + size > img.width)
        throw std::invalid_argument("crop out of bounds");
    std::vector<double> data(size * size * img.channels);
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c)
            for (std::size_t ch = 0; ch < img.channels; ++ch)
                data[(r * size + c) * img.channels + ch] = img.at(r0 + r, c0 + c, ch);
    return ImageGrid(size, size, img.channels, std::move(data));
}

struct DenoiseEntry {
    LossKind kind;
    ImageGrid image;
    double psnr = 0;
    double hf_ratio = 0;
};

struct DenoiseResult {
    ImageGrid ground_truth;
    ImageGrid noisy;
    double input_psnr = 0;
    double input_hf_ratio = 0;
    std::vector<DenoiseEntry> entries;
};

inline const char* loss_name(LossKind kind) {
    switch (kind) {
        case LossKind::cx: return "cx";
        case LossKind::l1: return "l1";
        default: return "l2";
    }
}

// Raw patch intensities carry the signal in this experiment, so its default
// kernel measures squared euclidean distances; the report echoes the kernel.
inline OptimizeConfig denoise_config() {
    OptimizeConfig config;
    config.cx_params.distance = DistanceKind::squared_euclidean;
    return config;
}

inline const char* distance_label(DistanceKind kind) {
    switch (kind) {
        case DistanceKind::cosine_target_centered: return "cosine";
        case DistanceKind::squared_euclidean: return "l2";
        default: return "l1";
    }
}

// Centered crop plus noise is reconstructed against clean crops of the same
// image taken at random integer shifts; every requested loss starts from the
// same noisy source. The clean centered crop is the scoring reference only
// and never enters the optimization.
inline DenoiseResult toy_denoise(const ImageGrid& clean, std::size_t crop, std::size_t n_targets,
                                 int max_shift, double noise_sigma,
                                 const std::vector<LossKind>& losses, const OptimizeConfig& base,
                                 std::uint64_t seed) {
    if (crop < 1) throw std::invalid_argument("toy_denoise: crop must be >= 1");
    if (n_targets < 1) throw std::invalid_argument("toy_denoise: n_targets must be >= 1");
    if (max_shift < 0) throw std::invalid_argument("toy_denoise: max_shift must be >= 0");
    if (noise_sigma < 0) throw std::invalid_argument("toy_denoise: noise_sigma must be >= 0");
    const std::size_t margin = static_cast<std::size_t>(max_shift);
    if (clean.height < crop + 2 * margin || clean.width < crop + 2 * margin)
        throw std::invalid_argument("toy_denoise: image too small for crop and shift margins");
    const std::size_t base_r = (clean.height - crop) / 2;
    const std::size_t base_c = (clean.width - crop) / 2;
    if (base_r < margin || base_c < margin ||
        base_r + crop + margin > clean.height || base_c + crop + margin > clean.width)
        throw std::invalid_argument("toy_denoise: image too small for crop and shift margins");

    DenoiseResult result;
    result.ground_truth = crop_image(clean, base_r, base_c, crop);

    Rng noise_rng(derive_seed(seed, 0x401));
    std::vector<double> noisy = result.ground_truth.data;
    for (double& v : noisy) v += noise_sigma * noise_rng.normal();
    result.noisy = ImageGrid(crop, crop, clean.channels, std::move(noisy));
    result.input_psnr = psnr(result.noisy, result.ground_truth);
    const double gt_energy = std::max(high_frequency_energy(result.ground_truth), 1e-300);
    result.input_hf_ratio = high_frequency_energy(result.noisy) / gt_energy;

    Rng shift_rng(derive_seed(seed, 0x51f));
    std::vector<ImageGrid> targets;
    targets.reserve(n_targets);
    for (std::size_t t = 0; t < n_targets; ++t) {
        const long long dr = shift_rng.uniform_int(-max_shift, max_shift);
        const long long dc = shift_rng.uniform_int(-max_shift, max_shift);
        const std::size_t r0 = static_cast<std::size_t>(static_cast<long long>(base_r) + dr);
        const std::size_t c0 = static_cast<std::size_t>(static_cast<long long>(base_c) + dc);
        targets.push_back(crop_image(clean, r0, c0, crop));
    }

    for (LossKind kind : losses) {
        OptimizeConfig config = base;
        config.loss_kind = kind;
        config.seed = derive_seed(seed, 0x09);
        auto [image, trace] = reconstruct(result.noisy, targets, config);
        DenoiseEntry entry;
        entry.kind = kind;
        entry.psnr = psnr(image, result.ground_truth);
        entry.hf_ratio = high_frequency_energy(image) / gt_energy;
        entry.image = std::move(image);
        result.entries.push_back(std::move(entry));
    }
    return result;
}

inline std::string to_report(const DenoiseResult& result, std::size_t crop, std::size_t n_targets,
                             int max_shift, double noise_sigma, const OptimizeConfig& base,
                             std::uint64_t seed) {
    nlohmann::ordered_json report;
    report["crop"] = crop;
    report["n_targets"] = n_targets;
    report["max_shift"] = max_shift;
    report["noise_sigma"] = noise_sigma;
    report["iters"] = base.iters;
    report["schedule"] = base.target_schedule == TargetSchedule::cycle ? "cycle" : "random";
    report["distance"] = distance_label(base.cx_params.distance);
    report["h"] = base.cx_params.h;
    report["seed"] = seed;
    report["psnr_input"] = result.input_psnr;
    report["hf_ratio_input"] = result.input_hf_ratio;
    for (const DenoiseEntry& entry : result.entries) {
        const std::string name = loss_name(entry.kind);
        OptimizeConfig config = base;
        config.loss_kind = entry.kind;
        report["step_" + name] = effective_step(config);
        report["psnr_" + name] = entry.psnr;
        report["hf_ratio_" + name] = entry.hf_ratio;
    }
    return report.dump(2) + "\n";
}

}  // namespace cxsim
