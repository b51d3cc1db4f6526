#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"

#include "cxsim/cxsim.hpp"

namespace {

using namespace cxsim;

std::string fmt(double v) {
    if (v == 0.0) v = 0.0;  // never print -0
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%#.9g", v);
    return buf;
}

void print_kv(const std::string& key, double v) { std::cout << key << "=" << fmt(v) << "\n"; }

void print_kv(const std::string& key, const std::string& v) {
    std::cout << key << "=" << v << "\n";
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// .png loads as an image grid, .cxt as a matrix or image grid
TensorValue load_input(const std::string& path) {
    if (has_suffix(path, ".png")) return load_png(path);
    if (has_suffix(path, ".cxt")) return load_tensor(path);
    throw std::invalid_argument("unsupported input extension (want .png or .cxt): " + path);
}

FeatureSet to_features(const TensorValue& value, const PatchSpec& patch) {
    if (std::holds_alternative<ImageGrid>(value))
        return extract_patches(std::get<ImageGrid>(value), patch);
    return FeatureSet(std::get<Matrix>(value));
}

DistanceKind parse_distance(const std::string& name) {
    if (name == "cosine") return DistanceKind::cosine_target_centered;
    if (name == "l2") return DistanceKind::squared_euclidean;
    if (name == "l1") return DistanceKind::absolute;
    throw std::invalid_argument("unknown distance: " + name);
}

LossKind parse_loss_kind(const std::string& name) {
    if (name == "cx") return LossKind::cx;
    if (name == "l1") return LossKind::l1;
    if (name == "l2") return LossKind::l2;
    throw std::invalid_argument("unknown loss: " + name);
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

struct CompareArgs {
    std::string path_a, path_b;
    std::string loss = "cx";
    std::string distance = "cosine";
    double h = 0.5;
    double epsilon = 1e-5;
    std::size_t patch = 5, stride = 2;
    std::uint64_t match_seed = 0;
};

int run_compare(const CompareArgs& args) {
    const CxParams params{args.h, args.epsilon, parse_distance(args.distance)};
    validate(params);
    const PatchSpec patch{args.patch, args.stride};
    const TensorValue a = load_input(args.path_a);
    const TensorValue b = load_input(args.path_b);
    print_kv("measure", args.loss);
    print_kv("distance", args.distance);

    if (args.loss == "l1" || args.loss == "l2") {
        const std::vector<double>& va =
            std::holds_alternative<ImageGrid>(a) ? std::get<ImageGrid>(a).data : std::get<Matrix>(a).data;
        const std::vector<double>& vb =
            std::holds_alternative<ImageGrid>(b) ? std::get<ImageGrid>(b).data : std::get<Matrix>(b).data;
        if (va.size() != vb.size())
            throw std::invalid_argument("element counts differ: " + std::to_string(va.size()) +
                                        " vs " + std::to_string(vb.size()));
        const double value = args.loss == "l1" ? l1_loss(va, vb) : l2_loss(va, vb);
        print_kv("n", static_cast<double>(va.size()));
        print_kv("m", static_cast<double>(vb.size()));
        print_kv("d", 1.0);
        print_kv("h", args.h);
        print_kv("epsilon", args.epsilon);
        print_kv("value", value);
        return 0;
    }

    FeatureSet fa = to_features(a, patch);
    FeatureSet fb = to_features(b, patch);
    if ((args.loss == "cx" || args.loss == "dis") && fa.count() != fb.count()) {
        auto matched = subsample_to_match(fa, fb, args.match_seed);
        fa = std::move(matched.first);
        fb = std::move(matched.second);
    }
    print_kv("n", static_cast<double>(fa.count()));
    print_kv("m", static_cast<double>(fb.count()));
    print_kv("d", static_cast<double>(fa.dim()));
    print_kv("h", args.h);
    print_kv("epsilon", args.epsilon);

    if (args.loss == "cx") {
        const double value = contextual_similarity(fa, fb, params);
        print_kv("value", value);
        print_kv("loss", -std::log(value));
    } else if (args.loss == "dis") {
        print_kv("value", binarized_similarity(fa, fb, params.distance));
    } else if (args.loss == "feature-l1") {
        print_kv("value", feature_l1_loss(fa, fb));
    } else if (args.loss == "gram") {
        print_kv("value", gram_loss(fa, fb));
    } else {
        throw std::invalid_argument("unknown loss: " + args.loss);
    }
    return 0;
}

struct ExpectationArgs {
    std::string measure = "cx";
    std::size_t points = 100;
    std::size_t trials = 200;
    std::uint64_t seed = 0;
    double h = 0.1;
    int mu_min = 0, mu_max = 10, sigma_min = 0, sigma_max = 10;
    std::string out = "expectation.csv";
};

int run_expectation(const ExpectationArgs& args) {
    GridMeasure measure;
    if (args.measure == "cx")
        measure = GridMeasure::cx;
    else if (args.measure == "dis")
        measure = GridMeasure::dis;
    else if (args.measure == "l2")
        measure = GridMeasure::l2;
    else
        throw std::invalid_argument("unknown measure: " + args.measure);

    const GridSpec spec =
        GridSpec::integer_range(args.mu_min, args.mu_max, args.sigma_min, args.sigma_max);
    const ExperimentGrid grid =
        expectation_grid(measure, args.points, spec, args.h, args.trials, args.seed);
    write_text(args.out, to_csv(grid));

    // best cell: highest mean for similarity measures, lowest for l2
    std::size_t best_i = 0, best_j = 0;
    for (std::size_t i = 0; i < grid.mu_values.size(); ++i)
        for (std::size_t j = 0; j < grid.sigma_values.size(); ++j) {
            const double v = grid.cell(i, j).mean;
            const double best = grid.cell(best_i, best_j).mean;
            if (measure == GridMeasure::l2 ? v < best : v > best) {
                best_i = i;
                best_j = j;
            }
        }
    print_kv("measure", args.measure);
    print_kv("csv", args.out);
    print_kv("best_mu", grid.mu_values[best_i]);
    print_kv("best_sigma", grid.sigma_values[best_j]);
    print_kv("best_mean", grid.cell(best_i, best_j).mean);
    return 0;
}

struct DenoiseArgs {
    std::string image = "data/test_image_128.png";
    std::size_t crop = 64, targets = 8;
    int max_shift = 10;
    double noise = 0.1;
    std::size_t iters = 400;
    std::string losses = "cx,l1";
    std::optional<double> step;
    std::string schedule = "cycle";
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string report;
    double h = 0.5;
    double epsilon = 1e-5;
    std::string distance = "l2";
    std::size_t patch = 5, stride = 2;
    std::size_t log_every = 10;
};

int run_denoise(const DenoiseArgs& args) {
    std::vector<LossKind> losses;
    std::string token;
    for (char c : args.losses + ",") {
        if (c == ',') {
            if (!token.empty()) losses.push_back(parse_loss_kind(token));
            token.clear();
        } else {
            token += c;
        }
    }
    if (losses.empty()) throw std::invalid_argument("no losses requested");

    OptimizeConfig config;
    config.cx_params = CxParams{args.h, args.epsilon, parse_distance(args.distance)};
    validate(config.cx_params);
    config.patch = PatchSpec{args.patch, args.stride};
    config.iters = args.iters;
    config.step_size = args.step;
    config.target_schedule =
        args.schedule == "random" ? TargetSchedule::random : TargetSchedule::cycle;
    config.log_every = args.log_every;

    const ImageGrid clean = load_png(args.image);
    const DenoiseResult result = toy_denoise(clean, args.crop, args.targets, args.max_shift,
                                             args.noise, losses, config, args.seed);

    std::filesystem::create_directories(args.out_dir);
    const std::string report_path =
        args.report.empty() ? args.out_dir + "/report.json" : args.report;
    write_text(report_path,
               to_report(result, args.crop, args.targets, args.max_shift, args.noise, config,
                         args.seed));
    save_png(result.noisy, args.out_dir + "/input_noisy.png");
    save_png(result.ground_truth, args.out_dir + "/ground_truth.png");
    for (const DenoiseEntry& entry : result.entries)
        save_png(entry.image, args.out_dir + "/result_" + loss_name(entry.kind) + ".png");

    print_kv("report", report_path);
    print_kv("psnr_input", result.input_psnr);
    print_kv("hf_ratio_input", result.input_hf_ratio);
    for (const DenoiseEntry& entry : result.entries) {
        print_kv(std::string("psnr_") + loss_name(entry.kind), entry.psnr);
        print_kv(std::string("hf_ratio_") + loss_name(entry.kind), entry.hf_ratio);
    }
    return 0;
}

struct GradcheckArgs {
    std::size_t n = 8, m = 8, d = 5;
    std::string distance = "cosine";
    double h = 0.5;
    double epsilon = 1e-5;
    double step = 1e-5;
    std::size_t trials = 20;
    std::uint64_t seed = 0;
    double threshold = 1e-4;
};

int run_gradcheck(const GradcheckArgs& args) {
    if (args.trials < 1) throw std::invalid_argument("trials must be >= 1");
    const CxParams params{args.h, args.epsilon, parse_distance(args.distance)};
    validate(params);
    const FeatureSet x = sample_gaussian_features(args.n, args.d, 0.0, 1.0, derive_seed(args.seed, 1));
    const FeatureSet y = sample_gaussian_features(args.m, args.d, 0.0, 1.0, derive_seed(args.seed, 2));
    const GradReport report = grad_check(x, y, params, args.step, args.trials, args.seed);
    print_kv("max_abs_err", report.max_abs_err);
    print_kv("max_rel_err", report.max_rel_err);
    print_kv("checked_coords", static_cast<double>(report.checked_coords));
    print_kv("tie_margin", report.tie_margin);
    print_kv("skipped", static_cast<double>(report.skipped));
    return report.max_rel_err <= args.threshold ? 0 : 1;
}

int run_convert(const std::string& src, const std::string& dst) {
    const TensorValue value = load_input(src);
    if (has_suffix(dst, ".cxt")) {
        save_tensor(value, dst);
    } else if (has_suffix(dst, ".png")) {
        if (std::holds_alternative<ImageGrid>(value)) {
            save_png(std::get<ImageGrid>(value), dst);
        } else {
            const Matrix& m = std::get<Matrix>(value);
            save_png(ImageGrid(m.rows, m.cols, 1, m.data), dst);
        }
    } else {
        throw std::invalid_argument("unsupported output extension (want .png or .cxt): " + dst);
    }
    print_kv("wrote", dst);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contextual similarity toolkit"};
    app.fallthrough();
    // --h is a real flag (bandwidth), so help keeps only its long form
    app.set_help_flag("--help", "print help and exit");
    int workers = 0;
    app.add_option("--workers", workers, "worker thread cap (0 = auto); results never depend on it");

    CompareArgs cmp;
    CLI::App* compare = app.add_subcommand("compare", "compare two images or feature files");
    compare->set_help_flag("--help", "print help and exit");
    compare->add_option("a", cmp.path_a, "first input (.png or .cxt)")->required();
    compare->add_option("b", cmp.path_b, "second input (.png or .cxt)")->required();
    compare->add_option("--loss", cmp.loss, "cx|dis|l1|l2|feature-l1|gram");
    compare->add_option("--distance", cmp.distance, "cosine|l2|l1");
    compare->add_option("--h", cmp.h, "bandwidth");
    compare->add_option("--epsilon", cmp.epsilon, "row-min offset");
    compare->add_option("--patch", cmp.patch, "patch size for image inputs");
    compare->add_option("--stride", cmp.stride, "patch stride for image inputs");
    compare->add_option("--match-seed", cmp.match_seed, "seed for count matching");

    ExpectationArgs exp;
    CLI::App* expectation = app.add_subcommand("expectation", "Gaussian expectation grid");
    expectation->set_help_flag("--help", "print help and exit");
    expectation->add_option("--measure", exp.measure, "cx|dis|l2");
    expectation->add_option("--points", exp.points, "points per set");
    expectation->add_option("--trials", exp.trials, "Monte-Carlo trials per cell");
    expectation->add_option("--seed", exp.seed, "base seed");
    expectation->add_option("--h", exp.h, "bandwidth for cx");
    expectation->add_option("--mu-min", exp.mu_min, "grid mu lower bound");
    expectation->add_option("--mu-max", exp.mu_max, "grid mu upper bound");
    expectation->add_option("--sigma-min", exp.sigma_min, "grid sigma lower bound");
    expectation->add_option("--sigma-max", exp.sigma_max, "grid sigma upper bound");
    expectation->add_option("--out", exp.out, "CSV output path");

    DenoiseArgs den;
    CLI::App* denoise = app.add_subcommand("denoise", "misalignment-robust denoising comparison");
    denoise->set_help_flag("--help", "print help and exit");
    denoise->add_option("--image", den.image, "clean source image (PNG)");
    denoise->add_option("--crop", den.crop, "crop size");
    denoise->add_option("--targets", den.targets, "number of shifted targets");
    denoise->add_option("--max-shift", den.max_shift, "shift range per axis");
    denoise->add_option("--noise", den.noise, "noise stddev");
    denoise->add_option("--iters", den.iters, "optimization steps");
    denoise->add_option("--losses", den.losses, "comma list of cx,l1,l2");
    double step_flag = 0;
    CLI::Option* step_opt = denoise->add_option("--step", step_flag, "step size override");
    denoise->add_option("--schedule", den.schedule, "cycle|random");
    denoise->add_option("--seed", den.seed, "base seed");
    denoise->add_option("--out-dir", den.out_dir, "output directory");
    denoise->add_option("--report", den.report, "report path (default out-dir/report.json)");
    denoise->add_option("--h", den.h, "bandwidth");
    denoise->add_option("--epsilon", den.epsilon, "row-min offset");
    denoise->add_option("--distance", den.distance, "cosine|l2|l1");
    denoise->add_option("--patch", den.patch, "patch size");
    denoise->add_option("--stride", den.stride, "patch stride");
    denoise->add_option("--log-every", den.log_every, "trace logging period");

    GradcheckArgs grc;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gradcheck->set_help_flag("--help", "print help and exit");
    gradcheck->add_option("--n", grc.n, "candidate count");
    gradcheck->add_option("--m", grc.m, "target count");
    gradcheck->add_option("--d", grc.d, "feature dim");
    gradcheck->add_option("--distance", grc.distance, "cosine|l2|l1");
    gradcheck->add_option("--h", grc.h, "bandwidth");
    gradcheck->add_option("--epsilon", grc.epsilon, "row-min offset");
    gradcheck->add_option("--step", grc.step, "finite-difference step");
    gradcheck->add_option("--trials", grc.trials, "perturbed instances");
    gradcheck->add_option("--seed", grc.seed, "base seed");
    gradcheck->add_option("--threshold", grc.threshold, "pass bar on max_rel_err");

    std::string conv_src, conv_dst;
    CLI::App* convert = app.add_subcommand("tensor-convert", "convert between PNG and CXT");
    convert->set_help_flag("--help", "print help and exit");
    convert->add_option("src", conv_src, "input (.png or .cxt)")->required();
    convert->add_option("dst", conv_dst, "output (.png or .cxt)")->required();

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        set_worker_count(workers);
        if (*compare) return run_compare(cmp);
        if (*expectation) return run_expectation(exp);
        if (*denoise) {
            if (*step_opt) den.step = step_flag;
            return run_denoise(den);
        }
        if (*gradcheck) return run_gradcheck(grc);
        if (*convert) return run_convert(conv_src, conv_dst);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
