#include "mgst/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mgst/errors.hpp"
#include "mgst/fixtures.hpp"
#include "mgst/kernels/kernels.hpp"
#include "mgst/optimizer.hpp"
#include "mgst/png_io.hpp"
#include "mgst/pupil.hpp"

namespace mgst::cli {

namespace {

namespace fs = std::filesystem;

void apply_backend(const std::string& name) {
    if (name.empty())
        return;
    kernels::Backend b;
    if (name == "scalar")
        b = kernels::Backend::Scalar;
    else if (name == "avx2")
        b = kernels::Backend::Avx2;
    else
        throw FormatError("unknown kernel backend '" + name + "'");
    if (!kernels::set_backend(b))
        throw FormatError("kernel backend '" + name + "' is not supported on this CPU");
}

template <typename T>
std::pair<NetworkSpec<T>, AttentionSubnet<T>> make_network(const RunConfig& c) {
    std::string path = c.weights_path;
    if (path.empty()) {
        if (const char* env = std::getenv("MGST_WEIGHTS"))
            path = env;
    }
    if (path.empty()) {
        if (c.learned_attention)
            throw FormatError("learned attention requires a weights file with an "
                              "attention section");
        return {default_network<T>(c.net_seed), AttentionSubnet<T>::passthrough()};
    }
    WeightsFile<T> file = load_weights_file<T>(path);
    AttentionSubnet<T> subnet = AttentionSubnet<T>::passthrough();
    if (c.learned_attention) {
        if (!file.attention)
            throw FormatError("weights file " + path + " has no attention section");
        subnet = AttentionSubnet<T>::learned(std::move(*file.attention));
    }
    return {std::move(file.net), std::move(subnet)};
}

LossWeights weights_from(const RunConfig& c) {
    LossWeights w;
    w.lambda_g = c.lambda_g;
    w.lambda_l = c.lambda_l;
    w.alpha = c.alpha;
    w.beta = c.beta;
    w.theta = c.theta;
    w.literal_channel_sum = !c.drop_channel_factor;
    w.validate();
    return w;
}

std::string derived_path(const std::string& out_path, const char* suffix) {
    fs::path p(out_path);
    p.replace_extension();
    return p.string() + suffix;
}

// key=value config file for purify; a flag given on the command line wins
// over the file, the file wins over defaults.
void apply_config_file(const std::string& path, const CLI::App* cmd, RunConfig& run) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open config file " + path);

    const auto given = [&](const char* flag) { return cmd->count(flag) > 0; };
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(line_no) +
                              " is not key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto truthy = [&] { return value == "1" || value == "true"; };

        if (key == "content") {
            if (!given("--content")) run.content_path = value;
        } else if (key == "content-mask") {
            if (!given("--content-mask")) run.content_mask_path = value;
        } else if (key == "style") {
            if (!given("--style")) run.style_path = value;
        } else if (key == "style-mask") {
            if (!given("--style-mask")) run.style_mask_path = value;
        } else if (key == "out") {
            if (!given("--out")) run.out_path = value;
        } else if (key == "weights") {
            if (!given("--weights")) run.weights_path = value;
        } else if (key == "net-seed") {
            if (!given("--net-seed")) run.net_seed = std::stoull(value);
        } else if (key == "iters") {
            if (!given("--iters")) run.iterations = std::stoi(value);
        } else if (key == "alpha") {
            if (!given("--alpha")) run.alpha = std::stod(value);
        } else if (key == "beta") {
            if (!given("--beta")) run.beta = std::stod(value);
        } else if (key == "lambda-g") {
            if (!given("--lambda-g")) run.lambda_g = std::stod(value);
        } else if (key == "lambda-l") {
            if (!given("--lambda-l")) run.lambda_l = std::stod(value);
        } else if (key == "theta") {
            if (!given("--theta")) run.theta = std::stod(value);
        } else if (key == "seed") {
            if (!given("--seed")) run.seed = std::stoull(value);
        } else if (key == "threads") {
            if (!given("--threads")) run.threads = std::stoi(value);
        } else if (key == "warm-start") {
            if (!given("--warm-start")) run.warm_start = truthy();
        } else if (key == "channel-map") {
            if (!given("--channel-map")) run.channel_map = value;
        } else if (key == "trace") {
            if (!given("--trace")) run.trace_path = value;
        } else if (key == "loss-report") {
            if (!given("--loss-report")) run.loss_report_path = value;
        } else if (key == "trace-timings") {
            if (!given("--trace-timings")) run.trace_timings = truthy();
        } else if (key == "drop-channel-factor") {
            if (!given("--drop-channel-factor")) run.drop_channel_factor = truthy();
        } else if (key == "attention") {
            if (!given("--attention")) run.learned_attention = truthy();
        } else if (key == "backend") {
            if (!given("--backend")) run.backend = value;
        } else {
            throw FormatError("unknown config key '" + key + "' on line " +
                              std::to_string(line_no));
        }
    }
}

void write_file_or_throw(const std::string& path,
                         const std::function<void(std::ostream&)>& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot open " + path + " for writing");
    body(os);
    if (!os)
        throw IoError("write failure on " + path);
}

struct PurifyOutcome {
    LbfgsStatus status = LbfgsStatus::MaxIterations;
    int iterations = 0;
    double final_loss = 0.0;
};

PurifyOutcome purify_to_files(const RunConfig& c) {
    if (c.content_path.empty() || c.content_mask_path.empty() ||
        c.style_path.empty() || c.style_mask_path.empty() || c.out_path.empty())
        throw FormatError("purify needs --content, --content-mask, --style, "
                          "--style-mask and --out");

    const ChannelMap map = ChannelMap::parse(c.channel_map);
    const auto content =
        load_rgb_mask_pair<float>(c.content_path, c.content_mask_path, map);
    const auto style = load_rgb_mask_pair<float>(c.style_path, c.style_mask_path, map);
    auto [net, subnet] = make_network<float>(c);

    OptimizerConfig<float> oc;
    oc.lbfgs.max_iterations = c.iterations;
    oc.noise_seed = c.seed;
    oc.warm_start = c.warm_start;

    const PurifyResult<float> result =
        purify(content, style, net, subnet, weights_from(c), oc);

    save_image(result.output, c.out_path);
    const std::string trace_path =
        c.trace_path.empty() ? derived_path(c.out_path, ".trace.csv") : c.trace_path;
    const std::string loss_path = c.loss_report_path.empty()
                                      ? derived_path(c.out_path, ".loss.csv")
                                      : c.loss_report_path;
    write_file_or_throw(trace_path, [&](std::ostream& os) {
        write_trace_csv(os, result.trace, c.trace_timings);
    });
    write_file_or_throw(loss_path, [&](std::ostream& os) {
        if (!result.trace.reports.empty()) {
            write_loss_report_header(os, result.trace.reports.front());
            for (std::size_t i = 0; i < result.trace.reports.size(); ++i)
                write_loss_report_row(os, result.trace.iterates[i].iteration,
                                      result.trace.reports[i]);
        }
    });

    PurifyOutcome outcome;
    outcome.status = result.trace.status;
    outcome.iterations = static_cast<int>(result.trace.iterates.size()) - 1;
    outcome.final_loss = result.trace.iterates.back().loss;
    return outcome;
}

} // namespace

int run_purify(const RunConfig& config) {
    try {
        apply_backend(config.backend);
        const PurifyOutcome outcome = purify_to_files(config);
        std::cout << "purify: " << to_string(outcome.status) << " after "
                  << outcome.iterations << " iterations, loss " << outcome.final_loss
                  << "\n";
        return outcome.status == LbfgsStatus::Stalled ? kExitStalled : kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int run_batch(const std::string& manifest_path, const RunConfig& base) {
    struct Job {
        RunConfig config;
        int line = 0;
        int exit_code = kExitOk;
        std::string message;
    };

    std::vector<Job> jobs;
    try {
        apply_backend(base.backend);
        std::ifstream is(manifest_path);
        if (!is)
            throw IoError("cannot open manifest " + manifest_path);
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#')
                continue;
            std::istringstream fields(line);
            Job job;
            job.config = base;
            job.line = line_no;
            if (!(fields >> job.config.content_path >> job.config.content_mask_path >>
                  job.config.style_path >> job.config.style_mask_path >>
                  job.config.out_path)) {
                job.exit_code = kExitError;
                job.message = "manifest line does not have 5 fields";
            }
            job.config.trace_path.clear();
            job.config.loss_report_path.clear();
            jobs.push_back(std::move(job));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }

    std::atomic<std::size_t> next{0};
    const int n_threads = std::max(1, std::min<int>(base.threads,
                                                    static_cast<int>(jobs.size())));
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size())
                return;
            Job& job = jobs[i];
            if (job.exit_code != kExitOk)
                continue; // malformed line
            try {
                const PurifyOutcome outcome = purify_to_files(job.config);
                job.exit_code =
                    outcome.status == LbfgsStatus::Stalled ? kExitStalled : kExitOk;
                job.message = to_string(outcome.status);
            } catch (const Error& e) {
                job.exit_code = kExitError;
                job.message = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();

    int failures = 0;
    std::printf("%-6s %-40s %s\n", "line", "output", "result");
    for (const auto& job : jobs) {
        if (job.exit_code == kExitError)
            ++failures;
        std::printf("%-6d %-40s %s\n", job.line, job.config.out_path.c_str(),
                    job.exit_code == kExitOk ? "ok" : job.message.c_str());
    }
    std::printf("batch: %zu jobs, %d failed\n", jobs.size(), failures);
    return failures == 0 ? kExitOk : kExitError;
}

int run_benchmark(const BenchmarkConfig& config) {
    try {
        if (config.repetitions < 1)
            throw FormatError("--reps must be at least 1");
        if (config.resolutions.empty())
            throw FormatError("no resolutions given");
        for (int r : config.resolutions)
            if (r < 8 || r % 4 != 0)
                throw FormatError("resolutions must be >= 8 and divisible by 4");

        struct Cell {
            double mean_iter_s = 0.0, std_iter_s = 0.0;
            double mean_total_s = 0.0, std_total_s = 0.0;
        };
        const auto backends = kernels::supported_backends();
        const kernels::Backend previous = kernels::active_backend();
        std::vector<std::vector<Cell>> table(backends.size());

        const NetworkSpec<float> net = default_network<float>(config.net_seed);
        const auto subnet = AttentionSubnet<float>::passthrough();
        const LossWeights weights;

        for (std::size_t bi = 0; bi < backends.size(); ++bi) {
            kernels::set_backend(backends[bi]);
            for (int res : config.resolutions) {
                const auto content = make_toy_pair<float>(res, res, ToyLook::Real, 1);
                const auto style =
                    make_toy_pair<float>(res, res, ToyLook::Synthetic, 2);
                std::vector<double> iter_s, total_s;
                for (int rep = 0; rep < config.repetitions; ++rep) {
                    OptimizerConfig<float> oc;
                    oc.lbfgs.max_iterations = config.iterations;
                    oc.noise_seed = 0;
                    const auto t0 = std::chrono::steady_clock::now();
                    const auto result = purify(content, style, net, subnet, weights, oc);
                    const auto t1 = std::chrono::steady_clock::now();
                    const double secs = std::chrono::duration<double>(t1 - t0).count();
                    const int iters = std::max<int>(
                        1, static_cast<int>(result.trace.iterates.size()) - 1);
                    total_s.push_back(secs);
                    iter_s.push_back(secs / iters);
                }
                auto stats = [](const std::vector<double>& v) {
                    double mean = 0.0;
                    for (double x : v)
                        mean += x;
                    mean /= static_cast<double>(v.size());
                    double var = 0.0;
                    for (double x : v)
                        var += (x - mean) * (x - mean);
                    var /= static_cast<double>(v.size());
                    return std::pair<double, double>(mean, std::sqrt(var));
                };
                Cell cell;
                std::tie(cell.mean_iter_s, cell.std_iter_s) = stats(iter_s);
                std::tie(cell.mean_total_s, cell.std_total_s) = stats(total_s);
                table[bi].push_back(cell);
            }
        }
        kernels::set_backend(previous);

        std::printf("%-8s", "method");
        for (int res : config.resolutions)
            std::printf(" %14dx%-4d", res, res);
        std::printf("  (s/iteration, mean +/- std over %d reps)\n", config.repetitions);
        for (std::size_t bi = 0; bi < backends.size(); ++bi) {
            std::printf("%-8s", std::string(kernels::backend_name(backends[bi])).c_str());
            for (const auto& cell : table[bi])
                std::printf(" %10.4f+/-%-7.4f", cell.mean_iter_s, cell.std_iter_s);
            std::printf("\n");
        }
        std::printf("%-8s", "");
        for (std::size_t bi = 0; bi < backends.size(); ++bi) {
            std::printf("%s full runs:", std::string(kernels::backend_name(backends[bi])).c_str());
            for (const auto& cell : table[bi])
                std::printf(" %.3fs+/-%.3fs", cell.mean_total_s, cell.std_total_s);
            std::printf("  ");
        }
        std::printf("\n");

        write_file_or_throw(config.csv_path, [&](std::ostream& os) {
            os << "method";
            for (int res : config.resolutions)
                os << ',' << res;
            os << '\n';
            const auto old_precision = os.precision(9);
            for (std::size_t bi = 0; bi < backends.size(); ++bi) {
                os << kernels::backend_name(backends[bi]);
                for (const auto& cell : table[bi])
                    os << ',' << cell.mean_iter_s;
                os << '\n';
            }
            os.precision(old_precision);
        });
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

double gradcheck_max_error(const GradcheckConfig& config) {
    if (config.height < 8 || config.height > 32 || config.width < 8 ||
        config.width > 32)
        throw FormatError("gradcheck dimensions must be within [8, 32]");
    if (config.height % 4 != 0 || config.width % 4 != 0)
        throw FormatError("gradcheck dimensions must be divisible by 4");

    const NetworkSpec<double> net = default_network<double>(7);
    const auto subnet = AttentionSubnet<double>::passthrough();

    double max_rel = 0.0;
    for (int inst = 0; inst < config.instances; ++inst) {
        const std::uint64_t base = config.seed * 1000 + static_cast<std::uint64_t>(inst) * 3;
        const auto content =
            make_toy_pair<double>(config.height, config.width, ToyLook::Real, base + 1);
        const auto style = make_toy_pair<double>(config.height, config.width,
                                                 ToyLook::Synthetic, base + 2);
        Objective<double> objective(content, style, net, subnet, config.weights);
        objective.set_negate_tv_gradient(config.corrupt_tv);

        Image<double> point =
            white_noise_image<double>(config.height, config.width, base + 3);
        Image<double> grad;
        objective.evaluate(point, &grad);

        double* p = point.data();
        for (std::size_t i = 0; i < point.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + config.step;
            const double f_plus = objective.evaluate(point, nullptr).total;
            p[i] = saved - config.step;
            const double f_minus = objective.evaluate(point, nullptr).total;
            p[i] = saved;
            const double fd = (f_plus - f_minus) / (2.0 * config.step);
            const double an = grad.data()[i];
            const double rel = std::abs(fd - an) /
                               std::max({1.0, std::abs(fd), std::abs(an)});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

int run_gradcheck(const GradcheckConfig& config) {
    try {
        const double max_rel = gradcheck_max_error(config);
        std::printf("gradcheck: %d instance(s) at %dx%d, h=%g: max relative error %.3e "
                    "(tolerance %.1e)\n",
                    config.instances, config.height, config.width, config.step,
                    max_rel, config.tolerance);
        return max_rel <= config.tolerance ? kExitOk : kExitToleranceExceeded;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int run_preserve_check(const PreserveCheckConfig& config) {
    try {
        const ChannelMap map = ChannelMap::parse(config.channel_map);
        const auto before = load_rgb_mask_pair<float>(config.content_path,
                                                      config.content_mask_path, map);
        const auto after = load_rgb_png<float>(config.purified_path);
        const double eye_width =
            config.eye_width > 0.0 ? config.eye_width : before.image.width();
        const PupilCenterResult res =
            preserve_check(before, after, config.channel, eye_width);
        std::printf("pupil center before: (%.3f, %.3f)\n", res.center_before.x,
                    res.center_before.y);
        std::printf("pupil center after:  (%.3f, %.3f)\n", res.center_after.x,
                    res.center_after.y);
        std::printf("shift: %.3f px (%.4f of eye width %.1f px)\n", res.shift_px,
                    res.shift_normalized, res.eye_width_px);
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int run_make_weights(const std::string& out_path, std::uint64_t net_seed) {
    try {
        if (out_path.empty())
            throw FormatError("make-weights needs --out");
        write_weights(default_network<float>(net_seed), out_path);
        std::cout << "wrote " << out_path << "\n";
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int run_cli(int argc, char** argv) {
    CLI::App app{"mask-guided style transfer: purify photographs toward a "
                 "synthetic reference, region by region"};
    app.require_subcommand(1);

    RunConfig run;
    BenchmarkConfig bench;
    GradcheckConfig gradcheck;
    PreserveCheckConfig preserve;
    std::string manifest_path;
    std::string weights_out;
    std::uint64_t weights_seed = 7;

    const auto add_run_flags = [&](CLI::App* cmd, bool with_paths) {
        if (with_paths) {
            cmd->add_option("--content", run.content_path, "content image (8-bit RGB PNG)");
            cmd->add_option("--content-mask", run.content_mask_path,
                            "content label mask (8-bit gray/paletted PNG)");
            cmd->add_option("--style", run.style_path, "style image (8-bit RGB PNG)");
            cmd->add_option("--style-mask", run.style_mask_path, "style label mask");
            cmd->add_option("--out", run.out_path, "output PNG path");
        }
        cmd->add_option("--weights", run.weights_path,
                        "MGST-W weights file (default: $MGST_WEIGHTS, else seeded)");
        cmd->add_option("--net-seed", run.net_seed,
                        "seed for the default network weights")->capture_default_str();
        cmd->add_option("--iters", run.iterations, "maximum iterations")->capture_default_str();
        cmd->add_option("--alpha", run.alpha, "content layer weight")->capture_default_str();
        cmd->add_option("--beta", run.beta, "style layer weight")->capture_default_str();
        cmd->add_option("--lambda-g", run.lambda_g, "global-term weight")->capture_default_str();
        cmd->add_option("--lambda-l", run.lambda_l, "local-term weight")->capture_default_str();
        cmd->add_option("--theta", run.theta, "total-variation weight")->capture_default_str();
        cmd->add_option("--seed", run.seed, "white-noise init seed")->capture_default_str();
        cmd->add_option("--threads", run.threads, "concurrent batch jobs")->capture_default_str();
        cmd->add_flag("--warm-start", run.warm_start,
                      "initialize from the content image instead of noise");
        cmd->add_option("--channel-map", run.channel_map,
                        "label=channel[,label=channel...]; channel 'skip' drops a label")->capture_default_str();
        cmd->add_option("--trace", run.trace_path,
                        "optimizer trace CSV (default: <out>.trace.csv)");
        cmd->add_option("--loss-report", run.loss_report_path,
                        "per-iteration loss CSV (default: <out>.loss.csv)");
        cmd->add_flag("--trace-timings", run.trace_timings,
                      "include wall-clock ms in the trace CSV (breaks byte-for-byte "
                      "reproducibility)");
        cmd->add_flag("--drop-channel-factor", run.drop_channel_factor,
                      "drop the mask-channel-count factor on the global content term");
        cmd->add_flag("--attention", run.learned_attention,
                      "use the learned attention section of the weights file");
        cmd->add_option("--backend", run.backend, "kernel backend: scalar or avx2")
            ->check(CLI::IsMember({"scalar", "avx2"}));
    };

    CLI::App* cmd_purify = app.add_subcommand("purify", "purify one RGB-mask pair");
    std::string config_path;
    cmd_purify->add_option("--config", config_path,
                           "key=value config file (explicit flags win)");
    add_run_flags(cmd_purify, true);

    CLI::App* cmd_batch =
        app.add_subcommand("batch", "run a manifest of purify jobs");
    cmd_batch->add_option("manifest", manifest_path,
                          "file with one 'content content-mask style style-mask out' "
                          "line per job")
        ->required();
    add_run_flags(cmd_batch, false);

    CLI::App* cmd_bench = app.add_subcommand(
        "benchmark", "time purify iterations per kernel backend and resolution");
    cmd_bench->add_option("--resolutions", bench.resolutions,
                          "square resolutions to time")->capture_default_str()
        ->delimiter(',');
    cmd_bench->add_option("--reps", bench.repetitions, "repetitions per cell")->capture_default_str();
    cmd_bench->add_option("--iters", bench.iterations, "iterations per run")->capture_default_str();
    cmd_bench->add_option("--net-seed", bench.net_seed, "default-network seed")->capture_default_str();
    cmd_bench->add_option("--csv", bench.csv_path, "output CSV path")->capture_default_str();

    CLI::App* cmd_grad = app.add_subcommand(
        "gradcheck", "compare the analytic gradient against central differences");
    cmd_grad->add_option("--seed", gradcheck.seed, "instance seed")->capture_default_str();
    cmd_grad->add_option("--height", gradcheck.height, "instance height")->capture_default_str();
    cmd_grad->add_option("--width", gradcheck.width, "instance width")->capture_default_str();
    cmd_grad->add_option("--instances", gradcheck.instances, "instance count")->capture_default_str();
    cmd_grad->add_option("--tol", gradcheck.tolerance, "max relative error")->capture_default_str();
    cmd_grad->add_option("--step", gradcheck.step, "finite-difference step")->capture_default_str();
    cmd_grad->add_option("--alpha", gradcheck.weights.alpha, "content weight")->capture_default_str();
    cmd_grad->add_option("--beta", gradcheck.weights.beta, "style weight")->capture_default_str();
    cmd_grad->add_option("--lambda-g", gradcheck.weights.lambda_g, "global weight")->capture_default_str();
    cmd_grad->add_option("--lambda-l", gradcheck.weights.lambda_l, "local weight")->capture_default_str();
    cmd_grad->add_option("--theta", gradcheck.weights.theta, "TV weight")->capture_default_str();
    cmd_grad->add_flag("--corrupt-tv", gradcheck.corrupt_tv,
                       "debug: negate the TV gradient (must be caught)");

    CLI::App* cmd_preserve = app.add_subcommand(
        "preserve-check", "pupil-center shift between content and purified image");
    cmd_preserve->add_option("--content", preserve.content_path, "content image")
        ->required();
    cmd_preserve->add_option("--content-mask", preserve.content_mask_path,
                             "content label mask")
        ->required();
    cmd_preserve->add_option("--purified", preserve.purified_path, "purified image")
        ->required();
    cmd_preserve->add_option("--channel-map", preserve.channel_map,
                             "label=channel assignments")->capture_default_str();
    cmd_preserve->add_option("--channel", preserve.channel, "mask channel")->capture_default_str();
    cmd_preserve->add_option("--eye-width", preserve.eye_width,
                             "reference eye width in px (default: image width)");

    CLI::App* cmd_weights = app.add_subcommand(
        "make-weights", "write the seeded default network as an MGST-W file");
    cmd_weights->add_option("--out", weights_out, "output path")->required();
    cmd_weights->add_option("--net-seed", weights_seed, "network seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }

    if (app.got_subcommand(cmd_purify)) {
        if (!config_path.empty()) {
            try {
                apply_config_file(config_path, cmd_purify, run);
            } catch (const Error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitError;
            }
        }
        return run_purify(run);
    }
    if (app.got_subcommand(cmd_batch))
        return run_batch(manifest_path, run);
    if (app.got_subcommand(cmd_bench))
        return run_benchmark(bench);
    if (app.got_subcommand(cmd_grad))
        return run_gradcheck(gradcheck);
    if (app.got_subcommand(cmd_preserve))
        return run_preserve_check(preserve);
    if (app.got_subcommand(cmd_weights))
        return run_make_weights(weights_out, weights_seed);
    return kExitError;
}

} // namespace mgst::cli
