#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgst/loss.hpp"

namespace mgst::cli {

/// Exit codes shared by all subcommands.
enum ExitCode : int {
    kExitOk = 0,
    kExitError = 1,
    kExitStalled = 2,
    kExitToleranceExceeded = 3,
};

/// Everything a purification run needs. CLI flags override config-file
/// values, which override these defaults.
struct RunConfig {
    std::string content_path;
    std::string content_mask_path;
    std::string style_path;
    std::string style_mask_path;
    std::string out_path;

    std::string weights_path; // empty: MGST_WEIGHTS env, then seeded default
    std::uint64_t net_seed = 7;
    bool learned_attention = false;

    int iterations = 500;
    double alpha = 100.0;
    double beta = 10000.0;
    double lambda_g = 1.0;
    double lambda_l = 1.0;
    double theta = 1e-3;
    bool drop_channel_factor = false;

    std::uint64_t seed = 0;
    bool warm_start = false;
    int threads = 1;

    std::string channel_map = "0=skip,1=0";
    std::string trace_path;       // default: out path with .trace.csv
    std::string loss_report_path; // default: out path with .loss.csv
    bool trace_timings = false;
    std::string backend; // "", "scalar" or "avx2"
};

int run_purify(const RunConfig& config);

/// Manifest: one "content content-mask style style-mask out" line per job;
/// blank lines and #-comments are skipped. Failing jobs do not abort the
/// batch. Runs up to config.threads jobs concurrently.
int run_batch(const std::string& manifest_path, const RunConfig& config);

struct BenchmarkConfig {
    std::vector<int> resolutions = {64, 128, 256};
    int repetitions = 3;
    int iterations = 10;
    std::uint64_t net_seed = 7;
    std::string csv_path = "benchmark.csv";
};

int run_benchmark(const BenchmarkConfig& config);

struct GradcheckConfig {
    std::uint64_t seed = 1;
    int height = 16;
    int width = 16;
    int instances = 1;
    double tolerance = 1e-4;
    double step = 1e-2;
    bool corrupt_tv = false; // debug: negate the TV gradient
    LossWeights weights;
};

/// Returns the max relative error across instances; used by the CLI and the
/// acceptance suite.
double gradcheck_max_error(const GradcheckConfig& config);

int run_gradcheck(const GradcheckConfig& config);

struct PreserveCheckConfig {
    std::string content_path;
    std::string content_mask_path;
    std::string purified_path;
    std::string channel_map = "0=skip,1=0";
    int channel = 0;
    double eye_width = 0.0; // 0: use the image width
};

int run_preserve_check(const PreserveCheckConfig& config);

int run_make_weights(const std::string& out_path, std::uint64_t net_seed);

/// Full argument parser; the mgst binary forwards straight here.
int run_cli(int argc, char** argv);

} // namespace mgst::cli
