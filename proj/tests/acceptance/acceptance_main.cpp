// Acceptance suite: runs every gate the project must hold, one line of
// output per criterion, nonzero exit if any gate fails. Heavier fixtures
// (the 32x32 descent run, the 64x64 preserve check) live here rather than
// in the unit suite.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mgst/attention.hpp"
#include "mgst/cli.hpp"
#include "mgst/fixtures.hpp"
#include "mgst/kernels/kernels.hpp"
#include "mgst/lbfgs.hpp"
#include "mgst/loss.hpp"
#include "mgst/optimizer.hpp"
#include "mgst/png_io.hpp"
#include "mgst/prng.hpp"
#include "mgst/pupil.hpp"

using namespace mgst;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int number;
    const char* label;
    std::function<bool(std::string&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "mgst_acceptance";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// --- criterion 1 -----------------------------------------------------------

bool partition_of_unity(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    Lcg64 rng(101);
    double worst_pass = 0.0, worst_learned = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int h = 4 + static_cast<int>(rng.next_unit() * 9);
        const int w = 4 + static_cast<int>(rng.next_unit() * 9);
        const int n = 3 + static_cast<int>(rng.next_unit() * 6);
        const int channels = 1 + static_cast<int>(rng.next_unit() * 3);

        FeaturePyramid<double> features;
        FeatureLayer<double> feat;
        feat.layer_id = 0;
        feat.n_filters = n;
        feat.height = h;
        feat.width = w;
        feat.values.resize(static_cast<std::size_t>(n) * h * w);
        for (auto& v : feat.values)
            v = rng.next_unit() * 200.0 - 50.0;
        features.layers.push_back(std::move(feat));

        MaskPyramid<double> masks;
        MaskLayer<double> mask;
        mask.layer_id = 0;
        mask.height = h;
        mask.width = w;
        for (int c = 0; c < channels; ++c) {
            std::vector<double> channel(static_cast<std::size_t>(h) * w);
            for (auto& v : channel)
                v = rng.next_unit();
            mask.channels.push_back(std::move(channel));
        }
        masks.layers.push_back(std::move(mask));

        const auto check = [&](const AttentionPyramid<double>& attn) {
            double worst = 0.0;
            for (const auto& layer : attn.layers)
                for (std::size_t c = 0; c < layer.att_plus.size(); ++c) {
                    const auto minus = layer.att_minus(static_cast<int>(c));
                    for (std::size_t j = 0; j < minus.size(); ++j)
                        worst = std::max(
                            worst, std::abs(layer.att_plus[c][j] + minus[j] - 1.0));
                }
            return worst;
        };

        worst_pass = std::max(
            check(compute_attention(AttentionSubnet<double>::passthrough(), features,
                                    masks)),
            worst_pass);

        AttentionParams<double> p;
        p.layer_id = 0;
        p.weight.resize(n + 1);
        for (auto& v : p.weight)
            v = rng.next_unit() * 0.02 - 0.01;
        p.bias = rng.next_unit() - 0.5;
        worst_learned = std::max(
            check(compute_attention(AttentionSubnet<double>::learned({p}), features,
                                    masks)),
            worst_learned);
    }
    const double elapsed = seconds_since(start);
    std::ostringstream os;
    os << "passthrough max dev " << worst_pass << ", learned " << worst_learned
       << ", " << elapsed << " s";
    detail = os.str();
    return worst_pass == 0.0 && worst_learned <= 1e-6 && elapsed < 1.0;
}

// --- criterion 2 -----------------------------------------------------------

bool gradient_oracle(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    cli::GradcheckConfig config;
    config.seed = 1;
    config.instances = 10;
    const double max_rel = cli::gradcheck_max_error(config);
    const double elapsed = seconds_since(start);
    std::ostringstream os;
    os << "max relative error " << max_rel << " over 10 instances, " << elapsed
       << " s";
    detail = os.str();
    return max_rel <= 1e-4 && elapsed < 120.0;
}

// --- criterion 3 -----------------------------------------------------------

bool zero_loss_fixed_points(std::string& detail) {
    const auto net = default_network<double>(7);
    const auto subnet = AttentionSubnet<double>::passthrough();
    const LossWeights w;

    const auto content = make_toy_pair<double>(16, 16, ToyLook::Real, 301);
    const RgbMaskPair<double> style(
        make_toy_pair<double>(16, 16, ToyLook::Synthetic, 302).image, content.mask);

    // O = I: the content family vanishes exactly.
    const Objective<double> objective(content, style, net, subnet, w);
    const LossReport at_i = objective.evaluate(content.image, nullptr);
    for (const auto& layer : at_i.layers)
        if (layer.gc != 0.0 || layer.lc != 0.0) {
            detail = "content loss not exactly zero at O = I";
            return false;
        }

    // O = S with equal masks: the style family vanishes.
    const LossReport at_s = objective.evaluate(style.image, nullptr);
    for (const auto& layer : at_s.layers)
        if (std::abs(layer.gs) > 1e-9 || std::abs(layer.ls) > 1e-9) {
            detail = "style loss not zero at O = S";
            return false;
        }

    // Both families zero: total reduces to theta * tv.
    const Objective<double> self(content, content, net, subnet, w);
    const LossReport both = self.evaluate(content.image, nullptr);
    const double expect = w.theta * both.tv;
    const double rel = std::abs(both.total - expect) / std::max(1e-300, expect);
    std::ostringstream os;
    os << "total vs theta*tv relative gap " << rel;
    detail = os.str();
    return rel <= 1e-9;
}

// --- criterion 4 -----------------------------------------------------------

bool masked_gram_brute_force(std::string& detail) {
    Lcg64 rng(401);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_unit() * 8);
        const int m = 1 + static_cast<int>(rng.next_unit() * 36);
        std::vector<double> f(static_cast<std::size_t>(n) * m), a(m);
        for (auto& v : f)
            v = rng.next_unit() * 4.0 - 2.0;
        for (auto& v : a)
            v = rng.next_unit() < 0.5 ? 0.0 : 1.0;

        const GramMatrix g = masked_gram(f.data(), a.data(), n, m);

        // Direct triple loop over the explicitly zeroed matrix.
        std::vector<double> zeroed(f.size());
        for (int p = 0; p < n; ++p)
            for (int j = 0; j < m; ++j)
                zeroed[p * m + j] = f[p * m + j] * a[j];
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) {
                double acc = 0.0;
                for (int j = 0; j < m; ++j)
                    acc += zeroed[p * m + j] * zeroed[q * m + j];
                worst = std::max(worst, std::abs(acc - g.at(p, q)));
            }
    }
    std::ostringstream os;
    os << "max abs deviation " << worst;
    detail = os.str();
    return worst <= 1e-10;
}

// --- criterion 5 -----------------------------------------------------------

bool classic_limit(std::string& detail) {
    const auto net = default_network<double>(7);
    const auto subnet = AttentionSubnet<double>::passthrough();
    const auto content = make_toy_pair<double>(16, 16, ToyLook::Real, 501);
    const auto style = make_toy_pair<double>(16, 16, ToyLook::Synthetic, 502);
    const auto output = white_noise_image<double>(16, 16, 503);
    const Image<double> ones(16, 16, 1, 1.0);

    const auto feats_o = forward(net, output);
    const auto feats_i = forward(net, content.image);
    const auto feats_s = forward(net, style.image);
    const auto masks = downsample_mask(ones, net);
    const auto attn_i = compute_attention(subnet, feats_i, masks);
    const auto attn_s = compute_attention(subnet, feats_s, masks);
    const auto streams_o = build_streams(feats_o, attn_i);
    const auto streams_i = build_streams(feats_i, attn_i);
    const auto streams_s = build_streams(feats_s, attn_s);

    const LossWeights w;
    double worst_rel = 0.0;
    for (int tap : net.tap_layer_ids()) {
        const auto c = content_loss(streams_o, streams_i, attn_i, w, tap);
        if (c.lc != c.gc) {
            detail = "lc != gc under all-ones attention";
            return false;
        }
        const auto s = style_loss(streams_o, attn_i, streams_s, attn_s, w, tap);

        const auto& lo = streams_o.by_id(tap);
        const auto& ls = streams_s.by_id(tap);
        const int n = lo.n_filters, m = lo.spatial();
        std::vector<double> g_o(static_cast<std::size_t>(n) * n, 0.0), g_s(g_o);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
                for (int j = 0; j < m; ++j) {
                    g_o[p * n + q] += lo.full[p * m + j] * lo.full[q * m + j];
                    g_s[p * n + q] += ls.full[p * m + j] * ls.full[q * m + j];
                }
        double classic = 0.0;
        for (std::size_t i = 0; i < g_o.size(); ++i) {
            const double d = g_o[i] - g_s[i];
            classic += d * d;
        }
        classic /= 4.0 * n * n * static_cast<double>(m) * m;
        worst_rel = std::max(worst_rel,
                             std::abs(s.ls - classic) / std::max(1e-300, classic));
    }
    std::ostringstream os;
    os << "max relative gap to unmasked Gram loss " << worst_rel;
    detail = os.str();
    return worst_rel <= 1e-9;
}

// --- criterion 6 -----------------------------------------------------------

bool optimization_descent(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    // Frozen fixture: 32x32 toy pairs (content seed 11, style seed 12),
    // default network seed 7, white-noise seed 1.
    const auto content = make_toy_pair<float>(32, 32, ToyLook::Real, 11);
    const auto style = make_toy_pair<float>(32, 32, ToyLook::Synthetic, 12);
    const auto net = default_network<float>(7);

    OptimizerConfig<float> config;
    config.lbfgs.max_iterations = 200;
    config.noise_seed = 1;
    const auto result = purify(content, style, net,
                               AttentionSubnet<float>::passthrough(), LossWeights{},
                               config);

    bool monotone = true;
    for (std::size_t k = 1; k < result.trace.iterates.size(); ++k)
        monotone = monotone &&
                   result.trace.iterates[k].loss <= result.trace.iterates[k - 1].loss;
    bool in_box = true;
    for (std::size_t i = 0; i < result.output.size(); ++i)
        in_box = in_box && result.output.data()[i] >= 0.0f &&
                 result.output.data()[i] <= 255.0f;

    const double ratio =
        result.trace.iterates.back().loss / result.trace.iterates.front().loss;
    const double elapsed = seconds_since(start);
    std::ostringstream os;
    os << "loss ratio " << ratio << " after "
       << result.trace.iterates.back().iteration << " iterations, monotone "
       << (monotone ? "yes" : "no") << ", " << elapsed << " s";
    detail = os.str();
    return monotone && in_box && ratio <= 0.1 && elapsed < 300.0;
}

// --- criterion 7 -----------------------------------------------------------

bool projected_quadratic(std::string& detail) {
    std::vector<double> c = {300.0, -50.0, 120.0, 500.0, -1.0,
                             255.5, 0.25,  90.0,  260.0, -300.0};
    std::vector<double> x(c.size(), 128.0);
    LbfgsOptions<double> opt;
    opt.max_iterations = 50;
    lbfgs_minimize<double>(
        x,
        [&](const std::vector<double>& p, std::vector<double>* grad) {
            double f = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double d = p[i] - c[i];
                f += 0.5 * d * d;
                if (grad)
                    (*grad)[i] = d;
            }
            return f;
        },
        opt, nullptr);

    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        worst = std::max(worst,
                         std::abs(x[i] - std::min(255.0, std::max(0.0, c[i]))));
    std::ostringstream os;
    os << "max abs distance to box projection " << worst;
    detail = os.str();
    return worst <= 1e-6;
}

// --- criterion 8 -----------------------------------------------------------

bool determinism(std::string& detail) {
    const auto dir = work_dir();
    const auto content = make_toy_pair<float>(32, 32, ToyLook::Real, 801);
    const auto style = make_toy_pair<float>(32, 32, ToyLook::Synthetic, 802);
    save_image(content.image, dir / "det_content.png");
    save_label_mask(content.mask, dir / "det_content_mask.png");
    save_image(style.image, dir / "det_style.png");
    save_label_mask(style.mask, dir / "det_style_mask.png");

    const auto run_once = [&](const char* out) {
        const std::string cmd =
            std::string(MGST_CLI_PATH) + " purify --content " +
            (dir / "det_content.png").string() + " --content-mask " +
            (dir / "det_content_mask.png").string() + " --style " +
            (dir / "det_style.png").string() + " --style-mask " +
            (dir / "det_style_mask.png").string() + " --out " +
            (dir / out).string() + " --iters 40 --seed 9 --threads 1 >" +
            (dir / "det.log").string() + " 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    if (!run_once("det_a.png") || !run_once("det_b.png")) {
        detail = "purify run failed";
        return false;
    }
    const bool png_equal = slurp(dir / "det_a.png") == slurp(dir / "det_b.png");
    const bool trace_equal =
        slurp(dir / "det_a.trace.csv") == slurp(dir / "det_b.trace.csv");
    const bool loss_equal =
        slurp(dir / "det_a.loss.csv") == slurp(dir / "det_b.loss.csv");
    std::ostringstream os;
    os << "png " << (png_equal ? "identical" : "DIFFER") << ", trace csv "
       << (trace_equal ? "identical" : "DIFFER") << ", loss csv "
       << (loss_equal ? "identical" : "DIFFER");
    detail = os.str();
    return png_equal && trace_equal && loss_equal;
}

// --- criterion 9 -----------------------------------------------------------

bool preserve_surrogate(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    // Frozen fixture: 64x64 toy pairs (content seed 31, style seed 32),
    // network seed 7, noise seed 1, 300 iterations, default weights.
    const auto content = make_toy_pair<float>(64, 64, ToyLook::Real, 31);
    const auto style = make_toy_pair<float>(64, 64, ToyLook::Synthetic, 32);
    const auto net = default_network<float>(7);

    OptimizerConfig<float> config;
    config.lbfgs.max_iterations = 300;
    config.noise_seed = 1;
    const auto result = purify(content, style, net,
                               AttentionSubnet<float>::passthrough(), LossWeights{},
                               config);

    const PupilCenterResult res = preserve_check(content, result.output, 0, 64.0);
    const double elapsed = seconds_since(start);
    std::ostringstream os;
    os << "pupil shift " << res.shift_px << " px at eye width 64 px, " << elapsed
       << " s";
    detail = os.str();
    return res.shift_px <= 2.0;
}

// --- criterion 10 ----------------------------------------------------------

bool benchmark_harness(std::string& detail) {
    const auto dir = work_dir();
    const auto csv_path = dir / "benchmark.csv";
    cli::BenchmarkConfig config;
    config.resolutions = {64, 128, 256};
    config.repetitions = 2;
    config.iterations = 3;
    config.csv_path = csv_path.string();
    if (cli::run_benchmark(config) != cli::kExitOk) {
        detail = "benchmark command failed";
        return false;
    }

    std::ifstream is(csv_path);
    std::string header;
    if (!std::getline(is, header) || header != "method,64,128,256") {
        detail = "unexpected CSV header: " + header;
        return false;
    }
    int rows = 0;
    bool ok = true;
    std::ostringstream seen;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        ++rows;
        std::istringstream fields(line);
        std::string method;
        std::getline(fields, method, ',');
        double prev = 0.0;
        std::string cell;
        seen << (rows > 1 ? "; " : "") << method << ":";
        while (std::getline(fields, cell, ',')) {
            const double v = std::stod(cell);
            seen << ' ' << v;
            ok = ok && v > 0.0 && v > prev;
            prev = v;
        }
    }
    detail = "per-iteration seconds " + seen.str();
    return ok && rows >= 1;
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "partition of unity over 100 random instances", partition_of_unity},
        {2, "analytic gradient vs central differences (10x 16x16, h=1e-2)",
         gradient_oracle},
        {3, "zero-loss fixed points", zero_loss_fixed_points},
        {4, "masked Gram vs brute force (50 instances)", masked_gram_brute_force},
        {5, "classic limit under all-ones attention", classic_limit},
        {6, "projected L-BFGS descent on the 32x32 fixture", optimization_descent},
        {7, "projected quadratic reaches the box projection", projected_quadratic},
        {8, "byte-identical purify reruns", determinism},
        {9, "pupil-center preservation on the 64x64 fixture", preserve_surrogate},
        {10, "Table-shaped benchmark CSV with increasing per-iteration times",
         benchmark_harness},
    };

    int only = 0;
    if (argc > 1)
        only = std::atoi(argv[1]);

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (only != 0 && criterion.number != only)
            continue;
        std::string note;
        bool ok = false;
        try {
            ok = criterion.run(note);
        } catch (const std::exception& e) {
            note = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL",
                    criterion.number, criterion.label, note.c_str());
        std::fflush(stdout);
        failures += !ok;
    }
    return failures == 0 ? 0 : 1;
}
