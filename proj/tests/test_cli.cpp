#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mgst/cli.hpp"
#include "mgst/fixtures.hpp"
#include "mgst/network.hpp"
#include "mgst/png_io.hpp"

using namespace mgst;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "mgst_cli_tests";
    fs::create_directories(dir);
    return dir;
}

void write_fixture_pair(const fs::path& dir, const char* prefix, ToyLook look,
                        std::uint64_t seed, int size = 32) {
    const auto pair = make_toy_pair<float>(size, size, look, seed);
    save_image(pair.image, dir / (std::string(prefix) + ".png"));
    save_label_mask(pair.mask, dir / (std::string(prefix) + "_mask.png"));
}

int run_binary(const std::string& args, const fs::path& capture) {
    const std::string cmd =
        std::string(MGST_CLI_PATH) + " " + args + " >" + capture.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        n += c == '\n';
    return n;
}

} // namespace

TEST_CASE("purify writes the output bundle and respects --iters") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "content", ToyLook::Real, 61);
    write_fixture_pair(dir, "style", ToyLook::Synthetic, 62);
    const auto out = dir / "purified.png";

    const std::string args = "purify --content " + (dir / "content.png").string() +
                             " --content-mask " + (dir / "content_mask.png").string() +
                             " --style " + (dir / "style.png").string() +
                             " --style-mask " + (dir / "style_mask.png").string() +
                             " --out " + out.string() + " --iters 12 --seed 1";
    const int rc = run_binary(args, dir / "purify.log");
    CHECK(rc == cli::kExitOk);
    CHECK(fs::exists(out));
    CHECK(fs::exists(dir / "purified.trace.csv"));
    CHECK(fs::exists(dir / "purified.loss.csv"));
    // Header + iteration 0 + at most 12 accepted iterations.
    CHECK(count_lines(slurp(dir / "purified.trace.csv")) <= 14);

    const auto img = load_rgb_png<float>(out);
    CHECK(img.height() == 32);
    CHECK(img.width() == 32);
}

TEST_CASE("purify runs are byte-identical for the same config and seed") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "content_d", ToyLook::Real, 63);
    write_fixture_pair(dir, "style_d", ToyLook::Synthetic, 64);

    const auto run_to = [&](const char* name) {
        const std::string args =
            "purify --content " + (dir / "content_d.png").string() +
            " --content-mask " + (dir / "content_d_mask.png").string() +
            " --style " + (dir / "style_d.png").string() + " --style-mask " +
            (dir / "style_d_mask.png").string() + " --out " +
            (dir / name).string() + " --iters 8 --seed 3 --threads 1";
        return run_binary(args, dir / "det.log");
    };
    REQUIRE(run_to("det_a.png") == cli::kExitOk);
    REQUIRE(run_to("det_b.png") == cli::kExitOk);
    CHECK(slurp(dir / "det_a.png") == slurp(dir / "det_b.png"));
    CHECK(slurp(dir / "det_a.trace.csv") == slurp(dir / "det_b.trace.csv"));
    CHECK(slurp(dir / "det_a.loss.csv") == slurp(dir / "det_b.loss.csv"));
}

TEST_CASE("missing mask file fails and names the path") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "content_m", ToyLook::Real, 65);
    write_fixture_pair(dir, "style_m", ToyLook::Synthetic, 66);
    const std::string missing = (dir / "no_such_mask.png").string();

    const std::string args = "purify --content " + (dir / "content_m.png").string() +
                             " --content-mask " + missing + " --style " +
                             (dir / "style_m.png").string() + " --style-mask " +
                             (dir / "style_m_mask.png").string() + " --out " +
                             (dir / "never.png").string() + " --iters 2";
    const int rc = run_binary(args, dir / "missing.log");
    CHECK(rc != cli::kExitOk);
    CHECK(slurp(dir / "missing.log").find(missing) != std::string::npos);
}

TEST_CASE("batch processes a manifest and tolerates failing lines") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "batch_c", ToyLook::Real, 67);
    write_fixture_pair(dir, "batch_s", ToyLook::Synthetic, 68);

    const auto manifest = dir / "jobs.txt";
    {
        std::ofstream os(manifest);
        os << "# two jobs, second one is broken\n";
        os << (dir / "batch_c.png").string() << ' '
           << (dir / "batch_c_mask.png").string() << ' '
           << (dir / "batch_s.png").string() << ' '
           << (dir / "batch_s_mask.png").string() << ' ' << (dir / "b1.png").string()
           << '\n';
        os << (dir / "missing.png").string() << ' '
           << (dir / "batch_c_mask.png").string() << ' '
           << (dir / "batch_s.png").string() << ' '
           << (dir / "batch_s_mask.png").string() << ' ' << (dir / "b2.png").string()
           << '\n';
    }
    const std::string args =
        "batch " + manifest.string() + " --iters 4 --threads 2";
    const int rc = run_binary(args, dir / "batch.log");
    CHECK(rc != cli::kExitOk); // one job failed
    CHECK(fs::exists(dir / "b1.png"));
    CHECK(!fs::exists(dir / "b2.png"));
    const auto log = slurp(dir / "batch.log");
    CHECK(log.find("2 jobs, 1 failed") != std::string::npos);
}

TEST_CASE("benchmark rejects zero repetitions") {
    const auto dir = work_dir();
    const int rc = run_binary("benchmark --reps 0 --resolutions 32", dir / "bench.log");
    CHECK(rc != cli::kExitOk);
}

TEST_CASE("gradcheck passes clean and fails when corrupted") {
    const auto dir = work_dir();
    CHECK(run_binary("gradcheck --seed 2 --height 16 --width 16", dir / "g1.log") ==
          cli::kExitOk);
    CHECK(run_binary("gradcheck --seed 2 --alpha 0 --beta 0 --theta 1 --corrupt-tv",
                     dir / "g2.log") != cli::kExitOk);
    // Zero weights: objective identically zero, error exactly zero.
    CHECK(run_binary(
              "gradcheck --seed 2 --alpha 0 --beta 0 --lambda-g 0 --lambda-l 0 --theta 0",
              dir / "g3.log") == cli::kExitOk);
}

TEST_CASE("make-weights emits a loadable MGST-W file") {
    const auto dir = work_dir();
    const auto path = dir / "net.mgstw";
    REQUIRE(run_binary("make-weights --out " + path.string() + " --net-seed 7",
                       dir / "mw.log") == cli::kExitOk);
    const auto net = load_weights<float>(path);
    const auto expect = default_network<float>(7);
    REQUIRE(net.layers.size() == expect.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        CHECK(net.layers[i].weights == expect.layers[i].weights);
}

TEST_CASE("preserve-check reports a small shift for identical inputs") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "pc", ToyLook::Real, 69, 64);
    const std::string args = "preserve-check --content " + (dir / "pc.png").string() +
                             " --content-mask " + (dir / "pc_mask.png").string() +
                             " --purified " + (dir / "pc.png").string();
    REQUIRE(run_binary(args, dir / "pc.log") == cli::kExitOk);
    const auto log = slurp(dir / "pc.log");
    CHECK(log.find("shift: 0.000 px") != std::string::npos);
}

TEST_CASE("config file values are overridden by explicit flags") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "cfg_c", ToyLook::Real, 70);
    write_fixture_pair(dir, "cfg_s", ToyLook::Synthetic, 71);
    const auto cfg = dir / "run.cfg";
    {
        std::ofstream os(cfg);
        os << "content=" << (dir / "cfg_c.png").string() << '\n';
        os << "content-mask=" << (dir / "cfg_c_mask.png").string() << '\n';
        os << "style=" << (dir / "cfg_s.png").string() << '\n';
        os << "style-mask=" << (dir / "cfg_s_mask.png").string() << '\n';
        os << "out=" << (dir / "cfg_out.png").string() << '\n';
        os << "iters=500\n";
    }
    // --iters 3 must win over iters=500 from the file.
    const std::string args =
        "purify --config " + cfg.string() + " --iters 3 --seed 1";
    REQUIRE(run_binary(args, dir / "cfg.log") == cli::kExitOk);
    CHECK(count_lines(slurp(dir / "cfg_out.trace.csv")) <= 5);
}

TEST_CASE("unknown subcommand and bare invocation fail with usage") {
    const auto dir = work_dir();
    CHECK(run_binary("frobnicate", dir / "u1.log") != cli::kExitOk);
    CHECK(run_binary("", dir / "u2.log") != cli::kExitOk);
}

TEST_CASE("MGST_WEIGHTS env var supplies the network") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "env_c", ToyLook::Real, 72);
    write_fixture_pair(dir, "env_s", ToyLook::Synthetic, 73);
    const auto weights = dir / "env.mgstw";
    write_weights(default_network<float>(99), weights);

    const std::string args =
        "purify --content " + (dir / "env_c.png").string() + " --content-mask " +
        (dir / "env_c_mask.png").string() + " --style " +
        (dir / "env_s.png").string() + " --style-mask " +
        (dir / "env_s_mask.png").string() + " --out " +
        (dir / "env_out.png").string() + " --iters 2";
    const std::string cmd = "MGST_WEIGHTS=" + weights.string() + " " +
                            std::string(MGST_CLI_PATH) + " " + args + " >" +
                            (dir / "env.log").string() + " 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == cli::kExitOk);
    CHECK(fs::exists(dir / "env_out.png"));

    // A bogus env path is an error, proving the variable is honored.
    const std::string bad = "MGST_WEIGHTS=/no/such.mgstw " +
                            std::string(MGST_CLI_PATH) + " " + args + " >" +
                            (dir / "env_bad.log").string() + " 2>&1";
    CHECK(WEXITSTATUS(std::system(bad.c_str())) != cli::kExitOk);
}

TEST_CASE("learned attention runs from the weights file section") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "att_c", ToyLook::Real, 74);
    write_fixture_pair(dir, "att_s", ToyLook::Synthetic, 75);

    const auto net = default_network<float>(7);
    std::vector<AttentionParams<float>> attn;
    for (int tap : net.tap_layer_ids()) {
        AttentionParams<float> p;
        p.layer_id = tap;
        p.weight.assign(net.filters_at(tap) + 1, 0.0f);
        p.weight.back() = 8.0f; // mostly mask-driven attention
        p.bias = -4.0f;
        attn.push_back(std::move(p));
    }
    const auto weights = dir / "attn.mgstw";
    write_weights(net, weights, &attn);

    const std::string base = "purify --content " + (dir / "att_c.png").string() +
                             " --content-mask " + (dir / "att_c_mask.png").string() +
                             " --style " + (dir / "att_s.png").string() +
                             " --style-mask " + (dir / "att_s_mask.png").string() +
                             " --weights " + weights.string() + " --iters 2";
    CHECK(run_binary(base + " --attention --out " + (dir / "att_out.png").string(),
                     dir / "att.log") == cli::kExitOk);

    // Requesting learned attention without a section in the file must fail.
    const auto plain = dir / "plain.mgstw";
    write_weights(net, plain);
    const std::string no_section =
        "purify --content " + (dir / "att_c.png").string() + " --content-mask " +
        (dir / "att_c_mask.png").string() + " --style " +
        (dir / "att_s.png").string() + " --style-mask " +
        (dir / "att_s_mask.png").string() + " --weights " + plain.string() +
        " --attention --iters 2 --out " + (dir / "att_out2.png").string();
    CHECK(run_binary(no_section, dir / "att2.log") != cli::kExitOk);
}

TEST_CASE("explicit kernel backend selection works") {
    const auto dir = work_dir();
    write_fixture_pair(dir, "bk_c", ToyLook::Real, 76);
    write_fixture_pair(dir, "bk_s", ToyLook::Synthetic, 77);
    const std::string args = "purify --content " + (dir / "bk_c.png").string() +
                             " --content-mask " + (dir / "bk_c_mask.png").string() +
                             " --style " + (dir / "bk_s.png").string() +
                             " --style-mask " + (dir / "bk_s_mask.png").string() +
                             " --out " + (dir / "bk_out.png").string() +
                             " --iters 2 --backend scalar";
    CHECK(run_binary(args, dir / "bk.log") == cli::kExitOk);
    CHECK(run_binary("purify --backend turbo", dir / "bk2.log") != cli::kExitOk);
}
