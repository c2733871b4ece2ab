#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mgst/errors.hpp"
#include "mgst/network.hpp"
#include "mgst/prng.hpp"

using namespace mgst;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "mgst_net_tests";
    fs::create_directories(dir);
    return dir / name;
}

// conv(3->3) with identity kernels (center weight 1 on the matching channel)
// followed by relu, tapped at the relu.
NetworkSpec<double> identity_net() {
    NetworkSpec<double> net;
    LayerSpec<double> conv;
    conv.kind = LayerKind::Conv;
    conv.in_channels = 3;
    conv.out_channels = 3;
    conv.weights.assign(3 * 3 * 9, 0.0);
    for (int c = 0; c < 3; ++c)
        conv.weights[(c * 3 + c) * 9 + 4] = 1.0;
    conv.bias.assign(3, 0.0);
    net.layers.push_back(std::move(conv));
    LayerSpec<double> relu;
    relu.kind = LayerKind::Relu;
    net.layers.push_back(std::move(relu));
    net.content_layer_ids = {1};
    net.style_layer_ids = {1};
    return net;
}

} // namespace

TEST_CASE("default_network is deterministic and He-scaled") {
    const auto a = default_network<float>(7);
    const auto b = default_network<float>(7);
    REQUIRE(a.layers.size() == b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        REQUIRE(a.layers[i].weights.size() == b.layers[i].weights.size());
        for (std::size_t j = 0; j < a.layers[i].weights.size(); ++j)
            CHECK(a.layers[i].weights[j] == b.layers[i].weights[j]);
        for (float bias : a.layers[i].bias)
            CHECK(bias == 0.0f);
    }

    // Sample variance within 30% of 2/(fan_in) for convs with enough weights.
    for (const auto& layer : a.layers) {
        if (layer.kind != LayerKind::Conv || layer.weights.size() < 1152)
            continue;
        double mean = 0.0;
        for (float w : layer.weights)
            mean += w;
        mean /= static_cast<double>(layer.weights.size());
        double var = 0.0;
        for (float w : layer.weights)
            var += (w - mean) * (w - mean);
        var /= static_cast<double>(layer.weights.size());
        const double expect = 2.0 / (layer.in_channels * 9.0);
        CHECK(var > 0.7 * expect);
        CHECK(var < 1.3 * expect);
    }

    CHECK(a.tap_layer_ids() == std::vector<int>{1, 6, 11});
    CHECK(a.pools_before(1) == 0);
    CHECK(a.pools_before(6) == 1);
    CHECK(a.pools_before(11) == 2);
}

TEST_CASE("weights file round-trips bit for bit") {
    const auto path = temp_file("roundtrip.mgstw");
    const auto net = default_network<float>(21);
    std::vector<AttentionParams<float>> attn;
    for (int tap : net.tap_layer_ids()) {
        AttentionParams<float> p;
        p.layer_id = tap;
        p.weight.assign(net.filters_at(tap) + 1, 0.125f);
        p.bias = -0.5f;
        attn.push_back(p);
    }
    write_weights(net, path, &attn);

    const auto file = load_weights_file<float>(path);
    REQUIRE(file.net.layers.size() == net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(file.net.layers[i].kind == net.layers[i].kind);
        REQUIRE(file.net.layers[i].weights.size() == net.layers[i].weights.size());
        for (std::size_t j = 0; j < net.layers[i].weights.size(); ++j)
            CHECK(file.net.layers[i].weights[j] == net.layers[i].weights[j]);
    }
    CHECK(file.net.style_layer_ids == net.style_layer_ids);
    CHECK(file.net.content_layer_ids == net.content_layer_ids);
    REQUIRE(file.attention.has_value());
    REQUIRE(file.attention->size() == attn.size());
    for (std::size_t i = 0; i < attn.size(); ++i) {
        CHECK((*file.attention)[i].layer_id == attn[i].layer_id);
        CHECK((*file.attention)[i].bias == attn[i].bias);
        CHECK((*file.attention)[i].weight == attn[i].weight);
    }
}

TEST_CASE("shipped default weights load with the default topology") {
    const auto file = load_weights_file<float>(std::string(MGST_DATA_DIR) +
                                               "/default.mgstw");
    const auto expect = default_network<float>(7);
    REQUIRE(file.net.layers.size() == expect.layers.size());
    for (std::size_t i = 0; i < expect.layers.size(); ++i) {
        CHECK(file.net.layers[i].kind == expect.layers[i].kind);
        CHECK(file.net.layers[i].weights == expect.layers[i].weights);
    }
    CHECK(file.net.tap_layer_ids() == expect.tap_layer_ids());
    CHECK(!file.attention.has_value());
}

TEST_CASE("weights loader rejects bad magic and truncation") {
    const auto bad = temp_file("bad.mgstw");
    {
        std::ofstream os(bad, std::ios::binary);
        os << "XXXXXXXX garbage";
    }
    CHECK_THROWS_AS(load_weights<float>(bad), FormatError);

    const auto truncated = temp_file("trunc.mgstw");
    {
        const auto good = temp_file("good.mgstw");
        write_weights(default_network<float>(3), good);
        std::ifstream is(good, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
        std::ofstream os(truncated, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_weights<float>(truncated), FormatError);

    CHECK_THROWS_AS(load_weights<float>("/no/such.mgstw"), IoError);
}

TEST_CASE("identity convolution reproduces nonnegative input") {
    const auto net = identity_net();
    Image<double> img(8, 8, 3);
    Lcg64 rng(2);
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data()[i] = rng.next_pixel(); // nonnegative

    const auto pyr = forward(net, img);
    REQUIRE(pyr.layers.size() == 1);
    const auto& f = pyr.layers.front();
    CHECK(f.n_filters == 3);
    CHECK(f.spatial() == 64);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                CHECK(f.channel(c)[y * 8 + x] == doctest::Approx(img.at(y, x, c)));
}

TEST_CASE("avgpool over a constant image stays constant at half resolution") {
    NetworkSpec<double> net = identity_net();
    LayerSpec<double> pool;
    pool.kind = LayerKind::AvgPool;
    net.layers.push_back(std::move(pool));
    LayerSpec<double> conv2;
    conv2.kind = LayerKind::Conv;
    conv2.in_channels = 3;
    conv2.out_channels = 3;
    conv2.weights.assign(3 * 3 * 9, 0.0);
    for (int c = 0; c < 3; ++c)
        conv2.weights[(c * 3 + c) * 9 + 4] = 1.0;
    conv2.bias.assign(3, 0.0);
    net.layers.push_back(std::move(conv2));
    LayerSpec<double> relu2;
    relu2.kind = LayerKind::Relu;
    net.layers.push_back(std::move(relu2));
    net.content_layer_ids = {1, 4};
    net.style_layer_ids = {};

    Image<double> img(8, 8, 3, 57.25);
    const auto pyr = forward(net, img);
    const auto& pooled = pyr.by_id(4);
    CHECK(pooled.height == 4);
    CHECK(pooled.width == 4);
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < pooled.spatial(); ++j)
            CHECK(pooled.channel(c)[j] == doctest::Approx(57.25));
}

TEST_CASE("forward rejects indivisible dimensions") {
    const auto net = default_network<float>(7);
    Image<float> img(18, 18, 3, 1.0f); // not divisible by 4
    CHECK_THROWS_AS(forward(net, img), IndivisibleDimsError);
}

TEST_CASE("ReLU taps are nonnegative") {
    const auto net = default_network<double>(7);
    const auto img = white_noise_image<double>(16, 16, 9);
    const auto pyr = forward(net, img);
    for (const auto& layer : pyr.layers)
        for (double v : layer.values)
            CHECK(v >= 0.0);
}

TEST_CASE("backward is linear in the injected gradients") {
    const auto net = default_network<double>(5);
    const auto img = white_noise_image<double>(8, 8, 4);
    const auto pyr = forward(net, img);

    std::vector<FeatureGrad<double>> zero, ones, twos;
    Lcg64 rng(8);
    for (const auto& layer : pyr.layers) {
        FeatureGrad<double> g;
        g.layer_id = layer.layer_id;
        g.values.assign(layer.values.size(), 0.0);
        zero.push_back(g);
        for (auto& v : g.values)
            v = rng.next_unit() - 0.5;
        ones.push_back(g);
        for (auto& v : g.values)
            v *= 2.0;
        twos.push_back(std::move(g));
    }

    const auto gz = backward(net, img, zero);
    for (std::size_t i = 0; i < gz.size(); ++i)
        CHECK(gz.data()[i] == 0.0);

    const auto g1 = backward(net, img, ones);
    const auto g2 = backward(net, img, twos);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(g2.data()[i] == doctest::Approx(2.0 * g1.data()[i]).epsilon(1e-12));
}

TEST_CASE("backward agrees with finite differences of <grads, forward(.)>") {
    const auto net = default_network<double>(11);
    Image<double> img = white_noise_image<double>(8, 8, 13);
    const auto pyr = forward(net, img);

    std::vector<FeatureGrad<double>> grads;
    Lcg64 rng(14);
    for (const auto& layer : pyr.layers) {
        FeatureGrad<double> g;
        g.layer_id = layer.layer_id;
        g.values.resize(layer.values.size());
        for (auto& v : g.values)
            v = rng.next_unit() * 2.0 - 1.0;
        grads.push_back(std::move(g));
    }

    const auto analytic = backward(net, img, grads);

    const auto scalar_value = [&](const Image<double>& x) {
        const auto p = forward(net, x);
        double acc = 0.0;
        for (std::size_t li = 0; li < p.layers.size(); ++li)
            for (std::size_t j = 0; j < p.layers[li].values.size(); ++j)
                acc += grads[li].values[j] * p.layers[li].values[j];
        return acc;
    };

    const double h = 1e-3;
    Lcg64 pick(3);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t i =
            static_cast<std::size_t>(pick.next_unit() * img.size()) % img.size();
        const double saved = img.data()[i];
        img.data()[i] = saved + h;
        const double fp = scalar_value(img);
        img.data()[i] = saved - h;
        const double fm = scalar_value(img);
        img.data()[i] = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double an = analytic.data()[i];
        const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
        CHECK(rel <= 1e-5);
    }
}

TEST_CASE("backward rejects mis-shaped gradients") {
    const auto net = default_network<float>(7);
    const auto img = white_noise_image<float>(8, 8, 1);
    std::vector<FeatureGrad<float>> grads(1);
    grads[0].layer_id = 1;
    grads[0].values.assign(3, 0.0f); // wrong size
    CHECK_THROWS_AS(backward(net, img, grads), ShapeMismatchError);
}

TEST_CASE("downsample_mask pools through the feature schedule") {
    const auto net = default_network<double>(7);

    // All-ones mask stays all ones at every tap.
    Image<double> ones_mask(16, 16, 1, 1.0);
    const auto pyr = downsample_mask(ones_mask, net);
    REQUIRE(pyr.layers.size() == 3);
    CHECK(pyr.by_id(1).height == 16);
    CHECK(pyr.by_id(6).height == 8);
    CHECK(pyr.by_id(11).height == 4);
    for (const auto& layer : pyr.layers)
        for (const auto& channel : layer.channels)
            for (double v : channel)
                CHECK(v == 1.0);

    // Tap before any pooling sees the mask unchanged; a half-plane pooled
    // once has a 0.5 column at the boundary when the split bisects a window.
    Image<double> half(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 7; ++x)
            half.at(y, x, 0) = 1.0;
    const auto hp = downsample_mask(half, net);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            CHECK(hp.by_id(1).channels[0][y * 16 + x] == half.at(y, x, 0));
    const auto& once = hp.by_id(6); // 8x8 after one 2x2 mean
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const double v = once.channels[0][y * 8 + x];
            if (x < 3)
                CHECK(v == 1.0);
            else if (x == 3)
                CHECK(v == 0.5); // window covers columns 6-7: one in, one out
            else
                CHECK(v == 0.0);
        }
    }
}
