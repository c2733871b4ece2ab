#include "mgst/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <set>
#include <string>

#include "mgst/errors.hpp"
#include "mgst/kernels/kernels.hpp"
#include "mgst/prng.hpp"

namespace mgst {

namespace {

constexpr char kWeightsMagic[8] = {'M', 'G', 'S', 'T', 'W', '0', '0', '1'};
constexpr char kAttentionMagic[8] = {'A', 'T', 'T', 'N', '0', '0', '0', '1'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void read_exact(std::FILE* f, void* dst, std::size_t bytes, const char* what) {
    if (std::fread(dst, 1, bytes, f) != bytes)
        throw FormatError(std::string("weights file truncated while reading ") + what);
}

std::uint32_t read_u32(std::FILE* f, const char* what) {
    std::uint32_t v = 0;
    read_exact(f, &v, sizeof v, what);
    return v; // little-endian hosts only, matching the format
}

void write_u32(std::FILE* f, std::uint32_t v) {
    std::fwrite(&v, sizeof v, 1, f);
}

template <typename T>
std::vector<float> to_f32(const std::vector<T>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = static_cast<float>(v[i]);
    return out;
}

template <typename T>
std::vector<T> read_f32_array(std::FILE* f, std::size_t count, const char* what) {
    std::vector<float> raw(count);
    read_exact(f, raw.data(), count * sizeof(float), what);
    std::vector<T> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::isfinite(raw[i]))
            throw FormatError(std::string("non-finite value in ") + what);
        out[i] = static_cast<T>(raw[i]);
    }
    return out;
}

} // namespace

template <typename T>
std::vector<int> NetworkSpec<T>::tap_layer_ids() const {
    std::set<int> ids(style_layer_ids.begin(), style_layer_ids.end());
    ids.insert(content_layer_ids.begin(), content_layer_ids.end());
    return {ids.begin(), ids.end()};
}

template <typename T>
int NetworkSpec<T>::pools_before(int layer_id) const {
    int count = 0;
    for (int i = 0; i < layer_id && i < static_cast<int>(layers.size()); ++i)
        if (layers[i].kind == LayerKind::AvgPool)
            ++count;
    return count;
}

template <typename T>
int NetworkSpec<T>::pool_count() const {
    return pools_before(static_cast<int>(layers.size()));
}

template <typename T>
int NetworkSpec<T>::filters_at(int layer_id) const {
    // Walk back to the nearest conv; ReLU and pooling preserve channel count.
    for (int i = layer_id; i >= 0; --i)
        if (layers[i].kind == LayerKind::Conv)
            return layers[i].out_channels;
    return 3;
}

template <typename T>
void NetworkSpec<T>::validate() const {
    if (layers.empty())
        throw FormatError("network has no layers");
    int channels = 3;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];
        if (layer.kind == LayerKind::Conv) {
            if (layer.in_channels != channels)
                throw FormatError("conv input channels do not chain");
            const std::size_t expect =
                static_cast<std::size_t>(layer.out_channels) * layer.in_channels * 9;
            if (layer.weights.size() != expect ||
                layer.bias.size() != static_cast<std::size_t>(layer.out_channels))
                throw FormatError("conv tensor sizes do not match declared channels");
            for (const T w : layer.weights)
                if (!std::isfinite(static_cast<double>(w)))
                    throw FormatError("non-finite conv weight");
            channels = layer.out_channels;
        }
    }
    auto check_taps = [&](const std::vector<int>& ids) {
        for (int id : ids) {
            if (id < 0 || id >= static_cast<int>(layers.size()))
                throw FormatError("tap layer id out of range");
            if (layers[id].kind != LayerKind::Relu)
                throw FormatError("tap layers must be ReLU outputs");
            if (id == 0 || layers[id - 1].kind != LayerKind::Conv)
                throw FormatError("tap ReLU must directly follow a conv");
        }
    };
    check_taps(style_layer_ids);
    check_taps(content_layer_ids);
    if (tap_layer_ids().empty())
        throw FormatError("network declares no tap layers");
}

template <typename T>
const FeatureLayer<T>& FeaturePyramid<T>::by_id(int layer_id) const {
    for (const auto& l : layers)
        if (l.layer_id == layer_id)
            return l;
    throw ShapeMismatchError("no feature layer with requested id");
}

template <typename T>
const MaskLayer<T>& MaskPyramid<T>::by_id(int layer_id) const {
    for (const auto& l : layers)
        if (l.layer_id == layer_id)
            return l;
    throw ShapeMismatchError("no mask layer with requested id");
}

template <typename T>
NetworkSpec<T> default_network(std::uint64_t seed) {
    NetworkSpec<T> net;
    Lcg64 rng(seed);
    auto conv = [&](int in, int out) {
        LayerSpec<T> layer;
        layer.kind = LayerKind::Conv;
        layer.in_channels = in;
        layer.out_channels = out;
        layer.weights.resize(static_cast<std::size_t>(out) * in * 9);
        const double sigma = std::sqrt(2.0 / (in * 9.0));
        for (auto& w : layer.weights)
            w = static_cast<T>(sigma * rng.next_normal());
        layer.bias.assign(out, T(0));
        net.layers.push_back(std::move(layer));
        LayerSpec<T> relu;
        relu.kind = LayerKind::Relu;
        net.layers.push_back(std::move(relu));
    };
    auto pool = [&] {
        LayerSpec<T> layer;
        layer.kind = LayerKind::AvgPool;
        net.layers.push_back(std::move(layer));
    };

    conv(3, 16);  // layers 0, 1
    conv(16, 16); // layers 2, 3
    pool();       // layer 4
    conv(16, 32); // layers 5, 6
    conv(32, 32); // layers 7, 8
    pool();       // layer 9
    conv(32, 64); // layers 10, 11

    net.style_layer_ids = {1, 6, 11};  // first ReLU of each block
    net.content_layer_ids = {11};      // last ReLU
    net.validate();
    return net;
}

template <typename T>
WeightsFile<T> load_weights_file(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f)
        throw IoError("cannot open weights file: " + path.string());

    char magic[8];
    read_exact(f.get(), magic, sizeof magic, "magic");
    if (std::memcmp(magic, kWeightsMagic, 8) != 0)
        throw FormatError("bad weights magic in " + path.string());

    WeightsFile<T> out;
    const std::uint32_t layer_count = read_u32(f.get(), "layer count");
    if (layer_count == 0 || layer_count > 1024)
        throw FormatError("implausible layer count");
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        std::uint8_t kind = 0;
        read_exact(f.get(), &kind, 1, "layer kind");
        LayerSpec<T> layer;
        switch (kind) {
        case 0: {
            layer.kind = LayerKind::Conv;
            layer.in_channels = static_cast<int>(read_u32(f.get(), "in channels"));
            layer.out_channels = static_cast<int>(read_u32(f.get(), "out channels"));
            const std::uint32_t kh = read_u32(f.get(), "kernel height");
            const std::uint32_t kw = read_u32(f.get(), "kernel width");
            if (kh != 3 || kw != 3)
                throw FormatError("only 3x3 kernels are supported");
            if (layer.in_channels <= 0 || layer.out_channels <= 0 ||
                layer.in_channels > 4096 || layer.out_channels > 4096)
                throw FormatError("implausible conv channel counts");
            const std::size_t nw =
                static_cast<std::size_t>(layer.out_channels) * layer.in_channels * 9;
            layer.weights = read_f32_array<T>(f.get(), nw, "conv weights");
            layer.bias = read_f32_array<T>(
                f.get(), static_cast<std::size_t>(layer.out_channels), "conv biases");
            break;
        }
        case 1:
            layer.kind = LayerKind::Relu;
            break;
        case 2:
            layer.kind = LayerKind::AvgPool;
            break;
        default:
            throw FormatError("unknown layer kind byte");
        }
        out.net.layers.push_back(std::move(layer));
    }

    auto read_ids = [&](const char* what) {
        const std::uint32_t n = read_u32(f.get(), what);
        if (n > layer_count)
            throw FormatError("tap id count exceeds layer count");
        std::vector<int> ids(n);
        for (auto& id : ids)
            id = static_cast<int>(read_u32(f.get(), what));
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    out.net.style_layer_ids = read_ids("style tap ids");
    out.net.content_layer_ids = read_ids("content tap ids");
    out.net.validate();

    // Optional learned-attention section.
    char attn_magic[8];
    const std::size_t got = std::fread(attn_magic, 1, sizeof attn_magic, f.get());
    if (got == sizeof attn_magic) {
        if (std::memcmp(attn_magic, kAttentionMagic, 8) != 0)
            throw FormatError("unrecognized trailing section in weights file");
        std::vector<AttentionParams<T>> params;
        for (int tap : out.net.tap_layer_ids()) {
            AttentionParams<T> p;
            p.layer_id = tap;
            const std::uint32_t width = read_u32(f.get(), "attention input width");
            const int expect = out.net.filters_at(tap) + 1;
            if (static_cast<int>(width) != expect)
                throw FormatError("attention input width does not match tap layer");
            p.weight = read_f32_array<T>(f.get(), width, "attention weights");
            p.bias = read_f32_array<T>(f.get(), 1, "attention bias")[0];
            params.push_back(std::move(p));
        }
        out.attention = std::move(params);
    } else if (got != 0) {
        throw FormatError("trailing garbage in weights file");
    }
    return out;
}

template <typename T>
NetworkSpec<T> load_weights(const std::filesystem::path& path) {
    return load_weights_file<T>(path).net;
}

template <typename T>
void write_weights(const NetworkSpec<T>& net, const std::filesystem::path& path,
                   const std::vector<AttentionParams<T>>* attention) {
    net.validate();
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f)
        throw IoError("cannot open weights file for writing: " + path.string());
    std::fwrite(kWeightsMagic, 1, 8, f.get());
    write_u32(f.get(), static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        const std::uint8_t kind = static_cast<std::uint8_t>(layer.kind);
        std::fwrite(&kind, 1, 1, f.get());
        if (layer.kind == LayerKind::Conv) {
            write_u32(f.get(), static_cast<std::uint32_t>(layer.in_channels));
            write_u32(f.get(), static_cast<std::uint32_t>(layer.out_channels));
            write_u32(f.get(), 3);
            write_u32(f.get(), 3);
            const auto w = to_f32(layer.weights);
            const auto b = to_f32(layer.bias);
            std::fwrite(w.data(), sizeof(float), w.size(), f.get());
            std::fwrite(b.data(), sizeof(float), b.size(), f.get());
        }
    }
    auto write_ids = [&](const std::vector<int>& ids) {
        write_u32(f.get(), static_cast<std::uint32_t>(ids.size()));
        for (int id : ids)
            write_u32(f.get(), static_cast<std::uint32_t>(id));
    };
    write_ids(net.style_layer_ids);
    write_ids(net.content_layer_ids);
    if (attention) {
        std::fwrite(kAttentionMagic, 1, 8, f.get());
        for (const auto& p : *attention) {
            write_u32(f.get(), static_cast<std::uint32_t>(p.weight.size()));
            const auto w = to_f32(p.weight);
            std::fwrite(w.data(), sizeof(float), w.size(), f.get());
            const float b = static_cast<float>(p.bias);
            std::fwrite(&b, sizeof(float), 1, f.get());
        }
    }
    if (std::ferror(f.get()))
        throw IoError("write failure on " + path.string());
}

template <typename T>
ForwardTrace<T> forward_trace(const NetworkSpec<T>& net, const Image<T>& image) {
    net.validate();
    if (image.channels() != 3)
        throw ShapeMismatchError("network input must have 3 channels");
    const int divisor = 1 << net.pool_count();
    if (image.height() % divisor != 0 || image.width() % divisor != 0)
        throw IndivisibleDimsError("image dimensions must be divisible by " +
                                   std::to_string(divisor));

    ForwardTrace<T> trace;
    trace.input.channels = 3;
    trace.input.height = image.height();
    trace.input.width = image.width();
    trace.input.planes.resize(image.size());
    const std::size_t plane = static_cast<std::size_t>(image.height()) * image.width();
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < 3; ++c)
                trace.input.planes[c * plane + static_cast<std::size_t>(y) * image.width() + x] =
                    image.at(y, x, c);

    const typename ForwardTrace<T>::Stage* prev = &trace.input;
    trace.outputs.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        typename ForwardTrace<T>::Stage stage;
        switch (layer.kind) {
        case LayerKind::Conv:
            stage.channels = layer.out_channels;
            stage.height = prev->height;
            stage.width = prev->width;
            stage.planes.resize(static_cast<std::size_t>(stage.channels) *
                                stage.height * stage.width);
            kernels::conv3x3(prev->planes.data(), prev->height, prev->width,
                             prev->channels, layer.weights.data(), layer.bias.data(),
                             stage.planes.data(), stage.channels);
            break;
        case LayerKind::Relu:
            stage.channels = prev->channels;
            stage.height = prev->height;
            stage.width = prev->width;
            stage.planes.resize(prev->planes.size());
            kernels::relu(stage.planes.data(), prev->planes.data(),
                          prev->planes.size());
            break;
        case LayerKind::AvgPool:
            stage.channels = prev->channels;
            stage.height = prev->height / 2;
            stage.width = prev->width / 2;
            stage.planes.resize(static_cast<std::size_t>(stage.channels) *
                                stage.height * stage.width);
            kernels::avgpool2x2(prev->planes.data(), prev->height, prev->width,
                                prev->channels, stage.planes.data());
            break;
        }
        trace.outputs.push_back(std::move(stage));
        prev = &trace.outputs.back();
    }
    return trace;
}

template <typename T>
FeaturePyramid<T> taps_from_trace(const NetworkSpec<T>& net,
                                  const ForwardTrace<T>& trace) {
    FeaturePyramid<T> pyr;
    for (int id : net.tap_layer_ids()) {
        const auto& stage = trace.outputs[id];
        FeatureLayer<T> layer;
        layer.layer_id = id;
        layer.n_filters = stage.channels;
        layer.height = stage.height;
        layer.width = stage.width;
        layer.values = stage.planes;
        pyr.layers.push_back(std::move(layer));
    }
    return pyr;
}

template <typename T>
FeaturePyramid<T> forward(const NetworkSpec<T>& net, const Image<T>& image) {
    return taps_from_trace(net, forward_trace(net, image));
}

template <typename T>
Image<T> backward_from_trace(const NetworkSpec<T>& net, const ForwardTrace<T>& trace,
                             const std::vector<FeatureGrad<T>>& grads) {
    for (const auto& g : grads) {
        if (g.layer_id < 0 || g.layer_id >= static_cast<int>(trace.outputs.size()))
            throw ShapeMismatchError("gradient layer id out of range");
        if (g.values.size() != trace.outputs[g.layer_id].planes.size())
            throw ShapeMismatchError("gradient shape does not match tap layer");
    }

    const int n_layers = static_cast<int>(net.layers.size());
    // Gradient w.r.t. the output of the layer currently being processed.
    std::vector<T> cur(trace.outputs.back().planes.size(), T(0));
    std::vector<T> next;
    for (int i = n_layers - 1; i >= 0; --i) {
        const auto& out_stage = trace.outputs[i];
        if (cur.size() != out_stage.planes.size())
            cur.assign(out_stage.planes.size(), T(0));
        for (const auto& g : grads)
            if (g.layer_id == i)
                kernels::axpy(cur.data(), T(1), g.values.data(), cur.size());

        const auto& in_stage = i == 0 ? trace.input : trace.outputs[i - 1];
        next.assign(in_stage.planes.size(), T(0));
        const auto& layer = net.layers[i];
        switch (layer.kind) {
        case LayerKind::Relu:
            kernels::relu_backward(next.data(), out_stage.planes.data(), cur.data(),
                                   cur.size());
            break;
        case LayerKind::AvgPool:
            kernels::avgpool2x2_backward(cur.data(), out_stage.height,
                                         out_stage.width, out_stage.channels,
                                         next.data());
            break;
        case LayerKind::Conv: {
            // Input gradient of a padded 3x3 conv is a conv with the kernel
            // flipped in both axes and in/out channels swapped.
            std::vector<T> flipped(layer.weights.size());
            const int ci_n = layer.in_channels, co_n = layer.out_channels;
            for (int co = 0; co < co_n; ++co)
                for (int ci = 0; ci < ci_n; ++ci)
                    for (int k = 0; k < 9; ++k)
                        flipped[(static_cast<std::size_t>(ci) * co_n + co) * 9 + (8 - k)] =
                            layer.weights[(static_cast<std::size_t>(co) * ci_n + ci) * 9 + k];
            const std::vector<T> zero_bias(ci_n, T(0));
            kernels::conv3x3(cur.data(), out_stage.height, out_stage.width, co_n,
                             flipped.data(), zero_bias.data(), next.data(), ci_n);
            break;
        }
        }
        cur.swap(next);
    }

    Image<T> grad(trace.input.height, trace.input.width, 3);
    const std::size_t plane =
        static_cast<std::size_t>(trace.input.height) * trace.input.width;
    for (int y = 0; y < grad.height(); ++y)
        for (int x = 0; x < grad.width(); ++x)
            for (int c = 0; c < 3; ++c)
                grad.at(y, x, c) =
                    cur[c * plane + static_cast<std::size_t>(y) * grad.width() + x];
    return grad;
}

template <typename T>
Image<T> backward(const NetworkSpec<T>& net, const Image<T>& image,
                  const std::vector<FeatureGrad<T>>& grads) {
    return backward_from_trace(net, forward_trace(net, image), grads);
}

template <typename T>
MaskPyramid<T> downsample_mask(const Image<T>& mask, const NetworkSpec<T>& net) {
    MaskPyramid<T> pyr;
    const int channels = mask.channels();
    const std::size_t plane = static_cast<std::size_t>(mask.height()) * mask.width();

    // De-interleave once, then pool each channel progressively.
    std::vector<std::vector<T>> current(channels);
    for (int c = 0; c < channels; ++c) {
        current[c].resize(plane);
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x)
                current[c][static_cast<std::size_t>(y) * mask.width() + x] =
                    mask.at(y, x, c);
    }
    int h = mask.height(), w = mask.width();
    int pooled = 0;
    for (int tap : net.tap_layer_ids()) {
        const int want = net.pools_before(tap);
        while (pooled < want) {
            for (int c = 0; c < channels; ++c) {
                std::vector<T> smaller(static_cast<std::size_t>(h / 2) * (w / 2));
                kernels::avgpool2x2(current[c].data(), h, w, 1, smaller.data());
                current[c] = std::move(smaller);
            }
            h /= 2;
            w /= 2;
            ++pooled;
        }
        MaskLayer<T> layer;
        layer.layer_id = tap;
        layer.height = h;
        layer.width = w;
        layer.channels = current;
        pyr.layers.push_back(std::move(layer));
    }
    return pyr;
}

#define MGST_INSTANTIATE_NETWORK(T)                                             \
    template struct NetworkSpec<T>;                                             \
    template struct FeaturePyramid<T>;                                          \
    template struct MaskPyramid<T>;                                             \
    template NetworkSpec<T> default_network<T>(std::uint64_t);                  \
    template WeightsFile<T> load_weights_file<T>(const std::filesystem::path&); \
    template NetworkSpec<T> load_weights<T>(const std::filesystem::path&);      \
    template void write_weights<T>(const NetworkSpec<T>&,                       \
                                   const std::filesystem::path&,                \
                                   const std::vector<AttentionParams<T>>*);     \
    template ForwardTrace<T> forward_trace<T>(const NetworkSpec<T>&,            \
                                              const Image<T>&);                 \
    template FeaturePyramid<T> forward<T>(const NetworkSpec<T>&,                \
                                          const Image<T>&);                     \
    template FeaturePyramid<T> taps_from_trace<T>(const NetworkSpec<T>&,        \
                                                  const ForwardTrace<T>&);      \
    template Image<T> backward_from_trace<T>(const NetworkSpec<T>&,             \
                                             const ForwardTrace<T>&,            \
                                             const std::vector<FeatureGrad<T>>&); \
    template Image<T> backward<T>(const NetworkSpec<T>&, const Image<T>&,       \
                                  const std::vector<FeatureGrad<T>>&);          \
    template MaskPyramid<T> downsample_mask<T>(const Image<T>&,                 \
                                               const NetworkSpec<T>&);

MGST_INSTANTIATE_NETWORK(float)
MGST_INSTANTIATE_NETWORK(double)

#undef MGST_INSTANTIATE_NETWORK

} // namespace mgst
