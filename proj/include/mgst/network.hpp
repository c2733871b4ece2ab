#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mgst/image.hpp"

namespace mgst {

enum class LayerKind : std::uint8_t { Conv = 0, Relu = 1, AvgPool = 2 };

/// One layer of the feature extractor. Convolutions are 3x3, stride 1,
/// zero-padded "same"; pooling is 2x2 mean with stride 2 (mean rather than
/// max keeps the objective smooth).
template <typename T>
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int in_channels = 0;
    int out_channels = 0;
    std::vector<T> weights; // conv only, [out][in][3][3]
    std::vector<T> bias;    // conv only, [out]
};

/// Per-tap-layer 1x1 attention parameters: a weight vector over the layer's
/// feature channels plus one mask channel, squashed by the logistic sigmoid.
template <typename T>
struct AttentionParams {
    int layer_id = 0;
    std::vector<T> weight; // length n_filters + 1
    T bias = T(0);
};

template <typename T>
struct NetworkSpec {
    std::vector<LayerSpec<T>> layers;
    std::vector<int> style_layer_ids;   // sorted, ReLU layers only
    std::vector<int> content_layer_ids; // sorted, ReLU layers only

    /// Sorted union of style and content taps.
    std::vector<int> tap_layer_ids() const;
    /// Number of avgpool layers crossed strictly before layer_id.
    int pools_before(int layer_id) const;
    int pool_count() const;
    /// Filter count of the conv feeding the given ReLU tap.
    int filters_at(int layer_id) const;
    /// Throws FormatError on an inconsistent topology.
    void validate() const;
};

/// Feature matrix F of one tap layer: n_filters x (height*width) row-major,
/// i.e. one contiguous spatial plane per filter.
template <typename T>
struct FeatureLayer {
    int layer_id = 0;
    int n_filters = 0;
    int height = 0;
    int width = 0;
    std::vector<T> values;

    int spatial() const { return height * width; }
    T* channel(int i) { return values.data() + static_cast<std::size_t>(i) * spatial(); }
    const T* channel(int i) const {
        return values.data() + static_cast<std::size_t>(i) * spatial();
    }
};

template <typename T>
struct FeaturePyramid {
    std::vector<FeatureLayer<T>> layers; // ordered by layer id

    const FeatureLayer<T>& by_id(int layer_id) const;
};

/// Mask channels pooled to each tap layer's resolution.
template <typename T>
struct MaskLayer {
    int layer_id = 0;
    int height = 0;
    int width = 0;
    std::vector<std::vector<T>> channels; // each height*width
};

template <typename T>
struct MaskPyramid {
    std::vector<MaskLayer<T>> layers;

    const MaskLayer<T>& by_id(int layer_id) const;
    int mask_channels() const {
        return layers.empty() ? 0 : static_cast<int>(layers.front().channels.size());
    }
};

/// Gradient to inject at one tap layer, shaped like that layer's features.
template <typename T>
struct FeatureGrad {
    int layer_id = 0;
    std::vector<T> values;
};

/// Cached activations of one forward pass: the de-interleaved input planes
/// plus every layer's output. Lets callers run several backward passes (or
/// the loss) without recomputing the convolutions.
template <typename T>
struct ForwardTrace {
    struct Stage {
        int channels = 0;
        int height = 0;
        int width = 0;
        std::vector<T> planes; // [c][y*w + x]
    };
    Stage input;
    std::vector<Stage> outputs; // one per layer
};

/// Seeded default topology:
/// conv(3-16) relu conv(16-16) relu pool conv(16-32) relu conv(32-32) relu
/// pool conv(32-64) relu, He-initialized weights, zero biases. Style taps
/// are the first ReLU of each block, the content tap is the last ReLU.
template <typename T>
NetworkSpec<T> default_network(std::uint64_t seed);

template <typename T>
struct WeightsFile {
    NetworkSpec<T> net;
    std::optional<std::vector<AttentionParams<T>>> attention;
};

/// MGST-W v1 reader. Throws FormatError on bad magic, shape mismatch or
/// non-finite weights, IoError on unreadable files.
template <typename T>
WeightsFile<T> load_weights_file(const std::filesystem::path& path);

template <typename T>
NetworkSpec<T> load_weights(const std::filesystem::path& path);

template <typename T>
void write_weights(const NetworkSpec<T>& net, const std::filesystem::path& path,
                   const std::vector<AttentionParams<T>>* attention = nullptr);

template <typename T>
ForwardTrace<T> forward_trace(const NetworkSpec<T>& net, const Image<T>& image);

/// Features at every tap layer. Pure function of (net, image). Throws
/// IndivisibleDimsError unless both image dimensions are divisible by
/// 2^pool_count.
template <typename T>
FeaturePyramid<T> forward(const NetworkSpec<T>& net, const Image<T>& image);

template <typename T>
FeaturePyramid<T> taps_from_trace(const NetworkSpec<T>& net,
                                  const ForwardTrace<T>& trace);

/// Vector-Jacobian product: gradient of sum_l <grads_l, F_l> with respect to
/// the input image, returned in the image's interleaved layout.
template <typename T>
Image<T> backward_from_trace(const NetworkSpec<T>& net, const ForwardTrace<T>& trace,
                             const std::vector<FeatureGrad<T>>& grads);

template <typename T>
Image<T> backward(const NetworkSpec<T>& net, const Image<T>& image,
                  const std::vector<FeatureGrad<T>>& grads);

/// Pools each mask channel through the same 2x2-mean schedule the features
/// cross before each tap, so region mass is preserved at every scale.
template <typename T>
MaskPyramid<T> downsample_mask(const Image<T>& mask, const NetworkSpec<T>& net);

} // namespace mgst
