#pragma once

#include <vector>

#include "mgst/network.hpp"

namespace mgst {

/// The attention stage. Passthrough mode forwards the downsampled mask as
/// the attention map; learned mode applies a per-tap-layer 1x1 convolution
/// over the concatenated (feature column, mask value) followed by the
/// logistic sigmoid. Passthrough is the default because only the learned
/// form's formula is defined, not a way to fit it; weights come from the
/// optional section of the weights file.
template <typename T>
struct AttentionSubnet {
    enum class Mode { Passthrough, Learned };

    Mode mode = Mode::Passthrough;
    std::vector<AttentionParams<T>> params; // learned mode, one per tap layer

    static AttentionSubnet passthrough() { return {}; }
    static AttentionSubnet learned(std::vector<AttentionParams<T>> p) {
        AttentionSubnet s;
        s.mode = Mode::Learned;
        s.params = std::move(p);
        return s;
    }
};

/// att+ maps per tap layer and mask channel; att- is 1 - att+ by
/// construction, so the contrastive pair sums to one at every location.
template <typename T>
struct AttentionLayer {
    int layer_id = 0;
    int height = 0;
    int width = 0;
    std::vector<std::vector<T>> att_plus; // per mask channel, height*width

    int spatial() const { return height * width; }
    std::vector<T> att_minus(int channel) const {
        std::vector<T> out(att_plus[channel].size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = T(1) - att_plus[channel][i];
        return out;
    }
};

template <typename T>
struct AttentionPyramid {
    std::vector<AttentionLayer<T>> layers;

    const AttentionLayer<T>& by_id(int layer_id) const;
    int mask_channels() const {
        return layers.empty() ? 0 : static_cast<int>(layers.front().att_plus.size());
    }
};

/// Per tap layer and mask channel, the three streams: the raw features, the
/// features spatially weighted by att+, and the complement weighted by att-.
/// attention + bkgd = full holds elementwise.
template <typename T>
struct StreamLayer {
    int layer_id = 0;
    int n_filters = 0;
    int height = 0;
    int width = 0;
    std::vector<T> full;                      // n_filters x (h*w)
    std::vector<std::vector<T>> attention;    // per mask channel
    std::vector<std::vector<T>> bkgd;         // per mask channel

    int spatial() const { return height * width; }
};

template <typename T>
struct StreamSet {
    std::vector<StreamLayer<T>> layers;

    const StreamLayer<T>& by_id(int layer_id) const;
};

/// Throws ShapeMismatchError when the pyramids disagree on layer geometry.
template <typename T>
AttentionPyramid<T> compute_attention(const AttentionSubnet<T>& subnet,
                                      const FeaturePyramid<T>& features,
                                      const MaskPyramid<T>& masks);

template <typename T>
StreamSet<T> build_streams(const FeaturePyramid<T>& features,
                           const AttentionPyramid<T>& attn);

} // namespace mgst
