#include "mgst/attention.hpp"

#include <cmath>

#include "mgst/errors.hpp"
#include "mgst/kernels/kernels.hpp"

namespace mgst {

template <typename T>
const AttentionLayer<T>& AttentionPyramid<T>::by_id(int layer_id) const {
    for (const auto& l : layers)
        if (l.layer_id == layer_id)
            return l;
    throw ShapeMismatchError("no attention layer with requested id");
}

template <typename T>
const StreamLayer<T>& StreamSet<T>::by_id(int layer_id) const {
    for (const auto& l : layers)
        if (l.layer_id == layer_id)
            return l;
    throw ShapeMismatchError("no stream layer with requested id");
}

template <typename T>
AttentionPyramid<T> compute_attention(const AttentionSubnet<T>& subnet,
                                      const FeaturePyramid<T>& features,
                                      const MaskPyramid<T>& masks) {
    if (features.layers.size() != masks.layers.size())
        throw ShapeMismatchError("feature and mask pyramids have different depths");

    AttentionPyramid<T> pyr;
    for (std::size_t li = 0; li < features.layers.size(); ++li) {
        const auto& feat = features.layers[li];
        const auto& mask = masks.layers[li];
        if (feat.layer_id != mask.layer_id || feat.height != mask.height ||
            feat.width != mask.width)
            throw ShapeMismatchError("feature and mask layers disagree on geometry");

        AttentionLayer<T> layer;
        layer.layer_id = feat.layer_id;
        layer.height = feat.height;
        layer.width = feat.width;
        const int m = feat.spatial();
        const int channels = static_cast<int>(mask.channels.size());

        if (subnet.mode == AttentionSubnet<T>::Mode::Passthrough) {
            layer.att_plus = mask.channels;
        } else {
            const AttentionParams<T>* params = nullptr;
            for (const auto& p : subnet.params)
                if (p.layer_id == feat.layer_id)
                    params = &p;
            if (!params ||
                params->weight.size() != static_cast<std::size_t>(feat.n_filters) + 1)
                throw ShapeMismatchError(
                    "learned attention parameters missing or sized wrong for tap");
            layer.att_plus.assign(channels, std::vector<T>(m));
            const T mask_weight = params->weight[feat.n_filters];
            for (int c = 0; c < channels; ++c) {
                for (int j = 0; j < m; ++j) {
                    double z = static_cast<double>(params->bias);
                    for (int i = 0; i < feat.n_filters; ++i)
                        z += static_cast<double>(params->weight[i]) *
                             static_cast<double>(feat.channel(i)[j]);
                    z += static_cast<double>(mask_weight) *
                         static_cast<double>(mask.channels[c][j]);
                    layer.att_plus[c][j] = static_cast<T>(1.0 / (1.0 + std::exp(-z)));
                }
            }
        }
        pyr.layers.push_back(std::move(layer));
    }
    return pyr;
}

template <typename T>
StreamSet<T> build_streams(const FeaturePyramid<T>& features,
                           const AttentionPyramid<T>& attn) {
    if (features.layers.size() != attn.layers.size())
        throw ShapeMismatchError("feature and attention pyramids have different depths");

    StreamSet<T> set;
    for (std::size_t li = 0; li < features.layers.size(); ++li) {
        const auto& feat = features.layers[li];
        const auto& att = attn.layers[li];
        if (feat.layer_id != att.layer_id || feat.height != att.height ||
            feat.width != att.width)
            throw ShapeMismatchError("feature and attention layers disagree on geometry");

        StreamLayer<T> layer;
        layer.layer_id = feat.layer_id;
        layer.n_filters = feat.n_filters;
        layer.height = feat.height;
        layer.width = feat.width;
        layer.full = feat.values;
        const int m = feat.spatial();
        const int channels = static_cast<int>(att.att_plus.size());
        layer.attention.assign(channels, std::vector<T>(feat.values.size()));
        layer.bkgd.assign(channels, std::vector<T>(feat.values.size()));
        for (int c = 0; c < channels; ++c) {
            const std::vector<T> minus = att.att_minus(c);
            for (int i = 0; i < feat.n_filters; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * m;
                kernels::hadamard(layer.attention[c].data() + off, feat.channel(i),
                                  att.att_plus[c].data(), m);
                kernels::hadamard(layer.bkgd[c].data() + off, feat.channel(i),
                                  minus.data(), m);
            }
        }
        set.layers.push_back(std::move(layer));
    }
    return set;
}

#define MGST_INSTANTIATE_ATTENTION(T)                                           \
    template struct AttentionPyramid<T>;                                        \
    template struct StreamSet<T>;                                               \
    template AttentionPyramid<T> compute_attention<T>(                          \
        const AttentionSubnet<T>&, const FeaturePyramid<T>&,                    \
        const MaskPyramid<T>&);                                                 \
    template StreamSet<T> build_streams<T>(const FeaturePyramid<T>&,            \
                                           const AttentionPyramid<T>&);

MGST_INSTANTIATE_ATTENTION(float)
MGST_INSTANTIATE_ATTENTION(double)

#undef MGST_INSTANTIATE_ATTENTION

} // namespace mgst
