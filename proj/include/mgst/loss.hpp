#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "mgst/attention.hpp"
#include "mgst/image.hpp"
#include "mgst/network.hpp"

namespace mgst {

/// Weights of the combined objective. alpha applies to every content tap,
/// beta to every style tap; lambda_g/lambda_l split each family into its
/// global and local (region) term. The global content term of the paper sums
/// a channel-independent quantity over mask channels; literal_channel_sum
/// keeps that factor (the default), clearing it drops it.
struct LossWeights {
    double lambda_g = 1.0;
    double lambda_l = 1.0;
    double alpha = 100.0;
    double beta = 10000.0;
    double theta = 1e-3;
    bool literal_channel_sum = true;

    void validate() const;
};

enum class Region { Attention, Bkgd };

/// Unnormalized masked Gram (F .* A)(F .* A)^T with its normalization
/// constant recorded; symmetric and positive semidefinite. layer_id and
/// channel identify where the Gram came from when the caller says so.
struct GramMatrix {
    int n = 0;
    int m = 0;
    std::vector<double> values; // n x n row-major
    double norm_constant = 0.0; // 1 / (4 n^2 m^2)
    int layer_id = -1;
    int channel = -1;
    Region region = Region::Attention;

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
};

template <typename T>
GramMatrix masked_gram(const T* features, const T* attention_map, int n, int m,
                       int layer_id = -1, int channel = -1,
                       Region region = Region::Attention);

/// Per-layer loss terms. gc/lc are zero on non-content taps, gs/ls on
/// non-style taps; each is summed over mask channels (gc including the
/// literal channel factor when enabled). The by-channel vectors carry the
/// unsummed breakdown where the term applies.
struct LayerLossTerms {
    int layer_id = 0;
    double gc = 0.0;
    double lc = 0.0;
    double gs = 0.0;
    double ls = 0.0;
    std::vector<double> lc_by_channel;
    std::vector<double> gs_by_channel;
    std::vector<double> ls_by_channel;
};

struct LossReport {
    std::vector<LayerLossTerms> layers;
    double tv = 0.0;
    double total = 0.0;

    /// total = sum_l alpha (lg gc + ll lc) + sum_l beta (lg gs + ll ls) + theta tv
    double recompute_total(const LossWeights& weights) const;
};

/// Writes one CSV row per report: iter, then gc/lc/gs/ls per layer, tv, total.
void write_loss_report_header(std::ostream& os, const LossReport& shape);
void write_loss_report_row(std::ostream& os, int iteration, const LossReport& report);

template <typename T>
struct ContentLossResult {
    double gc = 0.0;
    double lc = 0.0;
    std::vector<double> lc_by_channel;
    double value = 0.0;   // lambda_g * gc + lambda_l * lc
    std::vector<T> grad;  // d value / d F_full[O], n x m
};

/// Feature reconstruction loss of one tap layer. streams_o must have been
/// built with the content image's attention (attn_i), so its attention
/// stream is F_full[O] weighted by the content map.
template <typename T>
ContentLossResult<T> content_loss(const StreamSet<T>& streams_o,
                                  const StreamSet<T>& streams_i,
                                  const AttentionPyramid<T>& attn_i,
                                  const LossWeights& weights, int layer_id);

template <typename T>
struct StyleLossResult {
    double gs = 0.0;
    double ls = 0.0;
    std::vector<double> gs_by_channel;
    std::vector<double> ls_by_channel;
    double value = 0.0;  // lambda_g * gs + lambda_l * ls
    std::vector<T> grad; // d value / d F_full[O]
};

/// Style reconstruction loss of one tap layer over masked Grams. The output
/// side is masked by the content image's attention, the style side by its
/// own; each Gram is normalized by its own spatial size, so the style image
/// may differ in resolution. Throws ShapeMismatchError if filter counts
/// disagree.
template <typename T>
StyleLossResult<T> style_loss(const StreamSet<T>& streams_o,
                              const AttentionPyramid<T>& attn_i,
                              const StreamSet<T>& streams_s,
                              const AttentionPyramid<T>& attn_s,
                              const LossWeights& weights, int layer_id);

/// Smooth total variation: sum of squared forward differences in x and y,
/// per channel. If grad is non-null it is overwritten with d tv / d image.
template <typename T>
double tv_loss(const Image<T>& image, Image<T>* grad);

/// The full objective with the constant side (content features, attention
/// maps, style Gram targets) precomputed once, so optimization loops pay
/// only for the output image's pass.
template <typename T>
class Objective {
public:
    Objective(const RgbMaskPair<T>& content, const RgbMaskPair<T>& style,
              const NetworkSpec<T>& net, const AttentionSubnet<T>& subnet,
              LossWeights weights);

    /// Loss report plus, when grad is non-null, d L_total / d output pixels.
    LossReport evaluate(const Image<T>& output, Image<T>* grad) const;

    const LossWeights& weights() const { return weights_; }
    int content_height() const { return height_; }
    int content_width() const { return width_; }

    /// Test hook: flips the sign of the TV gradient to prove the gradient
    /// checker catches a corrupted derivative.
    void set_negate_tv_gradient(bool v) { negate_tv_gradient_ = v; }

private:
    struct StyleTargetLayer {
        int layer_id = 0;
        // Per mask channel, normalized Gram of the style image (n x n).
        std::vector<std::vector<double>> bkgd;
        std::vector<std::vector<double>> attention;
    };

    NetworkSpec<T> net_;
    LossWeights weights_;
    int height_ = 0;
    int width_ = 0;
    int mask_channels_ = 0;
    FeaturePyramid<T> feats_content_;
    AttentionPyramid<T> attn_content_;
    std::vector<StyleTargetLayer> style_targets_;
    bool negate_tv_gradient_ = false;
};

/// One-shot evaluation of the combined objective (builds the context and
/// evaluates once).
template <typename T>
std::pair<LossReport, Image<T>> total_objective(const Image<T>& output,
                                                const RgbMaskPair<T>& content,
                                                const RgbMaskPair<T>& style,
                                                const NetworkSpec<T>& net,
                                                const AttentionSubnet<T>& subnet,
                                                const LossWeights& weights);

} // namespace mgst
