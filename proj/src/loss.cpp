#include "mgst/loss.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mgst/errors.hpp"
#include "mgst/kernels/kernels.hpp"

namespace mgst {

void LossWeights::validate() const {
    const double vals[] = {lambda_g, lambda_l, alpha, beta, theta};
    for (double v : vals)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ShapeMismatchError("loss weights must be finite and >= 0");
}

template <typename T>
GramMatrix masked_gram(const T* features, const T* attention_map, int n, int m,
                       int layer_id, int channel, Region region) {
    GramMatrix g;
    g.n = n;
    g.m = m;
    g.norm_constant = 1.0 / (4.0 * static_cast<double>(n) * n * m * m);
    g.layer_id = layer_id;
    g.channel = channel;
    g.region = region;
    g.values.resize(static_cast<std::size_t>(n) * n);
    std::vector<T> scratch(static_cast<std::size_t>(n) * m);
    kernels::masked_gram(features, attention_map, n, m, g.values.data(),
                         scratch.data());
    return g;
}

double LossReport::recompute_total(const LossWeights& w) const {
    double acc = 0.0;
    for (const auto& layer : layers) {
        acc += w.alpha * (w.lambda_g * layer.gc + w.lambda_l * layer.lc);
        acc += w.beta * (w.lambda_g * layer.gs + w.lambda_l * layer.ls);
    }
    return acc + w.theta * tv;
}

void write_loss_report_header(std::ostream& os, const LossReport& shape) {
    os << "iter";
    for (const auto& layer : shape.layers)
        os << ",gc_" << layer.layer_id << ",lc_" << layer.layer_id << ",gs_"
           << layer.layer_id << ",ls_" << layer.layer_id;
    os << ",tv,total\n";
}

void write_loss_report_row(std::ostream& os, int iteration, const LossReport& r) {
    os << iteration;
    const auto old_precision = os.precision(12);
    for (const auto& layer : r.layers)
        os << ',' << layer.gc << ',' << layer.lc << ',' << layer.gs << ','
           << layer.ls;
    os << ',' << r.tv << ',' << r.total << '\n';
    os.precision(old_precision);
}

namespace {

// Content terms of one layer plus optional gradient accumulation:
// df += df_coef * d(lambda_g*gc + lambda_l*lc)/dF.
template <typename T>
void accumulate_content(const T* f_o, const T* f_i,
                        const std::vector<std::vector<T>>& att_plus, int n, int m,
                        const LossWeights& w, double& gc_out, double& lc_out,
                        std::vector<double>* lc_by_channel, T* df, double df_coef) {
    const int channels = static_cast<int>(att_plus.size());
    const std::size_t total = static_cast<std::size_t>(n) * m;
    const double norm = 1.0 / (2.0 * static_cast<double>(n) * m);
    const double c_eff = w.literal_channel_sum ? static_cast<double>(channels) : 1.0;

    // Row-by-row like the local term below, so that with an all-ones map the
    // two terms are bit-identical.
    double gc_acc = 0.0;
    for (int p = 0; p < n; ++p) {
        const std::size_t off = static_cast<std::size_t>(p) * m;
        gc_acc += kernels::sum_sq_diff(f_o + off, f_i + off, m);
    }
    const double gc_raw = gc_acc * norm;
    gc_out = c_eff * gc_raw;

    lc_out = 0.0;
    for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int p = 0; p < n; ++p) {
            const std::size_t off = static_cast<std::size_t>(p) * m;
            acc += kernels::masked_sum_sq_diff(f_o + off, f_i + off,
                                               att_plus[c].data(), m);
        }
        const double lc_c = acc * norm;
        lc_out += lc_c;
        if (lc_by_channel)
            lc_by_channel->push_back(lc_c);
    }

    if (!df)
        return;
    std::vector<T> diff(total);
    for (std::size_t i = 0; i < total; ++i)
        diff[i] = f_o[i] - f_i[i];
    // d gc/dF = c_eff * (F_O - F_I) / (n m)
    const double cg = df_coef * w.lambda_g * c_eff / (static_cast<double>(n) * m);
    kernels::axpy(df, static_cast<T>(cg), diff.data(), total);
    // d lc/dF = (F_O - F_I) .* a^2 / (n m) per channel
    const double cl = df_coef * w.lambda_l / (static_cast<double>(n) * m);
    std::vector<T> a_sq(static_cast<std::size_t>(m));
    for (int c = 0; c < channels; ++c) {
        kernels::hadamard(a_sq.data(), att_plus[c].data(), att_plus[c].data(), m);
        for (int p = 0; p < n; ++p) {
            const std::size_t off = static_cast<std::size_t>(p) * m;
            kernels::masked_scaled_add(df + off, diff.data() + off, a_sq.data(), cl, m);
        }
    }
}

// Normalized Gram (G / m) of F masked by the given map.
template <typename T>
std::vector<double> normalized_gram(const T* f, const T* a, int n, int m,
                                    T* scratch) {
    std::vector<double> g(static_cast<std::size_t>(n) * n);
    kernels::masked_gram(f, a, n, m, g.data(), scratch);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (auto& v : g)
        v *= inv_m;
    return g;
}

// One region term of the style loss: 1/(4 n^2) * ||G_O/m - target||^2, plus
// the optional gradient df += df_coef * lambda * d term / dF.
template <typename T>
double style_region_term(const T* f_o, const T* a, int n, int m,
                         const std::vector<double>& target, double lambda,
                         T* df, double df_coef, T* scratch) {
    std::vector<double> diff = normalized_gram(f_o, a, n, m, scratch);
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] -= target[i];
    const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
    const double term = kernels::dot(diff.data(), diff.data(), diff.size()) *
                        0.25 * inv_n2;
    if (df && lambda != 0.0) {
        const double coef = df_coef * lambda * inv_n2 / static_cast<double>(m);
        kernels::gram_backprop(diff.data(), f_o, a, n, m, coef, df, scratch);
    }
    return term;
}

} // namespace

template <typename T>
ContentLossResult<T> content_loss(const StreamSet<T>& streams_o,
                                  const StreamSet<T>& streams_i,
                                  const AttentionPyramid<T>& attn_i,
                                  const LossWeights& weights, int layer_id) {
    weights.validate();
    const auto& lo = streams_o.by_id(layer_id);
    const auto& li = streams_i.by_id(layer_id);
    const auto& att = attn_i.by_id(layer_id);
    if (lo.n_filters != li.n_filters || lo.spatial() != li.spatial() ||
        att.spatial() != lo.spatial())
        throw ShapeMismatchError("content loss operands disagree on shape");

    ContentLossResult<T> res;
    res.grad.assign(lo.full.size(), T(0));
    accumulate_content(lo.full.data(), li.full.data(), att.att_plus, lo.n_filters,
                       lo.spatial(), weights, res.gc, res.lc, &res.lc_by_channel,
                       res.grad.data(), 1.0);
    res.value = weights.lambda_g * res.gc + weights.lambda_l * res.lc;
    return res;
}

template <typename T>
StyleLossResult<T> style_loss(const StreamSet<T>& streams_o,
                              const AttentionPyramid<T>& attn_i,
                              const StreamSet<T>& streams_s,
                              const AttentionPyramid<T>& attn_s,
                              const LossWeights& weights, int layer_id) {
    weights.validate();
    const auto& lo = streams_o.by_id(layer_id);
    const auto& ls_layer = streams_s.by_id(layer_id);
    const auto& att_i = attn_i.by_id(layer_id);
    const auto& att_s = attn_s.by_id(layer_id);
    if (lo.n_filters != ls_layer.n_filters)
        throw ShapeMismatchError("style loss filter counts disagree");
    if (att_i.spatial() != lo.spatial() || att_s.spatial() != ls_layer.spatial())
        throw ShapeMismatchError("attention maps disagree with features");
    if (att_i.att_plus.size() != att_s.att_plus.size())
        throw ShapeMismatchError("mask channel counts disagree");

    const int n = lo.n_filters;
    const int m_o = lo.spatial();
    const int m_s = ls_layer.spatial();
    const int channels = static_cast<int>(att_i.att_plus.size());

    StyleLossResult<T> res;
    res.grad.assign(lo.full.size(), T(0));
    std::vector<T> scratch(std::max(lo.full.size(), ls_layer.full.size()));
    for (int c = 0; c < channels; ++c) {
        const std::vector<T> minus_i = att_i.att_minus(c);
        const std::vector<T> minus_s = att_s.att_minus(c);
        const auto target_bkgd = normalized_gram(ls_layer.full.data(), minus_s.data(),
                                                 n, m_s, scratch.data());
        const auto target_att = normalized_gram(ls_layer.full.data(),
                                                att_s.att_plus[c].data(), n, m_s,
                                                scratch.data());
        const double gs_c =
            style_region_term(lo.full.data(), minus_i.data(), n, m_o, target_bkgd,
                              weights.lambda_g, res.grad.data(), 1.0, scratch.data());
        const double ls_c = style_region_term(
            lo.full.data(), att_i.att_plus[c].data(), n, m_o, target_att,
            weights.lambda_l, res.grad.data(), 1.0, scratch.data());
        res.gs += gs_c;
        res.ls += ls_c;
        res.gs_by_channel.push_back(gs_c);
        res.ls_by_channel.push_back(ls_c);
    }
    res.value = weights.lambda_g * res.gs + weights.lambda_l * res.ls;
    return res;
}

template <typename T>
double tv_loss(const Image<T>& image, Image<T>* grad) {
    const int h = image.height(), w = image.width(), c = image.channels();
    const T* x = image.data();
    const std::size_t row = static_cast<std::size_t>(w) * c;

    double value = 0.0;
    // Horizontal neighbors are c elements apart within a row, vertical
    // neighbors one full row apart across the whole buffer.
    for (int y = 0; y < h; ++y)
        value += kernels::sum_sq_diff(x + y * row + c, x + y * row, row - c);
    if (h > 1)
        value += kernels::sum_sq_diff(x + row, x, (static_cast<std::size_t>(h) - 1) * row);

    if (grad) {
        *grad = Image<T>(h, w, c);
        T* g = grad->data();
        for (int y = 0; y < h; ++y) {
            const std::size_t base = y * row;
            for (std::size_t i = 0; i + c < row; ++i) {
                const T d = x[base + i + c] - x[base + i];
                g[base + i] -= 2 * d;
                g[base + i + c] += 2 * d;
            }
        }
        const std::size_t vspan = (static_cast<std::size_t>(h) - 1) * row;
        for (std::size_t i = 0; h > 1 && i < vspan; ++i) {
            const T d = x[i + row] - x[i];
            g[i] -= 2 * d;
            g[i + row] += 2 * d;
        }
    }
    return value;
}

template <typename T>
Objective<T>::Objective(const RgbMaskPair<T>& content, const RgbMaskPair<T>& style,
                        const NetworkSpec<T>& net, const AttentionSubnet<T>& subnet,
                        LossWeights weights)
    : net_(net), weights_(std::move(weights)) {
    weights_.validate();
    net_.validate();
    if (content.mask.channels() < 1)
        throw ShapeMismatchError("mask needs at least one channel");
    if (content.mask.channels() != style.mask.channels())
        throw ShapeMismatchError("content and style masks have different channel counts");
    validate_mask(content.mask);
    validate_mask(style.mask);
    height_ = content.image.height();
    width_ = content.image.width();
    mask_channels_ = content.mask.channels();

    feats_content_ = forward(net_, content.image);
    attn_content_ = compute_attention(subnet, feats_content_,
                                      downsample_mask(content.mask, net_));

    const FeaturePyramid<T> feats_style = forward(net_, style.image);
    const AttentionPyramid<T> attn_style = compute_attention(
        subnet, feats_style, downsample_mask(style.mask, net_));

    for (int id : net_.style_layer_ids) {
        const auto& feat = feats_style.by_id(id);
        const auto& att = attn_style.by_id(id);
        StyleTargetLayer target;
        target.layer_id = id;
        std::vector<T> scratch(feat.values.size());
        for (int c = 0; c < mask_channels_; ++c) {
            const std::vector<T> minus = att.att_minus(c);
            target.bkgd.push_back(normalized_gram(feat.values.data(), minus.data(),
                                                  feat.n_filters, feat.spatial(),
                                                  scratch.data()));
            target.attention.push_back(
                normalized_gram(feat.values.data(), att.att_plus[c].data(),
                                feat.n_filters, feat.spatial(), scratch.data()));
        }
        style_targets_.push_back(std::move(target));
    }
}

template <typename T>
LossReport Objective<T>::evaluate(const Image<T>& output, Image<T>* grad) const {
    if (output.height() != height_ || output.width() != width_ ||
        output.channels() != 3)
        throw ShapeMismatchError("output dimensions must match the content image");

    const ForwardTrace<T> trace = forward_trace(net_, output);

    LossReport report;
    std::vector<FeatureGrad<T>> feature_grads;
    for (int id : net_.tap_layer_ids()) {
        const auto& stage = trace.outputs[id];
        const int n = stage.channels;
        const int m = stage.height * stage.width;
        const T* f_o = stage.planes.data();
        const auto& att = attn_content_.by_id(id);

        LayerLossTerms terms;
        terms.layer_id = id;

        FeatureGrad<T> fg;
        fg.layer_id = id;
        T* df = nullptr;
        if (grad) {
            fg.values.assign(stage.planes.size(), T(0));
            df = fg.values.data();
        }

        const bool content_tap =
            std::find(net_.content_layer_ids.begin(), net_.content_layer_ids.end(),
                      id) != net_.content_layer_ids.end();
        if (content_tap) {
            const auto& f_i = feats_content_.by_id(id);
            accumulate_content(f_o, f_i.values.data(), att.att_plus, n, m, weights_,
                               terms.gc, terms.lc, &terms.lc_by_channel, df,
                               weights_.alpha);
        }

        const StyleTargetLayer* target = nullptr;
        for (const auto& t : style_targets_)
            if (t.layer_id == id)
                target = &t;
        if (target) {
            std::vector<T> scratch(stage.planes.size());
            for (int c = 0; c < mask_channels_; ++c) {
                const std::vector<T> minus = att.att_minus(c);
                const double gs_c = style_region_term(
                    f_o, minus.data(), n, m, target->bkgd[c], weights_.lambda_g, df,
                    weights_.beta, scratch.data());
                const double ls_c = style_region_term(
                    f_o, att.att_plus[c].data(), n, m, target->attention[c],
                    weights_.lambda_l, df, weights_.beta, scratch.data());
                terms.gs += gs_c;
                terms.ls += ls_c;
                terms.gs_by_channel.push_back(gs_c);
                terms.ls_by_channel.push_back(ls_c);
            }
        }

        report.layers.push_back(terms);
        if (grad && (content_tap || target))
            feature_grads.push_back(std::move(fg));
    }

    if (grad) {
        *grad = backward_from_trace(net_, trace, feature_grads);
        Image<T> tv_grad;
        report.tv = tv_loss(output, &tv_grad);
        const double tv_sign = negate_tv_gradient_ ? -1.0 : 1.0;
        kernels::axpy(grad->data(), static_cast<T>(tv_sign * weights_.theta),
                      tv_grad.data(), grad->size());
    } else {
        report.tv = tv_loss<T>(output, nullptr);
    }

    report.total = report.recompute_total(weights_);
    if (!std::isfinite(report.total))
        throw NonFiniteLossError("objective evaluated non-finite");
    return report;
}

template <typename T>
std::pair<LossReport, Image<T>> total_objective(const Image<T>& output,
                                                const RgbMaskPair<T>& content,
                                                const RgbMaskPair<T>& style,
                                                const NetworkSpec<T>& net,
                                                const AttentionSubnet<T>& subnet,
                                                const LossWeights& weights) {
    const Objective<T> objective(content, style, net, subnet, weights);
    Image<T> grad;
    LossReport report = objective.evaluate(output, &grad);
    return {std::move(report), std::move(grad)};
}

#define MGST_INSTANTIATE_LOSS(T)                                                 \
    template GramMatrix masked_gram<T>(const T*, const T*, int, int, int, int,   \
                                       Region);                                  \
    template ContentLossResult<T> content_loss<T>(                               \
        const StreamSet<T>&, const StreamSet<T>&, const AttentionPyramid<T>&,    \
        const LossWeights&, int);                                                \
    template StyleLossResult<T> style_loss<T>(                                   \
        const StreamSet<T>&, const AttentionPyramid<T>&, const StreamSet<T>&,    \
        const AttentionPyramid<T>&, const LossWeights&, int);                    \
    template double tv_loss<T>(const Image<T>&, Image<T>*);                      \
    template class Objective<T>;                                                 \
    template std::pair<LossReport, Image<T>> total_objective<T>(                 \
        const Image<T>&, const RgbMaskPair<T>&, const RgbMaskPair<T>&,           \
        const NetworkSpec<T>&, const AttentionSubnet<T>&, const LossWeights&);

MGST_INSTANTIATE_LOSS(float)
MGST_INSTANTIATE_LOSS(double)

#undef MGST_INSTANTIATE_LOSS

} // namespace mgst
