#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mgst/lbfgs.hpp"
#include "mgst/loss.hpp"

namespace mgst {

/// Settings of one purification run (projected L-BFGS over the output
/// image's pixels, initialized from white noise unless warm_start).
template <typename T>
struct OptimizerConfig {
    LbfgsOptions<T> lbfgs;
    std::uint64_t noise_seed = 0;
    bool warm_start = false; // initialize from the content image instead

    void validate() const;
};

struct OptimizerTrace {
    std::vector<LbfgsIterate> iterates;
    std::vector<LossReport> reports; // one per accepted iterate
    LbfgsStatus status = LbfgsStatus::MaxIterations;
};

/// CSV with one row per accepted iteration: iter, loss, grad_inf, step and,
/// when with_timings, wall-clock ms. Timings are off by default so repeated
/// runs of the same configuration produce byte-identical files.
void write_trace_csv(std::ostream& os, const OptimizerTrace& trace,
                     bool with_timings = false);

template <typename T>
struct PurifyResult {
    Image<T> output;
    OptimizerTrace trace;
};

/// Synthesizes the purified image for a content/style pair of RGB-mask
/// pairs. Deterministic given inputs, weights and seed.
template <typename T>
PurifyResult<T> purify(const RgbMaskPair<T>& content, const RgbMaskPair<T>& style,
                       const NetworkSpec<T>& net, const AttentionSubnet<T>& subnet,
                       const LossWeights& weights, const OptimizerConfig<T>& config);

} // namespace mgst
