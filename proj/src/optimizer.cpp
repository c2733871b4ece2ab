#include "mgst/optimizer.hpp"

#include <algorithm>
#include <ostream>
#include <string>

#include "mgst/errors.hpp"

namespace mgst {

template <typename T>
void OptimizerConfig<T>::validate() const {
    if (lbfgs.max_iterations < 1)
        throw ShapeMismatchError("max_iterations must be >= 1");
    if (lbfgs.history < 1)
        throw ShapeMismatchError("history size must be >= 1");
}

void write_trace_csv(std::ostream& os, const OptimizerTrace& trace,
                     bool with_timings) {
    os << "iter,loss,grad_inf,step";
    if (with_timings)
        os << ",wall_ms";
    os << '\n';
    const auto old_precision = os.precision(12);
    for (const auto& it : trace.iterates) {
        os << it.iteration << ',' << it.loss << ',' << it.grad_inf_norm << ','
           << it.step_length;
        if (with_timings)
            os << ',' << it.wall_ms;
        os << '\n';
    }
    os.precision(old_precision);
}

template <typename T>
PurifyResult<T> purify(const RgbMaskPair<T>& content, const RgbMaskPair<T>& style,
                       const NetworkSpec<T>& net, const AttentionSubnet<T>& subnet,
                       const LossWeights& weights, const OptimizerConfig<T>& config) {
    config.validate();
    const Objective<T> objective(content, style, net, subnet, weights);

    const int h = content.image.height();
    const int w = content.image.width();
    Image<T> output = config.warm_start
                          ? content.image
                          : white_noise_image<T>(h, w, config.noise_seed);

    std::vector<T> x(output.data(), output.data() + output.size());

    PurifyResult<T> result;
    Image<T> grad_image;
    Image<T> point(h, w, 3);
    LossReport last_report; // from the most recent gradient evaluation, which
                            // always happens at the point about to be accepted
    const LbfgsObjective<T> fg = [&](const std::vector<T>& v, std::vector<T>* grad) {
        std::copy(v.begin(), v.end(), point.data());
        if (!grad) {
            const LossReport report = objective.evaluate(point, nullptr);
            return report.total;
        }
        last_report = objective.evaluate(point, &grad_image);
        grad->assign(grad_image.data(), grad_image.data() + grad_image.size());
        return last_report.total;
    };

    const LbfgsOnAccept<T> on_accept = [&](const LbfgsIterate&, const std::vector<T>&) {
        result.trace.reports.push_back(last_report);
    };

    try {
        result.trace.status = lbfgs_minimize<T>(x, fg, config.lbfgs,
                                                &result.trace.iterates, on_accept);
    } catch (const NonFiniteLossError& e) {
        const int last_good = result.trace.iterates.empty()
                                  ? -1
                                  : result.trace.iterates.back().iteration;
        throw NonFiniteLossError(std::string(e.what()) + " (last good iteration " +
                                 std::to_string(last_good) + ")");
    }

    std::copy(x.begin(), x.end(), output.data());
    result.output = std::move(output);
    return result;
}

#define MGST_INSTANTIATE_OPTIMIZER(T)                                           \
    template struct OptimizerConfig<T>;                                         \
    template PurifyResult<T> purify<T>(const RgbMaskPair<T>&,                   \
                                       const RgbMaskPair<T>&,                   \
                                       const NetworkSpec<T>&,                   \
                                       const AttentionSubnet<T>&,               \
                                       const LossWeights&,                      \
                                       const OptimizerConfig<T>&);

MGST_INSTANTIATE_OPTIMIZER(float)
MGST_INSTANTIATE_OPTIMIZER(double)

#undef MGST_INSTANTIATE_OPTIMIZER

} // namespace mgst
