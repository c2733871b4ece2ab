#include "mgst/lbfgs.hpp"

#include <chrono>
#include <cmath>
#include <deque>

#include "mgst/errors.hpp"
#include "mgst/kernels/kernels.hpp"

namespace mgst {

const char* to_string(LbfgsStatus status) {
    switch (status) {
    case LbfgsStatus::Converged:
        return "converged";
    case LbfgsStatus::MaxIterations:
        return "max-iterations";
    case LbfgsStatus::Stalled:
        return "stalled";
    }
    return "unknown";
}

template <typename T>
std::vector<T> lbfgs_direction(const std::vector<std::vector<T>>& s_history,
                               const std::vector<std::vector<T>>& y_history,
                               const std::vector<T>& grad) {
    const std::size_t n = grad.size();
    const int k = static_cast<int>(s_history.size());
    std::vector<T> q = grad;
    std::vector<double> alpha(k), rho(k);
    for (int i = k - 1; i >= 0; --i) {
        rho[i] = 1.0 / kernels::dot(s_history[i].data(), y_history[i].data(), n);
        alpha[i] = rho[i] * kernels::dot(s_history[i].data(), q.data(), n);
        kernels::axpy(q.data(), static_cast<T>(-alpha[i]), y_history[i].data(), n);
    }
    if (k > 0) {
        // H0 = gamma I with gamma from the most recent pair.
        const double yy = kernels::dot(y_history[k - 1].data(), y_history[k - 1].data(), n);
        const double sy = kernels::dot(s_history[k - 1].data(), y_history[k - 1].data(), n);
        if (yy > 0.0)
            kernels::scale(q.data(), static_cast<T>(sy / yy), n);
    }
    for (int i = 0; i < k; ++i) {
        const double beta = rho[i] * kernels::dot(y_history[i].data(), q.data(), n);
        kernels::axpy(q.data(), static_cast<T>(alpha[i] - beta), s_history[i].data(), n);
    }
    kernels::scale(q.data(), T(-1), n);
    return q;
}

namespace {

template <typename T>
void project(std::vector<T>& x, T lo, T hi) {
    kernels::clamp(x.data(), x.size(), lo, hi);
}

} // namespace

template <typename T>
LbfgsStatus lbfgs_minimize(std::vector<T>& x, const LbfgsObjective<T>& objective,
                           const LbfgsOptions<T>& options,
                           std::vector<LbfgsIterate>* trace,
                           const LbfgsOnAccept<T>& on_accept) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const std::size_t n = x.size();

    const auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    };

    project(x, options.lower, options.upper);
    std::vector<T> grad(n);
    double f = objective(x, &grad);
    if (!std::isfinite(f))
        throw NonFiniteLossError("objective is non-finite at the initial point");

    std::deque<double> recent{f};
    const auto record = [&](int iter, double step) {
        LbfgsIterate it;
        it.iteration = iter;
        it.loss = f;
        it.grad_inf_norm = kernels::max_abs(grad.data(), n);
        it.step_length = step;
        it.wall_ms = elapsed_ms();
        if (trace)
            trace->push_back(it);
        if (on_accept)
            on_accept(it, x);
        return it.grad_inf_norm;
    };
    if (record(0, 0.0) < options.grad_inf_tol)
        return LbfgsStatus::Converged;

    std::vector<std::vector<T>> s_hist, y_hist;
    std::vector<T> candidate(n), step_vec(n), new_grad(n), y_vec(n);

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        std::vector<T> dir = lbfgs_direction(s_hist, y_hist, grad);
        double dg = kernels::dot(dir.data(), grad.data(), n);
        if (!(dg < 0.0)) {
            // Not a descent direction; fall back to steepest descent.
            dir = grad;
            kernels::scale(dir.data(), T(-1), n);
            dg = -kernels::dot(grad.data(), grad.data(), n);
        }

        // Unit trust on later iterations; the first step is scaled so the
        // largest pixel moves by one intensity level.
        double t = 1.0;
        if (s_hist.empty()) {
            const double gmax = kernels::max_abs(dir.data(), n);
            if (gmax > 1.0)
                t = 1.0 / gmax;
        }

        bool accepted = false;
        double f_new = 0.0;
        for (int bt = 0; bt <= options.max_backtracks; ++bt) {
            candidate = x;
            kernels::axpy(candidate.data(), static_cast<T>(t), dir.data(), n);
            project(candidate, options.lower, options.upper);
            // Armijo on the projected displacement.
            for (std::size_t i = 0; i < n; ++i)
                step_vec[i] = candidate[i] - x[i];
            const double gs = kernels::dot(grad.data(), step_vec.data(), n);
            f_new = objective(candidate, nullptr);
            if (!std::isfinite(f_new))
                throw NonFiniteLossError("objective is non-finite during line search");
            if (gs < 0.0 && f_new <= f + options.armijo_c * gs) {
                accepted = true;
                break;
            }
            t *= options.backtrack_factor;
        }

        if (!accepted) {
            // Small projected steepest-descent fallback.
            candidate = x;
            kernels::axpy(candidate.data(), static_cast<T>(-1e-3), grad.data(), n);
            project(candidate, options.lower, options.upper);
            f_new = objective(candidate, nullptr);
            if (!(f_new < f))
                return LbfgsStatus::Stalled;
            for (std::size_t i = 0; i < n; ++i)
                step_vec[i] = candidate[i] - x[i];
            t = 1e-3;
        }

        f = objective(candidate, &new_grad);

        // Curvature pair from the projected displacement.
        for (std::size_t i = 0; i < n; ++i)
            y_vec[i] = new_grad[i] - grad[i];
        const double sy = kernels::dot(step_vec.data(), y_vec.data(), n);
        if (sy > 1e-10) {
            s_hist.push_back(step_vec);
            y_hist.push_back(y_vec);
            if (static_cast<int>(s_hist.size()) > options.history) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
            }
        }

        x.swap(candidate); // the accepted (projected) point, bit for bit
        grad.swap(new_grad);

        const double ginf = record(iter, t);
        if (ginf < options.grad_inf_tol)
            return LbfgsStatus::Converged;
        recent.push_back(f);
        if (static_cast<int>(recent.size()) > options.rel_decrease_window + 1)
            recent.pop_front();
        if (static_cast<int>(recent.size()) == options.rel_decrease_window + 1) {
            const double drop = (recent.front() - f) / std::max(1.0, std::abs(recent.front()));
            if (drop < options.rel_decrease_tol)
                return LbfgsStatus::Converged;
        }
    }
    return LbfgsStatus::MaxIterations;
}

#define MGST_INSTANTIATE_LBFGS(T)                                               \
    template std::vector<T> lbfgs_direction<T>(                                 \
        const std::vector<std::vector<T>>&, const std::vector<std::vector<T>>&, \
        const std::vector<T>&);                                                 \
    template LbfgsStatus lbfgs_minimize<T>(                                     \
        std::vector<T>&, const LbfgsObjective<T>&, const LbfgsOptions<T>&,      \
        std::vector<LbfgsIterate>*, const LbfgsOnAccept<T>&);

MGST_INSTANTIATE_LBFGS(float)
MGST_INSTANTIATE_LBFGS(double)

#undef MGST_INSTANTIATE_LBFGS

} // namespace mgst
