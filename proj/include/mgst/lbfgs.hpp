#pragma once

#include <functional>
#include <vector>

namespace mgst {

/// Box-constrained limited-memory BFGS with Armijo backtracking. Iterates
/// are projected onto [lower, upper] before every objective evaluation, so
/// all accepted points are feasible and the accepted loss sequence is
/// non-increasing by construction.
template <typename T>
struct LbfgsOptions {
    int max_iterations = 500;
    int history = 10;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 20;
    /// Converged when the relative loss decrease over the window drops below
    /// this, or when the gradient infinity norm does.
    double rel_decrease_tol = 1e-7;
    int rel_decrease_window = 10;
    double grad_inf_tol = 1e-8;
    T lower = T(0);
    T upper = T(255);
};

enum class LbfgsStatus { Converged, MaxIterations, Stalled };

const char* to_string(LbfgsStatus status);

/// One accepted iteration. Iteration 0 is the initial (projected) point.
struct LbfgsIterate {
    int iteration = 0;
    double loss = 0.0;
    double grad_inf_norm = 0.0;
    double step_length = 0.0;
    double wall_ms = 0.0;
};

/// Objective callback: writes the gradient when grad is non-null and returns
/// the loss at x (x is always inside the box).
template <typename T>
using LbfgsObjective =
    std::function<double(const std::vector<T>& x, std::vector<T>* grad)>;

/// Called after each accepted iterate (including iteration 0).
template <typename T>
using LbfgsOnAccept = std::function<void(const LbfgsIterate&, const std::vector<T>&)>;

/// Two-loop recursion over the stored (s, y) pairs; with empty history the
/// direction is the negative gradient. Pairs are ordered oldest first.
template <typename T>
std::vector<T> lbfgs_direction(const std::vector<std::vector<T>>& s_history,
                               const std::vector<std::vector<T>>& y_history,
                               const std::vector<T>& grad);

template <typename T>
LbfgsStatus lbfgs_minimize(std::vector<T>& x, const LbfgsObjective<T>& objective,
                           const LbfgsOptions<T>& options,
                           std::vector<LbfgsIterate>* trace = nullptr,
                           const LbfgsOnAccept<T>& on_accept = {});

} // namespace mgst
