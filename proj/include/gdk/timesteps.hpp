#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gdk {

enum class TimestepMode { Leading, Trailing };

// Descending inference timesteps tau_1 > ... > tau_k, all in [1, T].
// Trailing always starts at T; leading always ends at 1 and never visits T,
// which is the train/inference mismatch the trailing selection repairs.
struct TimestepPlan {
    std::vector<int> steps;
    TimestepMode mode = TimestepMode::Trailing;

    int k() const { return static_cast<int>(steps.size()); }
};

inline TimestepPlan select_timesteps(int T, int k, TimestepMode mode) {
    if (T < 1) throw std::invalid_argument("select_timesteps: T must be >= 1");
    if (k < 1) throw std::invalid_argument("select_timesteps: k must be >= 1");
    if (k > T) throw std::invalid_argument("select_timesteps: k exceeds T");
    if (T % k != 0) {
        throw std::invalid_argument("select_timesteps: T=" + std::to_string(T) +
                                    " not divisible by k=" + std::to_string(k));
    }

    const int stride = T / k;
    TimestepPlan plan;
    plan.mode = mode;
    plan.steps.resize(k);
    for (int i = 1; i <= k; ++i) {
        if (mode == TimestepMode::Leading) {
            plan.steps[i - 1] = T - i * stride + 1;  // [T - T/k + 1, ..., 1]
        } else {
            plan.steps[i - 1] = T - (i - 1) * stride;  // [T, T - T/k, ..., T/k]
        }
    }
    return plan;
}

}  // namespace gdk
