#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdk {

enum class BetaSpacing { Linear, ScaledLinear };

// Forward-process definition: beta_t, alpha_t = 1 - beta_t and the cumulative
// product alpha_bar_t for t = 1..T. alpha_bar(0) is defined as exactly 1 so the
// final DDIM step to t_prev = 0 returns the clean reconstruction.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;       // index t-1
    std::vector<double> alphas;      // index t-1
    std::vector<double> alpha_bars;  // index t-1

    double beta(int t) const { return betas[check(t) - 1]; }
    double alpha(int t) const { return alphas[check(t) - 1]; }

    double alpha_bar(int t) const {
        if (t == 0) return 1.0;
        return alpha_bars[check(t) - 1];
    }

  private:
    int check(int t) const {
        if (t < 1 || t > T) {
            throw std::invalid_argument("NoiseSchedule: timestep " + std::to_string(t) +
                                        " outside [1, " + std::to_string(T) + "]");
        }
        return t;
    }
};

inline NoiseSchedule build_schedule(int T, double beta_start, double beta_end, BetaSpacing spacing) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");
    }

    NoiseSchedule s;
    s.T = T;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);

    double lo = beta_start;
    double hi = beta_end;
    if (spacing == BetaSpacing::ScaledLinear) {
        lo = std::sqrt(beta_start);
        hi = std::sqrt(beta_end);
    }

    double running = 1.0;
    for (int t = 1; t <= T; ++t) {
        double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        double b = lo + frac * (hi - lo);
        if (spacing == BetaSpacing::ScaledLinear) b = b * b;
        s.betas[t - 1] = b;
        s.alphas[t - 1] = 1.0 - b;
        running *= s.alphas[t - 1];
        s.alpha_bars[t - 1] = running;
    }
    return s;
}

}  // namespace gdk
