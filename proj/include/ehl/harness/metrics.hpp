#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehl::harness {

inline constexpr std::size_t kDefaultWindow = 10;

/// Trailing moving average; entry k covers curve[k .. k + w - 1], so entry k
/// belongs to iteration k + w - 1. The window shrinks to the curve length.
inline std::vector<double> trailing_mean(const std::vector<double>& curve, std::size_t window) {
    if (curve.empty()) {
        throw std::invalid_argument("trailing_mean: empty curve");
    }
    const std::size_t w = std::max<std::size_t>(1, std::min(window, curve.size()));
    std::vector<double> out;
    out.reserve(curve.size() - w + 1);
    for (std::size_t end = w; end <= curve.size(); ++end) {
        double sum = 0.0;
        for (std::size_t i = end - w; i < end; ++i) sum += curve[i];
        out.push_back(sum / static_cast<double>(w));
    }
    return out;
}

/// Mean of the last window of the curve.
inline double final_value(const std::vector<double>& curve, std::size_t window = kDefaultWindow) {
    return trailing_mean(curve, window).back();
}

/// First iteration whose trailing-window mean reaches
/// final - (1 - fraction) * |final|, where final is the last window's mean.
/// Returns curve.size() when no window qualifies (non-finite curves).
inline std::size_t convergence_iteration(const std::vector<double>& curve, double fraction,
                                         std::size_t window = kDefaultWindow) {
    if (curve.empty()) {
        throw std::invalid_argument("convergence_iteration: empty curve");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("convergence_iteration: fraction must lie in (0, 1]");
    }
    const std::vector<double> smooth = trailing_mean(curve, window);
    const std::size_t offset = curve.size() - smooth.size();
    const double last = smooth.back();
    const double threshold = last - (1.0 - fraction) * std::abs(last);
    for (std::size_t k = 0; k < smooth.size(); ++k) {
        if (smooth[k] >= threshold) return k + offset;
    }
    return curve.size();
}

namespace method {
inline constexpr const char* mt_l2rl = "mt-l2rl";
inline constexpr const char* vanilla_rl = "vanilla-rl";
inline constexpr const char* lyapunov = "lyapunov";
} // namespace method

struct RunRecord {
    std::string method;
    int task_id = 0;
    std::uint64_t seed = 0;
    std::vector<double> curve;
    double wall_clock_s = 0.0;
    std::size_t convergence_iteration = 0;
    double final_return = 0.0;
    std::string error; // empty when the run succeeded

    bool ok() const { return error.empty(); }
};

} // namespace ehl::harness
