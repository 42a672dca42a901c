#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ehl/env.hpp"
#include "ehl/rng.hpp"

namespace ehl::harness {

/// Training stream: zeta_eh ~ U(0.5, 1.5), lambda ~ U(0.3, 0.6), ids 0..n-1.
inline std::vector<TaskProfile> generate_training_tasks(std::size_t n, Rng& rng) {
    if (n < 1) {
        throw std::invalid_argument("generate_training_tasks: need at least one task");
    }
    std::vector<TaskProfile> tasks;
    tasks.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        TaskProfile t;
        t.task_id = static_cast<int>(j);
        t.zeta_eh = 0.5 + 1.0 * uniform01(rng);
        t.lambda_eff = 0.3 + 0.3 * uniform01(rng);
        tasks.push_back(t);
    }
    return tasks;
}

/// The four held-out conditions, scale and efficiency paired by position.
inline std::vector<TaskProfile> test_tasks() {
    return {
        {0, 0.6, 0.35},
        {1, 1.0, 0.45},
        {2, 1.4, 0.55},
        {3, 1.8, 0.65},
    };
}

} // namespace ehl::harness
