#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace hazard_dantzig {

/// Worker count: explicit value, else HAZARD_DANTZIG_JOBS, else the hardware thread count.
inline int resolve_jobs(std::optional<int> requested) {
    if (requested && *requested > 0) return *requested;
    if (const char* env = std::getenv("HAZARD_DANTZIG_JOBS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Calls f(i) for i in [0, count) on up to `jobs` threads. Callers write into
 * slot i of a preallocated result, so output order never depends on
 * scheduling. The exception from the lowest failing index is rethrown.
 */
template <class F>
void parallel_for(int count, int jobs, F&& f) {
    if (count <= 0) return;
    jobs = std::clamp(jobs, 1, count);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    auto run = [&](int i) {
        try {
            f(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    };
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) run(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&] {
                for (int i = next++; i < count; i = next++) run(i);
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace hazard_dantzig
