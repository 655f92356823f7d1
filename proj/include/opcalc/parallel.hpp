#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace opcalc {

// Parallelism cap: OPCALC_THREADS if set, otherwise all hardware threads.
inline unsigned thread_budget() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("OPCALC_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return std::min<unsigned>(hw, static_cast<unsigned>(v));
    }
    return hw;
}

// Runs fn(i) for i in [0, n). Work items must be independent; results must be
// written to disjoint slots so the outcome is identical for any thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned nt = std::min<std::size_t>(thread_budget(), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nt) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace opcalc
