#pragma once

// Deterministic data-parallel loop. Work items write results keyed by
// index, so the outcome is identical for any worker count; only the
// wall-clock changes.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mpd {

/// Process-wide worker count (0 = hardware concurrency).
inline int& worker_threads() {
    static int n = 0;
    return n;
}

inline int effective_threads() {
    const int n = worker_threads();
    if (n > 0) return n;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs f(i) for i in [begin, end) across the worker pool. f must only
/// write state owned by index i.
template <typename F>
void parallel_for(std::uint64_t begin, std::uint64_t end, F&& f) {
    const std::uint64_t count = end > begin ? end - begin : 0;
    if (count == 0) return;
    const int threads = static_cast<int>(
        std::min<std::uint64_t>(count, static_cast<std::uint64_t>(effective_threads())));
    if (threads <= 1) {
        for (std::uint64_t i = begin; i < end; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr error;
    std::mutex error_mu;
    const std::uint64_t chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::uint64_t lo = begin + chunk * t;
        const std::uint64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi]() {
            try {
                for (std::uint64_t i = lo; i < hi; ++i) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace mpd
