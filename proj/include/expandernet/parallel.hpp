#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace expandernet {

namespace detail {
inline std::atomic<int>& thread_override() {
    static std::atomic<int> value{0};
    return value;
}
}  // namespace detail

/// Worker count for kernels. EXPANDERNET_THREADS caps it; set_thread_count overrides both.
/// Results never depend on this value.
inline int thread_count() {
    if (const int forced = detail::thread_override().load(); forced > 0) return forced;
    if (const char* env = std::getenv("EXPANDERNET_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

/// 0 restores the environment default.
inline void set_thread_count(int n) { detail::thread_override().store(std::max(n, 0)); }

/// Runs fn(i) for i in [0, n). Each index is written by exactly one worker, so any
/// per-index output is independent of the worker count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(thread_count());
    constexpr std::size_t min_chunk = 2048;
    if (workers <= 1 || n < 2 * min_chunk) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t parts = std::min(workers, (n + min_chunk - 1) / min_chunk);
    std::vector<std::jthread> pool;
    pool.reserve(parts - 1);
    auto run = [&](std::size_t p) {
        const std::size_t lo = n * p / parts;
        const std::size_t hi = n * (p + 1) / parts;
        for (std::size_t i = lo; i < hi; ++i) fn(i);
    };
    for (std::size_t p = 1; p < parts; ++p) pool.emplace_back(run, p);
    run(0);
}

/// Fixed-shape pairwise reduction; the tree depends only on values.size().
inline double pairwise_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace expandernet
