#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace cxsim {

namespace detail {
inline std::atomic<int>& worker_override() {
    static std::atomic<int> value{0};  // 0 = auto
    return value;
}
inline thread_local bool inside_parallel_region = false;
}  // namespace detail

// Caps the number of threads parallel_for may use. 0 restores the default
// (hardware concurrency). Results never depend on this value: workers only
// ever write disjoint index ranges and every per-index computation uses a
// fixed accumulation order.
inline void set_worker_count(int workers) {
    detail::worker_override().store(workers < 0 ? 0 : workers);
}

inline int worker_count() {
    const int w = detail::worker_override().load();
    if (w > 0) return w;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Contiguous blocks per worker; nested calls from
// inside a worker run sequentially.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers =
        detail::inside_parallel_region
            ? 1
            : std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    auto run_block = [&fn](std::size_t begin, std::size_t end) {
        detail::inside_parallel_region = true;
        for (std::size_t i = begin; i < end; ++i) fn(i);
        detail::inside_parallel_region = false;
    };
    for (std::size_t t = 1; t < workers; ++t) {
        pool.emplace_back(run_block, n * t / workers, n * (t + 1) / workers);
    }
    run_block(0, n / workers);
    for (auto& th : pool) th.join();
}

}  // namespace cxsim
