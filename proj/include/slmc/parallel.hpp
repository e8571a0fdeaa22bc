#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace slmc {

/// Run fn(0..n-1) on up to `workers` threads. Results must be written to
/// pre-sized slots indexed by i so that the outcome is identical for any
/// worker count. Exceptions inside fn must be handled by the caller's fn.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int nthreads = std::min(workers, n);
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Hardware parallelism with a safe fallback.
inline int default_workers() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace slmc
