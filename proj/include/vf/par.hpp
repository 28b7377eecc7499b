#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace vf {

// Runs f(i) for i in [0, n). Results must be written to per-index slots so the
// outcome is identical for any job count.
template <class F>
void parallel_for(size_t n, unsigned jobs, F&& f) {
    if (jobs <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<size_t>(jobs, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (size_t i = w; i < n; i += workers) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline unsigned default_jobs() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

} // namespace vf
