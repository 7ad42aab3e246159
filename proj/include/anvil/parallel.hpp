#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace anvil {

/// Chunked parallel loop. `body(i)` must touch only state owned by index i,
/// so results never depend on the worker count.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& body) {
    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
        if (workers <= 0) workers = 1;
    }
    workers = static_cast<int>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    if (workers <= 1 || n < 1024) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    constexpr std::size_t kChunk = 256;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t begin = next.fetch_add(kChunk);
                if (begin >= n) return;
                std::size_t end = std::min(begin + kChunk, n);
                for (std::size_t i = begin; i < end; ++i) body(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace anvil
