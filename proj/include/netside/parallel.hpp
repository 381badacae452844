#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace netside {

// Runs fn(0..n-1) on up to `jobs` threads. Each index writes only its own
// results, so the schedule cannot influence any output.
template <typename Fn>
void parallel_for(size_t n, int jobs, const Fn& fn) {
    if (jobs < 1) jobs = 1;
    size_t workers = std::min<size_t>(static_cast<size_t>(jobs), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (size_t w = 0; w < workers; ++w)
        threads.emplace_back([&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (std::thread& t : threads) t.join();
}

} // namespace netside
