#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fkb {

/// Runs f(i) for i in [0, count) on `jobs` threads with a static interleaved
/// partition. Each index is processed exactly once and results are written by
/// index, so outputs do not depend on the worker count. The exception of the
/// smallest failing index is rethrown.
template <class F>
void parallel_for(std::size_t count, int jobs, F&& f) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs < 1 ? 1 : jobs, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::mutex mu;
    std::exception_ptr first;
    std::size_t first_index = count;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (i < first_index) {
                        first_index = i;
                        first = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

inline int hardware_jobs() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace fkb
