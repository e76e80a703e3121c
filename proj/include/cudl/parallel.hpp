#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cudl {

/// Runs fn(i) for i in [0, n) across at most max_threads workers. Each index
/// is processed exactly once and workers write only to index-owned slots, so
/// results are identical to the serial loop regardless of thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned max_threads = 0) {
    if (max_threads == 0) {
        max_threads = std::thread::hardware_concurrency();
        if (max_threads == 0) {
            max_threads = 1;
        }
    }
    if (n == 0) {
        return;
    }
    if (max_threads == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }

    std::vector<std::thread> workers;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::size_t n_workers = max_threads < n ? max_threads : n;
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += n_workers) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace cudl
