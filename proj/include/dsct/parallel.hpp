#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dsct {

/// Caps the number of worker threads used by data-parallel loops (0 = hardware concurrency).
void set_thread_limit(unsigned limit);
unsigned thread_limit();

/**
 * Calls body(i) for every i in [0, count). Work items must be independent;
 * each item writes only its own outputs, so results do not depend on the
 * number of threads or on scheduling.
 */
template <typename Body>
void parallel_for(std::size_t count, Body&& body)
{
    const std::size_t workers = std::min<std::size_t>(thread_limit(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&]() {
        try {
            for (std::size_t i = next++; i < count; i = next++)
                body(i);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
            next = count;
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t)
        pool.emplace_back(run);
    run();
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace dsct
