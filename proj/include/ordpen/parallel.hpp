#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ordpen {

// Worker cap from ORDFIT_THREADS; unset or invalid means single-threaded.
inline unsigned thread_budget()
{
    const char* env = std::getenv("ORDFIT_THREADS");
    if (env == nullptr)
        return 1;
    try {
        const long v = std::stol(env);
        return v >= 1 ? static_cast<unsigned>(v) : 1U;
    } catch (...) {
        return 1;
    }
}

// Runs body(i) for i in [0, count). Each task writes only its own output slot,
// so results do not depend on scheduling. The first exception is rethrown.
template <class Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = thread_budget())
{
    threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace ordpen
