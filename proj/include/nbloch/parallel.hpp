#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nbloch {

// Effective worker count: an explicit request wins, then the NBLOCH_WORKERS
// environment variable, then the hardware concurrency (at least 1).  A
// malformed environment value is ignored rather than fatal.
inline std::size_t worker_count(std::size_t requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NBLOCH_WORKERS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<std::size_t>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? hc : 1;
}

// Runs fn(index) for every index in [0, count), pulling indices from a
// shared atomic counter so uneven work balances itself.  Results must be
// written to per-index slots by the callee; the output is then identical
// for any worker count.  The first exception thrown by any worker is
// rethrown on the calling thread after all workers have joined.
template <typename F>
inline void parallel_for(std::size_t count, std::size_t workers, F&& fn) {
    workers = std::min(worker_count(workers), count);
    if (workers <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto body = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= count) return;
            try {
                fn(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace nbloch
