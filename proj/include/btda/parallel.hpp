#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "btda/types.hpp"

namespace btda {

/// Worker count: explicit request, else BTDA_WORKERS, else hardware concurrency.
inline Index worker_count(Index requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("BTDA_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<Index>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<Index>(hw) : 1;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Tasks must write
/// only their own output slot; results are then schedule-independent. The
/// first exception is rethrown on the caller thread.
template <typename Fn>
void parallel_for(Index n, Index workers, Fn&& fn) {
    if (n <= 0) return;
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    const auto body = [&] {
        for (;;) {
            const Index i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace btda
