#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace cdma {

/// Environment variable holding the worker count.
inline constexpr const char* workers_env = "CDMA_WORKERS";

/// Worker threads to use: $CDMA_WORKERS if set to a positive integer,
/// otherwise the hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv(workers_env)) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for every i in [0, n) on up to `workers` threads. Results
/// must be written to index-addressed storage; the first exception in index
/// order is rethrown, so failures are reported deterministically.
template <class F>
void parallel_for(std::size_t n, F&& fn, unsigned workers = worker_count()) {
    if (n == 0) return;
    std::vector<std::exception_ptr> errors(n);
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), n));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// SplitMix64 finalizer; derives independent seeds from (master, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace cdma
