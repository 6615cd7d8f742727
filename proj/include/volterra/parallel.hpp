#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace volterra::detail {

/// Calls f(i) for i in [0, n); chunks are claimed dynamically but each index
/// writes only its own output, so scheduling never affects results.
inline unsigned resolve_threads(unsigned requested)
{
    return requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f, std::size_t chunk = 256)
{
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, (n + chunk - 1) / chunk));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        try {
            for (;;) {
                const std::size_t lo = next.fetch_add(chunk);
                if (lo >= n || failed.load()) return;
                const std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) f(i);
            }
        } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace volterra::detail
