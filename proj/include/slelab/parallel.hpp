#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace slelab {

/// Evaluates fn(block) for block = 0..n_blocks-1 on up to `workers` threads.
/// Results are returned in block order, so merging them is independent of
/// scheduling. The first exception thrown by any block is rethrown.
template <class Fn>
auto run_blocks(std::size_t n_blocks, unsigned workers, Fn&& fn) {
    using Partial = decltype(fn(std::size_t{0}));
    std::vector<Partial> out(n_blocks);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n_blocks, 1))));
    if (workers == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) out[b] = fn(b);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            try {
                out[b] = fn(b);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n_blocks);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace slelab
