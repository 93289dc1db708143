#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace strokebench {

namespace detail {

inline std::size_t default_thread_count() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("STROKEBENCH_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
        } catch (...) {
        }
    }
    return n;
}

inline std::atomic<std::size_t>& thread_count_slot() {
    static std::atomic<std::size_t> slot{default_thread_count()};
    return slot;
}

}  // namespace detail

/// Worker cap used by the kernels. Defaults to the hardware concurrency,
/// capped by STROKEBENCH_THREADS.
inline std::size_t thread_count() { return detail::thread_count_slot().load(); }

inline void set_thread_count(std::size_t n) { detail::thread_count_slot().store(std::max<std::size_t>(1, n)); }

/// Runs fn(i) for i in [0, n). Work is partitioned so that every index is
/// handled by exactly one thread; callers only write to state owned by index
/// i, which makes results independent of the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace strokebench
