#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace regopt {

// Global worker budget set by the CLI (--threads). 0 means "use hardware".
inline std::atomic<unsigned>& worker_budget() {
    static std::atomic<unsigned> budget{0};
    return budget;
}

inline void set_worker_threads(unsigned n) { worker_budget().store(n); }

inline unsigned effective_threads() {
    unsigned n = worker_budget().load();
    if (n == 0) n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

// Runs fn(i) for i in [0, n). Work items must write only to their own slots;
// outputs are then independent of the thread count by construction.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned threads = effective_threads();
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const unsigned spawn = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    pool.reserve(spawn);
    for (unsigned t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

} // namespace regopt
