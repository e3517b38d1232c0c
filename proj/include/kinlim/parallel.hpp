#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kinlim {

// Runs fn(task, worker) for every task in [0, n_tasks). Tasks are claimed
// dynamically; callers write results into per-task slots so the reduction
// order never depends on scheduling. The first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n_tasks, int workers, Fn&& fn) {
    const int w = std::max(1, std::min<int>(workers, int(std::max<std::size_t>(n_tasks, 1))));
    if (w == 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) fn(t, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(std::size_t(w));
    for (int id = 0; id < w; ++id) {
        threads.emplace_back([&, id] {
            for (;;) {
                const std::size_t t = next.fetch_add(1);
                if (t >= n_tasks) return;
                try {
                    fn(t, id);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(n_tasks);
                    return;
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace kinlim
