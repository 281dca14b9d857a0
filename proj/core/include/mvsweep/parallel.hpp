#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace mvsweep {

// Static row partition over [begin, end). Each index is visited exactly once
// and callers only ever write disjoint outputs per index, so results are
// independent of the thread count.
inline void parallel_for(int begin, int end, int num_threads,
                         const std::function<void(int)>& fn) {
    int n = end - begin;
    if (n <= 0) return;
    if (num_threads <= 1 || n == 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    int workers = std::min(num_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int lo = begin + w * chunk;
        int hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace mvsweep
