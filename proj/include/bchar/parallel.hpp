#ifndef BCHAR_PARALLEL_HPP
#define BCHAR_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace bchar {

/// Worker count used by parallel_for. Defaults to the machine parallelism,
/// can be capped via set_thread_count or the BCHAR_THREADS env var.
inline int& thread_count_ref() {
    static int n = [] {
        if (const char* env = std::getenv("BCHAR_THREADS")) {
            int v = std::atoi(env);
            if (v > 0) return v;
        }
        int hw = (int)std::thread::hardware_concurrency();
        return hw > 0 ? hw : 1;
    }();
    return n;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) { thread_count_ref() = n > 0 ? n : 1; }

/// Runs fn(i) for i in [0,n). Each index is processed exactly once and
/// writes must go to per-index slots, so results are deterministic
/// regardless of the worker count.
template <typename Fn>
void parallel_for(long n, Fn&& fn) {
    const int nt = std::min<long>(thread_count(), n) > 0
                       ? (int)std::min<long>(thread_count(), n)
                       : 1;
    if (nt <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(nt);
    const long chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const long b = t * chunk;
        const long e = std::min(n, b + chunk);
        if (b >= e) break;
        workers.emplace_back([&fn, b, e] {
            for (long i = b; i < e; ++i) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

} // namespace bchar

#endif
