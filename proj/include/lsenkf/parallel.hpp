#ifndef LSENKF_PARALLEL_HPP
#define LSENKF_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lsenkf {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

// Static block partition of [0, n). Each worker writes only to its own
// indices, so results are identical for every thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t nt = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&, lo, hi, t] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace lsenkf

#endif
