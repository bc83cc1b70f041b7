#include "ssrl/exec.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssrl {

int resolve_threads(int requested) {
    int n = requested;
    if (n <= 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
    }
    if (const char* cap = std::getenv("SSRL_THREADS")) {
        const int c = std::atoi(cap);
        if (c > 0) n = std::min(n, c);
    }
    return std::max(1, n);
}

int chunk_count(std::int64_t n_items) {
    return static_cast<int>(std::min<std::int64_t>(kExecChunks, std::max<std::int64_t>(n_items, 1)));
}

void run_chunked(std::int64_t n_items, int threads,
                 const std::function<void(int, std::int64_t, std::int64_t)>& chunk_fn) {
    if (n_items <= 0) return;
    const int chunks = chunk_count(n_items);
    const std::int64_t stride = (n_items + chunks - 1) / chunks;
    auto bounds = [&](int c, std::int64_t& b, std::int64_t& e) {
        b = static_cast<std::int64_t>(c) * stride;
        e = std::min<std::int64_t>(b + stride, n_items);
    };
    if (threads <= 1) {
        for (int c = 0; c < chunks; ++c) {
            std::int64_t b, e;
            bounds(c, b, e);
            if (b < e) chunk_fn(c, b, e);
        }
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
    for (int c = 0; c < chunks; ++c) {
        std::int64_t b, e;
        bounds(c, b, e);
        if (b < e) chunk_fn(c, b, e);
    }
#else
    for (int c = 0; c < chunks; ++c) {
        std::int64_t b, e;
        bounds(c, b, e);
        if (b < e) chunk_fn(c, b, e);
    }
#endif
}

void run_items(std::int64_t n_items, int threads,
               const std::function<void(std::int64_t)>& item_fn) {
    run_chunked(n_items, threads, [&](int, std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) item_fn(i);
    });
}

}  // namespace ssrl
