#include "ctvos/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace ctvos {

int env_thread_count() {
    static int cached = [] {
        const char* v = std::getenv("CTVOS_THREADS");
        if (!v || !*v) return 1;
        char* end = nullptr;
        long n = std::strtol(v, &end, 10);
        if (!end || *end != '\0' || n < 1 || n > 256)
            throw Error(cat("CTVOS_THREADS must be an integer in [1, 256], got '", v, "'"));
        return int(n);
    }();
    return cached;
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
    int threads = env_thread_count();
    if (threads <= 1 || n < 2 * threads) {
        body(0, n);
        return;
    }
    int64_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        int64_t lo = t * chunk;
        int64_t hi = std::min<int64_t>(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace ctvos
