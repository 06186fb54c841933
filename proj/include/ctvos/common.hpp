// Shared plumbing: error types, checked asserts, deterministic RNG, threading.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctvos {

// Data/runtime problems. CLI maps these to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad invocation (unknown flag, conflicting options). CLI maps to exit 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <typename A, typename... Rest>
void cat_into(std::ostringstream& os, const A& a, const Rest&... rest) {
    os << a;
    cat_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string cat(const Args&... args) {
    std::ostringstream os;
    detail::cat_into(os, args...);
    return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
    throw Error(cat(args...));
}

template <typename... Args>
void check(bool cond, const Args&... args) {
    if (!cond) fail(args...);
}

// Deterministic RNG. splitmix64 seeding + xoshiro256** core so results are
// identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ull;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            word = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive on both ends.
    int uniform_int(int lo, int hi) {
        check(hi >= lo, "uniform_int: empty range [", lo, ", ", hi, "]");
        uint64_t span = uint64_t(hi) - uint64_t(lo) + 1;
        return lo + int(next_u64() % span);
    }

    bool coin() { return (next_u64() & 1ull) != 0; }

    // Box-Muller without caching so the draw count stays predictable.
    double normal() {
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // k distinct indices from [0, n), order randomized (partial Fisher-Yates).
    std::vector<int> sample_indices(int n, int k) {
        check(k >= 0 && k <= n, "sample_indices: need 0 <= k <= n, got k=", k, " n=", n);
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + int(next_u64() % uint64_t(n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream for a sub-task; decouples draw counts between stages.
    Rng fork(uint64_t stream) {
        uint64_t s = next_u64();
        return Rng(s ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
    }

private:
    uint64_t state_[4];
};

// Worker count from CTVOS_THREADS (default 1 for reproducible runs).
int env_thread_count();

// Splits [0, n) into contiguous chunks, one per worker. Chunking depends only
// on (n, threads), so results are identical for a fixed thread count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body);

}  // namespace ctvos
