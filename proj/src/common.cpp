#include "tabrobust/common.hpp"

#include <atomic>
#include <charconv>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tabrobust {

namespace {
std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
} // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (index + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

Rng Rng::for_sample(std::uint64_t seed, std::uint64_t index) {
    return Rng(mix_seed(seed, index));
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64()); // full range
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u clamped away from 0 so log() stays finite.
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x00000100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a(std::span<const double> v, std::uint64_t h) {
    return fnv1a(v.data(), v.size() * sizeof(double), h);
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

namespace {
std::atomic<int> g_threads{1};
}

int max_threads() { return g_threads.load(); }

void set_max_threads(int n) {
#ifdef _OPENMP
    int hw = omp_get_num_procs();
#else
    int hw = 1;
#endif
    if (n <= 0) n = hw;
    g_threads.store(n);
}

namespace detail {
void parallel_for_impl(std::size_t n, const std::function<void(std::size_t)>& body) {
    int threads = max_threads();
#ifdef _OPENMP
    if (threads > 1 && n > 1) {
        #pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            body(static_cast<std::size_t>(i));
        return;
    }
#endif
    (void)threads;
    for (std::size_t i = 0; i < n; ++i) body(i);
}
} // namespace detail

} // namespace tabrobust
