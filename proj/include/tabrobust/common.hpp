#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabrobust {

// Error taxonomy aligned with the CLI exit codes: config = 2, capability = 3,
// data = 4. Anything else that escapes is a plain runtime_error (exit 1).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct CapabilityError : std::runtime_error {
    explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense row-major matrix of doubles. Small enough on purpose; all heavy
/// loops in this codebase iterate rows, so row spans are the main accessor.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    void set_row(std::size_t r, std::span<const double> v) {
        std::memcpy(data_.data() + r * cols_, v.data(), cols_ * sizeof(double));
    }
    void push_row(std::span<const double> v) {
        if (cols_ == 0) cols_ = v.size();
        data_.insert(data_.end(), v.begin(), v.end());
        ++rows_;
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// Deterministic RNG. mt19937_64 gives a standard-specified integer stream;
/// the floating-point draws are pinned here instead of using the library
/// <random> distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Independent per-sample stream: results do not depend on how samples
    // are scheduled across threads.
    static Rng for_sample(std::uint64_t seed, std::uint64_t index);

    std::uint64_t next_u64() { return gen_(); }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive, unbiased via rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    double normal();

    template <class T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates; std::shuffle's draw order is unspecified.
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

// FNV-1a, used for schema/theta/content fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a(std::span<const double> v, std::uint64_t h = 0xcbf29ce484222325ull);
std::string hash_hex(std::uint64_t h);

/// Shortest round-trip decimal form of a double (CSV/report output).
std::string format_double(double v);

// ---- parallel kernels -------------------------------------------------
//
// Every data-parallel loop goes through parallel_for. With threads == 1 it
// runs the plain serial loop (the reference path the tests compare against);
// otherwise it is an OpenMP parallel-for. Iterations must be independent and
// write disjoint slots, so results are identical for any thread count.

int max_threads();
void set_max_threads(int n);

namespace detail {
void parallel_for_impl(std::size_t n, const std::function<void(std::size_t)>& body);
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
    detail::parallel_for_impl(n, std::function<void(std::size_t)>(std::forward<F>(body)));
}

} // namespace tabrobust
