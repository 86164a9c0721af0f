#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mvr {

// Error taxonomy. The CLI maps these onto process exit codes:
// ConfigError -> 1 (usage), ParseError/DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class LogicError : public Error {
public:
    using Error::Error;
};

// Deterministic random stream. The generator and all distributions are
// hand-rolled because the std:: distributions are implementation-defined
// and would break cross-toolchain reproducibility of seeds.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : state_(split_mix(seed)) {}

    uint64_t next_u64() {
        // xorshift* keeps the stream cheap and fully specified.
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    // Uniform in [0, 1).
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Uniform integer in [0, n).
    uint64_t index(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = u01();
        double u2 = u01();
        while (u1 <= 1e-300) u1 = u01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Normal(0, sigma) truncated to +-2 sigma by resampling.
    double truncated_normal(double sigma) {
        for (;;) {
            const double x = normal();
            if (std::abs(x) <= 2.0) return x * sigma;
        }
    }

private:
    static uint64_t split_mix(uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        x = x ^ (x >> 31);
        return x != 0 ? x : 0x1ULL;
    }

    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Worker count: MVR_THREADS caps it, hardware concurrency is the default.
int worker_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks so that
// results can be written into pre-sized slots; reductions stay with the
// caller, in index order, to keep floating-point sums reproducible.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int threads = 0);

// Writes through a temp file in the same directory, then renames.
void atomic_write_file(const std::filesystem::path& path, const void* data,
                       std::size_t size);
void atomic_write_file(const std::filesystem::path& path, const std::string& text);

std::string read_file(const std::filesystem::path& path);

uint64_t fnv1a64(const void* data, std::size_t size, uint64_t seed = 0xcbf29ce484222325ULL);
std::string to_hex(uint64_t value);

// Nearest integer, ties away from zero upward (0.5 -> 1).
inline long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

// Nearest integer, ties downward (0.5 -> 0). Used for pixel rasterization.
inline long round_half_down(double x) { return static_cast<long>(std::ceil(x - 0.5)); }

}  // namespace mvr
