#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace rrdncnn {

// Error taxonomy shared by all modules. Everything derives from Error so
// callers can catch the whole family at the CLI boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not agree (tensor/tensor or tensor/weights).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Stride/padding/extent combination does not describe a valid operation.
class GeometryError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failure (open, read, write, rename).
class IoError : public Error {
public:
    using Error::Error;
};

// File exists but its contents are not what the format requires.
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid configuration (network config, CLI validation, manifest records).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Deterministic RNG with hand-rolled distributions. std::mt19937 is bit-exact
// across platforms but the standard distributions are not, so every draw here
// is derived directly from the raw engine output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32), 0x9e3779b9u};
        gen_.seed(seq);
    }

    std::uint32_t next_u32() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double unit() {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi], inclusive. Rejection sampling keeps it
    // unbiased for any range.
    int uniform_int(int lo, int hi) {
        const std::uint32_t range = static_cast<std::uint32_t>(hi - lo) + 1u;
        if (range == 0) return lo + static_cast<int>(next_u32());  // full span
        const std::uint32_t limit = UINT32_MAX - UINT32_MAX % range;
        std::uint32_t v;
        do {
            v = next_u32();
        } while (v >= limit);
        return lo + static_cast<int>(v % range);
    }

    bool coin() { return (next_u32() & 1u) != 0; }

    // Standard normal via Box-Muller, one cached draw.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(next_u32()) + 1.0) * 0x1.0p-32;
        const double u2 = static_cast<double>(next_u32()) * 0x1.0p-32;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::mt19937 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace rrdncnn
