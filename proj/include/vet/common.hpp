#ifndef VET_COMMON_HPP
#define VET_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace vet {

// Error hierarchy. The CLI maps these onto exit codes:
//   ArgumentError/ConfigError/ContractError -> 2
//   FormatError (and subtypes)/IoError      -> 3
//   NumericError                            -> 4
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArgumentError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct BadMagicError : FormatError {
    using FormatError::FormatError;
};
struct VersionError : FormatError {
    using FormatError::FormatError;
};
struct TruncationError : FormatError {
    using FormatError::FormatError;
};

// Deterministic RNG. mt19937_64 has a standardized output sequence; the
// distributions below are hand-rolled because std::*_distribution is
// implementation-defined and would break cross-platform reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // xorshift* scrambled splitmix step; full 64-bit period characteristics
        // are not needed, sequence stability is.
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi < lo) throw ArgumentError("uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // modulo bias is < 2^-64 * span; irrelevant for the ranges used here
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    double rayleigh(double sigma) {
        double u = uniform();
        if (u >= 1.0) u = std::numeric_limits<double>::min();
        return sigma * std::sqrt(-2.0 * std::log(1.0 - u));
    }

    double normal() {
        // Box-Muller, one value per call (the sine branch is discarded so the
        // consumption pattern stays simple and reproducible).
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = std::numeric_limits<double>::min();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Fisher-Yates shuffle with this stream.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Little-endian byte encoding used by all binary file formats.
namespace le {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) {
    std::uint32_t v;
    static_assert(sizeof(v) == sizeof(f));
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    std::size_t remaining() const { return size_ - pos_; }

    void need(std::size_t n, const char* what) {
        if (remaining() < n) throw TruncationError(std::string("truncated file: expected ") + what);
    }

    std::uint8_t u8(const char* what) {
        need(1, what);
        return data_[pos_++];
    }

    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_]) | static_cast<std::uint16_t>(data_[pos_ + 1]) << 8;
        pos_ += 2;
        return v;
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32(const char* what) {
        std::uint32_t v = u32(what);
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }

    void bytes(void* dst, std::size_t n, const char* what) {
        need(n, what);
        std::memcpy(dst, data_ + pos_, n);
        pos_ += n;
    }

private:
    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace le

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace vet

#endif
