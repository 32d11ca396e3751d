#include "vet/fft.hpp"

#include <algorithm>
#include <cmath>

#include "vet/common.hpp"

namespace vet {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative Cooley-Tukey, n a power of two.
void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

// Bluestein's algorithm: expresses a length-n DFT as a convolution, which is
// evaluated with a power-of-two FFT of length >= 2n-1.
void fft_bluestein(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    const std::size_t m = next_pow2(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;

    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // angle = sign * pi * k^2 / n, k^2 reduced mod 2n to keep precision
        const std::size_t k2 = (static_cast<std::size_t>(k) * k) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }

    std::vector<cplx> u(m, cplx(0.0, 0.0)), v(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) u[k] = a[k] * chirp[k];
    v[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) v[k] = v[m - k] = std::conj(chirp[k]);

    fft_pow2(u, false);
    fft_pow2(v, false);
    for (std::size_t k = 0; k < m; ++k) u[k] *= v[k];
    fft_pow2(u, true);

    for (std::size_t k = 0; k < n; ++k) a[k] = u[k] * chirp[k];
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

}  // namespace

void fft(std::vector<cplx>& data, bool inverse) {
    if (data.empty()) throw ArgumentError("fft: empty input");
    if (data.size() == 1) return;
    if (is_pow2(data.size()))
        fft_pow2(data, inverse);
    else
        fft_bluestein(data, inverse);
}

void fft2d(std::vector<cplx>& data, std::size_t width, std::size_t height, bool inverse) {
    if (width * height != data.size()) throw ArgumentError("fft2d: size mismatch");
    std::vector<cplx> line;
    line.resize(width);
    for (std::size_t y = 0; y < height; ++y) {
        std::copy(data.begin() + static_cast<std::ptrdiff_t>(y * width),
                  data.begin() + static_cast<std::ptrdiff_t>((y + 1) * width), line.begin());
        fft(line, inverse);
        std::copy(line.begin(), line.end(), data.begin() + static_cast<std::ptrdiff_t>(y * width));
    }
    line.resize(height);
    for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t y = 0; y < height; ++y) line[y] = data[y * width + x];
        fft(line, inverse);
        for (std::size_t y = 0; y < height; ++y) data[y * width + x] = line[y];
    }
}

}  // namespace vet
