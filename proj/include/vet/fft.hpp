#ifndef VET_FFT_HPP
#define VET_FFT_HPP

#include <complex>
#include <vector>

namespace vet {

using cplx = std::complex<double>;

// In-place complex FFT of arbitrary length (radix-2 when n is a power of two,
// Bluestein's chirp-z otherwise). inverse=true includes the 1/n scaling.
void fft(std::vector<cplx>& data, bool inverse);

// 2-D FFT over a row-major width x height grid (rows first, then columns).
void fft2d(std::vector<cplx>& data, std::size_t width, std::size_t height, bool inverse);

}  // namespace vet

#endif
