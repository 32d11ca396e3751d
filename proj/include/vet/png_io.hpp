#ifndef VET_PNG_IO_HPP
#define VET_PNG_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "vet/volume.hpp"

namespace vet {

// Round-to-nearest quantization of v in [0,1] to the full range of the
// given bit depth (8 -> 0..255, 16 -> 0..65535).
std::uint16_t quantize_unit(double v, int bit_depth);

// Grayscale PNG, bit_depth 8 or 16. Pixels are row-major, values must
// already lie in [0,1]; out-of-range input is a contract violation.
void export_png(const std::vector<float>& pixels, std::size_t width, std::size_t height,
                const std::string& path, int bit_depth = 8);

void export_png(const EnfaceImage& img, const std::string& path, int bit_depth = 8);
// B-frame patch rendered with depth as the vertical axis.
void export_png(const Image2D& img, const std::string& path, int bit_depth = 8);

}  // namespace vet

#endif
