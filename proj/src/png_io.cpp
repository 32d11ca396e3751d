#include "vet/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>

#include "vet/common.hpp"

namespace vet {

namespace {

void put_be32(std::string& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_chunk(std::string& out, const char type[4], const std::string& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.append(type, 4);
    out += payload;
    const auto* p = reinterpret_cast<const Bytef*>(out.data() + crc_start);
    const uLong crc = crc32(0L, p, static_cast<uInt>(out.size() - crc_start));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::uint16_t quantize_unit(double v, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw ArgumentError("quantize_unit: bit depth must be 8 or 16");
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("quantize_unit: value outside [0,1]");
    const double maxv = bit_depth == 8 ? 255.0 : 65535.0;
    return static_cast<std::uint16_t>(std::lround(v * maxv));
}

void export_png(const std::vector<float>& pixels, std::size_t width, std::size_t height,
                const std::string& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw ArgumentError("export_png: bit depth must be 8 or 16");
    if (width == 0 || height == 0 || pixels.size() != width * height)
        throw ArgumentError("export_png: bad image dimensions");
    for (float p : pixels)
        if (!(p >= 0.0f && p <= 1.0f))
            throw ContractError("export_png: pixel outside [0,1]; clamp before exporting");

    // raw scanlines: filter byte 0 then big-endian samples
    const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
    std::string raw;
    raw.reserve(height * (1 + width * bytes_per_sample));
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back('\0');
        for (std::size_t x = 0; x < width; ++x) {
            const std::uint16_t q = quantize_unit(pixels[y * width + x], bit_depth);
            if (bit_depth == 16) raw.push_back(static_cast<char>((q >> 8) & 0xff));
            raw.push_back(static_cast<char>(q & 0xff));
        }
    }

    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::string compressed(comp_cap, '\0');
    const int rc = compress2(reinterpret_cast<Bytef*>(compressed.data()), &comp_cap,
                             reinterpret_cast<const Bytef*>(raw.data()),
                             static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION);
    if (rc != Z_OK) throw IoError("export_png: deflate failed");
    compressed.resize(comp_cap);

    std::string ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(static_cast<char>(bit_depth));
    ihdr.push_back('\0');  // color type 0 = grayscale
    ihdr.push_back('\0');  // compression
    ihdr.push_back('\0');  // filter
    ihdr.push_back('\0');  // interlace

    std::string out("\x89PNG\r\n\x1a\n", 8);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", "");
    write_file(path, out);
}

void export_png(const EnfaceImage& img, const std::string& path, int bit_depth) {
    export_png(img.pixels, img.nx, img.ny, path, bit_depth);
}

void export_png(const Image2D& img, const std::string& path, int bit_depth) {
    // transpose [x][z] storage into scanlines with z down the image
    std::vector<float> rows(img.nx * img.nz);
    for (std::size_t z = 0; z < img.nz; ++z)
        for (std::size_t x = 0; x < img.nx; ++x) rows[z * img.nx + x] = img.at(x, z);
    export_png(rows, img.nx, img.nz, path, bit_depth);
}

}  // namespace vet
