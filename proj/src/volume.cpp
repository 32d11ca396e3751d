#include "vet/volume.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

#include "vet/common.hpp"

namespace vet {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path);
    return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

BFrameEnsemble slice_ensemble(const MultiRepeatVolume& vol, std::size_t y_index) {
    return slice_ensemble(vol, y_index, vol.nr);
}

BFrameEnsemble slice_ensemble(const MultiRepeatVolume& vol, std::size_t y_index, std::size_t repeats) {
    if (y_index >= vol.ny) throw ArgumentError("slice_ensemble: y index out of range");
    if (repeats < 1 || repeats > vol.nr) throw ArgumentError("slice_ensemble: bad repeat count");
    BFrameEnsemble e;
    e.y_index = y_index;
    e.frames.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        Image2D f(vol.nx, vol.nz);
        std::memcpy(f.data.data(), vol.data.data() + vol.index(r, y_index, 0, 0),
                    vol.nx * vol.nz * sizeof(float));
        e.frames.push_back(std::move(f));
    }
    return e;
}

EnfaceImage mip_enface(const MultiRepeatVolume& vol, std::size_t z_begin, std::size_t z_end,
                       std::size_t repeat) {
    if (z_begin >= z_end) throw ArgumentError("mip_enface: empty z range");
    if (z_end > vol.nz) throw ArgumentError("mip_enface: z range exceeds volume depth");
    if (repeat >= vol.nr) throw ArgumentError("mip_enface: repeat out of range");

    EnfaceImage img;
    img.nx = vol.nx;
    img.ny = vol.ny;
    img.pixels.assign(vol.nx * vol.ny, 0.0f);

    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();
    for (std::size_t y = 0; y < vol.ny; ++y) {
        for (std::size_t x = 0; x < vol.nx; ++x) {
            float m = vol.at(repeat, y, x, z_begin);
            for (std::size_t z = z_begin + 1; z < z_end; ++z) m = std::max(m, vol.at(repeat, y, x, z));
            img.at(x, y) = m;
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
    }
    img.scale_min = lo;
    img.scale_max = hi;
    if (hi > lo) {
        const float inv = 1.0f / (hi - lo);
        for (auto& p : img.pixels) p = (p - lo) * inv;
    } else {
        // flat projection maps to all zeros
        std::fill(img.pixels.begin(), img.pixels.end(), 0.0f);
    }
    return img;
}

// Layout (little-endian):
//   magic "OCTV" | version u16=1 | dtype u8 (0 = f32) | reserved u8
//   nr u32 | ny u32 | nx u32 | nz u32
//   payload: f32 x nr*ny*nx*nz in [repeat][y][x][z] row-major order
void save_volume(const MultiRepeatVolume& vol, const std::string& path) {
    std::string out;
    out.reserve(20 + vol.data.size() * 4);
    out += "OCTV";
    le::put_u16(out, 1);
    out.push_back('\0');  // dtype 0 = f32
    out.push_back('\0');  // reserved
    le::put_u32(out, static_cast<std::uint32_t>(vol.nr));
    le::put_u32(out, static_cast<std::uint32_t>(vol.ny));
    le::put_u32(out, static_cast<std::uint32_t>(vol.nx));
    le::put_u32(out, static_cast<std::uint32_t>(vol.nz));
    for (float f : vol.data) le::put_f32(out, f);
    write_file(path, out);
}

MultiRepeatVolume load_volume(const std::string& path) {
    const std::string bytes = read_file(path);
    le::Reader r(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());

    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, "OCTV", 4) != 0) throw BadMagicError("not a volume file: " + path);
    const std::uint16_t version = r.u16("version");
    if (version != 1)
        throw VersionError("unsupported volume version " + std::to_string(version) + ": " + path);
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype != 0) throw FormatError("unsupported volume dtype: " + path);
    r.u8("reserved");

    MultiRepeatVolume vol;
    vol.nr = r.u32("nr");
    vol.ny = r.u32("ny");
    vol.nx = r.u32("nx");
    vol.nz = r.u32("nz");
    if (vol.nr == 0 || vol.ny == 0 || vol.nx == 0 || vol.nz == 0)
        throw FormatError("volume header has zero dimension: " + path);

    const std::size_t count = vol.nr * vol.ny * vol.nx * vol.nz;
    if (r.remaining() != count * 4)
        throw TruncationError("volume payload length does not match header dims: " + path);
    vol.data.resize(count);
    static_assert(sizeof(float) == 4);
    // payload is little-endian f32; byte-wise decode keeps this portable
    for (std::size_t i = 0; i < count; ++i) vol.data[i] = r.f32("payload");
    return vol;
}

MultiRepeatVolume frame_as_volume(const Image2D& img) {
    MultiRepeatVolume vol(1, 1, img.nx, img.nz);
    vol.data = img.data;
    return vol;
}

Image2D volume_as_frame(const MultiRepeatVolume& vol) {
    if (vol.nr != 1 || vol.ny != 1) throw ArgumentError("volume_as_frame: expected nr=1, ny=1");
    Image2D img(vol.nx, vol.nz);
    img.data = vol.data;
    return img;
}

}  // namespace vet
