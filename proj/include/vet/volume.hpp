#ifndef VET_VOLUME_HPP
#define VET_VOLUME_HPP

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace vet {

// One 2-D amplitude frame, nx lateral positions by nz depth samples,
// stored row-major as [x][z].
struct Image2D {
    std::size_t nx = 0;
    std::size_t nz = 0;
    std::vector<float> data;

    Image2D() = default;
    Image2D(std::size_t nx_, std::size_t nz_, float fill = 0.0f)
        : nx(nx_), nz(nz_), data(nx_ * nz_, fill) {}

    float& at(std::size_t x, std::size_t z) { return data[x * nz + z]; }
    float at(std::size_t x, std::size_t z) const { return data[x * nz + z]; }
    std::size_t size() const { return data.size(); }
};

// NR registered amplitude volumes of one scan, indexed [repeat][y][x][z].
struct MultiRepeatVolume {
    std::size_t nr = 0;
    std::size_t ny = 0;
    std::size_t nx = 0;
    std::size_t nz = 0;
    std::vector<float> data;
    std::map<std::string, std::string> meta;  // in-memory provenance, not serialized

    MultiRepeatVolume() = default;
    MultiRepeatVolume(std::size_t nr_, std::size_t ny_, std::size_t nx_, std::size_t nz_)
        : nr(nr_), ny(ny_), nx(nx_), nz(nz_), data(nr_ * ny_ * nx_ * nz_, 0.0f) {}

    std::size_t index(std::size_t r, std::size_t y, std::size_t x, std::size_t z) const {
        return ((r * ny + y) * nx + x) * nz + z;
    }
    float& at(std::size_t r, std::size_t y, std::size_t x, std::size_t z) {
        return data[index(r, y, x, z)];
    }
    float at(std::size_t r, std::size_t y, std::size_t x, std::size_t z) const {
        return data[index(r, y, x, z)];
    }
};

// NR co-located B-frames sliced from one slow-axis position.
struct BFrameEnsemble {
    std::vector<Image2D> frames;
    std::size_t y_index = 0;

    std::size_t nr() const { return frames.size(); }
    std::size_t nx() const { return frames.empty() ? 0 : frames[0].nx; }
    std::size_t nz() const { return frames.empty() ? 0 : frames[0].nz; }
};

// Top-down projection, pixels in [0,1], stored row-major as [y][x].
// scale_min/scale_max record the pre-normalization range.
struct EnfaceImage {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<float> pixels;
    float scale_min = 0.0f;
    float scale_max = 0.0f;

    float& at(std::size_t x, std::size_t y) { return pixels[y * nx + x]; }
    float at(std::size_t x, std::size_t y) const { return pixels[y * nx + x]; }
};

BFrameEnsemble slice_ensemble(const MultiRepeatVolume& vol, std::size_t y_index);
BFrameEnsemble slice_ensemble(const MultiRepeatVolume& vol, std::size_t y_index, std::size_t repeats);

// Maximum intensity projection over z in [z_begin, z_end), then min-max
// normalized to [0,1] (flat input maps to all zeros).
EnfaceImage mip_enface(const MultiRepeatVolume& vol, std::size_t z_begin, std::size_t z_end,
                       std::size_t repeat = 0);

// Binary volume file, "OCTV" magic; see save_volume for the exact layout.
void save_volume(const MultiRepeatVolume& vol, const std::string& path);
MultiRepeatVolume load_volume(const std::string& path);

// Single-frame convenience wrappers over the same container/file format
// (stored as nr=1, ny=1).
MultiRepeatVolume frame_as_volume(const Image2D& img);
Image2D volume_as_frame(const MultiRepeatVolume& vol);

}  // namespace vet

#endif
