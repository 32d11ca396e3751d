#ifndef VET_PHANTOM_HPP
#define VET_PHANTOM_HPP

#include <cstdint>
#include <vector>

#include "vet/volume.hpp"

namespace vet {

struct PhantomConfig {
    std::size_t nr = 4;
    std::size_t nx = 64;
    std::size_t ny = 64;
    std::size_t nz = 64;
    std::size_t vessel_count = 3;
    double radius_min = 2.0;   // pixels
    double radius_max = 4.0;   // pixels
    double speckle_sigma = 0.3;      // Rayleigh scale of the static background
    double decorrelation = 1.0;      // vessel inter-repeat decorrelation strength, [0,1]
    int bulk_motion = 0;             // max |shift| in pixels injected per repeat
    std::uint64_t seed = 1;

    void validate() const;
};

struct Phantom {
    MultiRepeatVolume volume;
    std::vector<std::uint8_t> vessel_mask;  // [y][x][z], 1 inside a vessel
    // per-repeat injected (dx, dz); entry 0 is always (0, 0)
    std::vector<std::pair<int, int>> shifts;

    bool mask_at(std::size_t y, std::size_t x, std::size_t z) const {
        return vessel_mask[(y * volume.nx + x) * volume.nz + z] != 0;
    }
};

// Synthetic multi-repeat scan: static Rayleigh speckle shared across repeats,
// vessel voxels re-sampled each repeat and blended by the decorrelation
// strength, optional whole-repeat integer bulk motion with zero fill.
// Deterministic in cfg.seed.
Phantom make_phantom(const PhantomConfig& cfg);

}  // namespace vet

#endif
