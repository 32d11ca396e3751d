#ifndef VET_PREPROCESS_HPP
#define VET_PREPROCESS_HPP

#include <cstddef>
#include <vector>

#include "vet/volume.hpp"

namespace vet {

// Integer-pixel displacement of a moving frame relative to the reference:
// moving(x, z) ~= reference(x - dx, z - dz). peak_ratio is the correlation
// peak over the strongest secondary peak (>= 1, higher is more confident).
struct ShiftEstimate {
    int dx = 0;
    int dz = 0;
    double peak_ratio = 1.0;
};

struct PatchBox {
    std::size_t x0 = 0;
    std::size_t z0 = 0;
    std::size_t size = 192;
};

struct RegisterResult {
    BFrameEnsemble ensemble;            // frame 0 untouched, others shifted back
    std::vector<ShiftEstimate> shifts;  // one per frame; entry 0 is the reference (0,0)
};

struct AlineAlignResult {
    BFrameEnsemble ensemble;
    std::vector<std::vector<int>> shifts;  // [frame][x] axial shifts; frame 0 all zero
    std::size_t zero_energy_lines = 0;     // lines skipped with shift 0
};

// 2-D phase correlation of each frame i>0 against frame 0 (cross-power
// spectrum, global peak -> integer shift), inverse shift applied with
// zero fill.
RegisterResult register_frames(const BFrameEnsemble& ensemble);

// Per A-line (fixed x) 1-D phase correlation against frame 0, integer axial
// shift applied with zero fill. Zero-energy lines get shift 0 and are counted.
AlineAlignResult align_alines(const BFrameEnsemble& ensemble);

// Estimate the displacement of `moving` relative to `reference` alone.
ShiftEstimate estimate_shift(const Image2D& reference, const Image2D& moving);

// Translate content by (+dx, +dz) with zero fill.
Image2D shift_frame(const Image2D& frame, int dx, int dz);

// Non-overlapping size x size grid from (0,0); a final row/column flush with
// the far edge is appended when the dimension is not a multiple of size.
// Order is deterministic: x0 ascending, then z0 ascending within each x0.
std::vector<PatchBox> extract_patch_boxes(std::size_t frame_w, std::size_t frame_h,
                                          std::size_t size = 192);

Image2D crop_patch(const Image2D& frame, const PatchBox& box);

// Linear map of the [lo_pct, hi_pct] percentile band to [0,1] with clamping;
// flat frames map to all zeros. Percentiles use linear interpolation over the
// sorted values at position pct/100*(n-1).
Image2D normalize_frame(const Image2D& frame, double lo_pct = 0.0, double hi_pct = 99.9);

}  // namespace vet

#endif
