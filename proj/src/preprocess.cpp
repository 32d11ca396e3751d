#include "vet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vet/common.hpp"
#include "vet/fft.hpp"

namespace vet {

namespace {

int wrap_signed(std::size_t idx, std::size_t n) {
    return idx >= (n + 1) / 2 ? static_cast<int>(idx) - static_cast<int>(n) : static_cast<int>(idx);
}

// Correlation surface of the normalized cross-power spectrum. Peak index p
// satisfies moving(x) ~= reference(x - p) with circular wrap.
std::vector<double> correlation_surface(const std::vector<cplx>& ref_f, std::vector<cplx> mov_f,
                                        std::size_t w, std::size_t h) {
    for (std::size_t i = 0; i < mov_f.size(); ++i) {
        cplx x = std::conj(ref_f[i]) * mov_f[i];
        const double mag = std::abs(x);
        mov_f[i] = mag > 0.0 ? x / mag : cplx(0.0, 0.0);
    }
    if (h == 1)
        fft(mov_f, true);
    else
        fft2d(mov_f, w, h, true);
    std::vector<double> surf(mov_f.size());
    for (std::size_t i = 0; i < mov_f.size(); ++i) surf[i] = std::abs(mov_f[i]);
    return surf;
}

struct Peak {
    std::size_t index = 0;
    double value = 0.0;
    double ratio = 1.0;
};

// Global peak plus its ratio over the best value outside a 3x3 (or 3-wide in
// 1-D) torus neighborhood of the peak.
Peak find_peak(const std::vector<double>& surf, std::size_t w, std::size_t h) {
    Peak p;
    for (std::size_t i = 0; i < surf.size(); ++i)
        if (surf[i] > p.value) {
            p.value = surf[i];
            p.index = i;
        }
    const std::size_t px = p.index % w, py = p.index / w;
    double second = 0.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t dx = std::min((x + w - px) % w, (px + w - x) % w);
            const std::size_t dy = h == 1 ? 0 : std::min((y + h - py) % h, (py + h - y) % h);
            if (dx <= 1 && dy <= 1) continue;
            second = std::max(second, surf[y * w + x]);
        }
    p.ratio = p.value / std::max(second, 1e-300);
    return p;
}

double frame_energy(const Image2D& f) {
    double e = 0.0;
    for (float v : f.data) e += static_cast<double>(v) * v;
    return e;
}

std::vector<cplx> to_complex(const Image2D& f) {
    // correlation grid is [z][x] row-major: width nx, height nz
    std::vector<cplx> out(f.nx * f.nz);
    for (std::size_t z = 0; z < f.nz; ++z)
        for (std::size_t x = 0; x < f.nx; ++x) out[z * f.nx + x] = cplx(f.at(x, z), 0.0);
    return out;
}

}  // namespace

ShiftEstimate estimate_shift(const Image2D& reference, const Image2D& moving) {
    if (reference.nx != moving.nx || reference.nz != moving.nz)
        throw ArgumentError("estimate_shift: frame shapes differ");
    auto ref_f = to_complex(reference);
    auto mov_f = to_complex(moving);
    fft2d(ref_f, reference.nx, reference.nz, false);
    fft2d(mov_f, reference.nx, reference.nz, false);
    const auto surf = correlation_surface(ref_f, std::move(mov_f), reference.nx, reference.nz);
    const Peak p = find_peak(surf, reference.nx, reference.nz);
    ShiftEstimate est;
    est.dx = wrap_signed(p.index % reference.nx, reference.nx);
    est.dz = wrap_signed(p.index / reference.nx, reference.nz);
    est.peak_ratio = p.ratio;
    return est;
}

Image2D shift_frame(const Image2D& frame, int dx, int dz) {
    Image2D out(frame.nx, frame.nz);
    for (std::size_t x = 0; x < frame.nx; ++x)
        for (std::size_t z = 0; z < frame.nz; ++z) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) - dx;
            const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(z) - dz;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(frame.nx) && sz >= 0 &&
                sz < static_cast<std::ptrdiff_t>(frame.nz))
                out.at(x, z) = frame.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sz));
        }
    return out;
}

RegisterResult register_frames(const BFrameEnsemble& ensemble) {
    if (ensemble.nr() < 2) throw ArgumentError("register_frames: need at least 2 frames");
    if (frame_energy(ensemble.frames[0]) == 0.0)
        throw ArgumentError("register_frames: frame 0 has zero energy");

    RegisterResult res;
    res.ensemble.y_index = ensemble.y_index;
    res.ensemble.frames.push_back(ensemble.frames[0]);
    res.shifts.push_back(ShiftEstimate{});

    auto ref_f = to_complex(ensemble.frames[0]);
    fft2d(ref_f, ensemble.nx(), ensemble.nz(), false);

    for (std::size_t i = 1; i < ensemble.nr(); ++i) {
        const Image2D& mov = ensemble.frames[i];
        if (mov.nx != ensemble.nx() || mov.nz != ensemble.nz())
            throw ArgumentError("register_frames: frame shapes differ");
        if (frame_energy(mov) == 0.0)
            throw ArgumentError("register_frames: frame " + std::to_string(i) + " has zero energy");
        auto mov_f = to_complex(mov);
        fft2d(mov_f, mov.nx, mov.nz, false);
        const auto surf = correlation_surface(ref_f, std::move(mov_f), mov.nx, mov.nz);
        const Peak p = find_peak(surf, mov.nx, mov.nz);
        ShiftEstimate est;
        est.dx = wrap_signed(p.index % mov.nx, mov.nx);
        est.dz = wrap_signed(p.index / mov.nx, mov.nz);
        est.peak_ratio = p.ratio;
        res.shifts.push_back(est);
        res.ensemble.frames.push_back(shift_frame(mov, -est.dx, -est.dz));
    }
    return res;
}

AlineAlignResult align_alines(const BFrameEnsemble& ensemble) {
    if (ensemble.nr() < 1) throw ArgumentError("align_alines: empty ensemble");
    const std::size_t nx = ensemble.nx(), nz = ensemble.nz();

    AlineAlignResult res;
    res.ensemble.y_index = ensemble.y_index;
    res.ensemble.frames.push_back(ensemble.frames[0]);
    res.shifts.assign(ensemble.nr(), std::vector<int>(nx, 0));

    // reference line spectra, computed once
    std::vector<std::vector<cplx>> ref_lines(nx);
    std::vector<double> ref_energy(nx, 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
        std::vector<cplx> line(nz);
        for (std::size_t z = 0; z < nz; ++z) {
            const double v = ensemble.frames[0].at(x, z);
            ref_energy[x] += v * v;
            line[z] = cplx(v, 0.0);
        }
        if (ref_energy[x] > 0.0) fft(line, false);
        ref_lines[x] = std::move(line);
    }

    for (std::size_t i = 1; i < ensemble.nr(); ++i) {
        const Image2D& mov = ensemble.frames[i];
        if (mov.nx != nx || mov.nz != nz) throw ArgumentError("align_alines: frame shapes differ");
        Image2D aligned(nx, nz);
        for (std::size_t x = 0; x < nx; ++x) {
            std::vector<cplx> line(nz);
            double energy = 0.0;
            for (std::size_t z = 0; z < nz; ++z) {
                const double v = mov.at(x, z);
                energy += v * v;
                line[z] = cplx(v, 0.0);
            }
            int dz = 0;
            if (energy == 0.0 || ref_energy[x] == 0.0) {
                ++res.zero_energy_lines;
            } else {
                fft(line, false);
                const auto surf = correlation_surface(ref_lines[x], std::move(line), nz, 1);
                const Peak p = find_peak(surf, nz, 1);
                dz = wrap_signed(p.index, nz);
            }
            res.shifts[i][x] = dz;
            for (std::size_t z = 0; z < nz; ++z) {
                const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(z) + dz;
                aligned.at(x, z) = (sz >= 0 && sz < static_cast<std::ptrdiff_t>(nz))
                                       ? mov.at(x, static_cast<std::size_t>(sz))
                                       : 0.0f;
            }
        }
        res.ensemble.frames.push_back(std::move(aligned));
    }
    return res;
}

std::vector<PatchBox> extract_patch_boxes(std::size_t frame_w, std::size_t frame_h, std::size_t size) {
    if (size == 0) throw ArgumentError("extract_patch_boxes: size must be positive");
    if (frame_w < size || frame_h < size)
        throw ArgumentError("extract_patch_boxes: frame smaller than patch size");

    const auto starts = [size](std::size_t extent) {
        std::vector<std::size_t> s;
        for (std::size_t o = 0; o + size <= extent; o += size) s.push_back(o);
        if (s.back() + size < extent) s.push_back(extent - size);
        return s;
    };
    const auto xs = starts(frame_w);
    const auto zs = starts(frame_h);
    std::vector<PatchBox> boxes;
    boxes.reserve(xs.size() * zs.size());
    for (std::size_t x0 : xs)
        for (std::size_t z0 : zs) boxes.push_back(PatchBox{x0, z0, size});
    return boxes;
}

Image2D crop_patch(const Image2D& frame, const PatchBox& box) {
    if (box.x0 + box.size > frame.nx || box.z0 + box.size > frame.nz)
        throw ArgumentError("crop_patch: box outside frame");
    Image2D out(box.size, box.size);
    for (std::size_t x = 0; x < box.size; ++x)
        for (std::size_t z = 0; z < box.size; ++z) out.at(x, z) = frame.at(box.x0 + x, box.z0 + z);
    return out;
}

Image2D normalize_frame(const Image2D& frame, double lo_pct, double hi_pct) {
    if (!(lo_pct >= 0.0 && hi_pct <= 100.0 && lo_pct < hi_pct))
        throw ArgumentError("normalize_frame: bad percentile band");
    for (float v : frame.data)
        if (!std::isfinite(v)) throw ArgumentError("normalize_frame: non-finite input");

    std::vector<float> sorted(frame.data);
    std::sort(sorted.begin(), sorted.end());
    const auto percentile = [&sorted](double pct) {
        const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        double v = sorted[lo];
        if (lo + 1 < sorted.size()) v += frac * (static_cast<double>(sorted[lo + 1]) - v);
        return v;
    };
    const double p_lo = percentile(lo_pct);
    const double p_hi = percentile(hi_pct);

    Image2D out(frame.nx, frame.nz);
    if (p_hi > p_lo) {
        const double inv = 1.0 / (p_hi - p_lo);
        for (std::size_t i = 0; i < frame.data.size(); ++i) {
            const double v = (static_cast<double>(frame.data[i]) - p_lo) * inv;
            out.data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    // flat frames stay all zero
    return out;
}

}  // namespace vet
