#include "vet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vet/common.hpp"

namespace vet {

namespace {

struct Vec3 {
    double y, x, z;
};

double dist_point_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
    const double dy = b.y - a.y, dx = b.x - a.x, dz = b.z - a.z;
    const double len2 = dy * dy + dx * dx + dz * dz;
    double t = 0.0;
    if (len2 > 0.0) {
        t = ((p.y - a.y) * dy + (p.x - a.x) * dx + (p.z - a.z) * dz) / len2;
        t = std::clamp(t, 0.0, 1.0);
    }
    const double qy = a.y + t * dy, qx = a.x + t * dx, qz = a.z + t * dz;
    const double ry = p.y - qy, rx = p.x - qx, rz = p.z - qz;
    return std::sqrt(ry * ry + rx * rx + rz * rz);
}

struct Segment {
    Vec3 a, b;
    double radius;
};

// Rasterize one segment into the mask by distance test over its bounding box.
void rasterize(const Segment& s, std::size_t ny, std::size_t nx, std::size_t nz,
               std::vector<std::uint8_t>& mask) {
    const double r = s.radius;
    const auto lo = [&](double a, double b) { return std::max(0.0, std::floor(std::min(a, b) - r)); };
    const auto hi = [&](double a, double b, std::size_t n) {
        return std::min(static_cast<double>(n) - 1.0, std::ceil(std::max(a, b) + r));
    };
    const std::size_t y0 = static_cast<std::size_t>(lo(s.a.y, s.b.y));
    const std::size_t y1 = static_cast<std::size_t>(hi(s.a.y, s.b.y, ny));
    const std::size_t x0 = static_cast<std::size_t>(lo(s.a.x, s.b.x));
    const std::size_t x1 = static_cast<std::size_t>(hi(s.a.x, s.b.x, nx));
    const std::size_t z0 = static_cast<std::size_t>(lo(s.a.z, s.b.z));
    const std::size_t z1 = static_cast<std::size_t>(hi(s.a.z, s.b.z, nz));
    for (std::size_t y = y0; y <= y1; ++y)
        for (std::size_t x = x0; x <= x1; ++x)
            for (std::size_t z = z0; z <= z1; ++z) {
                const Vec3 p{static_cast<double>(y), static_cast<double>(x), static_cast<double>(z)};
                if (dist_point_segment(p, s.a, s.b) <= r) mask[(y * nx + x) * nz + z] = 1;
            }
}

}  // namespace

void PhantomConfig::validate() const {
    if (nr < 1) throw ConfigError("phantom: nr must be >= 1");
    if (nx == 0 || ny == 0 || nz == 0) throw ConfigError("phantom: dims must be positive");
    if (decorrelation < 0.0 || decorrelation > 1.0)
        throw ConfigError("phantom: decorrelation must be in [0,1]");
    if (radius_min <= 0.0 || radius_max < radius_min)
        throw ConfigError("phantom: bad vessel radius range");
    if (radius_max >= static_cast<double>(std::min(nx, nz)) / 4.0)
        throw ConfigError("phantom: vessel radius too large for volume");
    if (speckle_sigma <= 0.0) throw ConfigError("phantom: speckle sigma must be positive");
    if (bulk_motion < 0) throw ConfigError("phantom: bulk motion must be >= 0");
}

Phantom make_phantom(const PhantomConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    const std::size_t nvox = cfg.ny * cfg.nx * cfg.nz;

    // Vessels: random-walk tubes running along the slow axis, constant radius.
    std::vector<std::uint8_t> mask(nvox, 0);
    for (std::size_t v = 0; v < cfg.vessel_count; ++v) {
        const double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
        double x = rng.uniform(radius, static_cast<double>(cfg.nx) - 1.0 - radius);
        double z = rng.uniform(static_cast<double>(cfg.nz) * 0.25, static_cast<double>(cfg.nz) * 0.75);
        const double step = std::max(4.0, static_cast<double>(cfg.ny) / 8.0);
        double y = 0.0;
        while (y < static_cast<double>(cfg.ny) - 1.0) {
            const double y_next = std::min(y + step, static_cast<double>(cfg.ny) - 1.0);
            double x_next = x + rng.uniform(-step * 0.5, step * 0.5);
            double z_next = z + rng.uniform(-step * 0.25, step * 0.25);
            x_next = std::clamp(x_next, radius, static_cast<double>(cfg.nx) - 1.0 - radius);
            z_next = std::clamp(z_next, radius, static_cast<double>(cfg.nz) - 1.0 - radius);
            rasterize(Segment{{y, x, z}, {y_next, x_next, z_next}, radius}, cfg.ny, cfg.nx, cfg.nz, mask);
            y = y_next;
            x = x_next;
            z = z_next;
        }
    }

    // Static speckle bed, one Rayleigh draw per voxel, shared by all repeats.
    std::vector<float> statics(nvox);
    for (std::size_t i = 0; i < nvox; ++i)
        statics[i] = static_cast<float>(rng.rayleigh(cfg.speckle_sigma));

    // Bulk motion shifts; repeat 0 is the reference and stays put.
    std::vector<std::pair<int, int>> shifts(cfg.nr, {0, 0});
    for (std::size_t r = 1; r < cfg.nr; ++r) {
        if (cfg.bulk_motion > 0) {
            shifts[r].first = static_cast<int>(rng.uniform_int(-cfg.bulk_motion, cfg.bulk_motion));
            shifts[r].second = static_cast<int>(rng.uniform_int(-cfg.bulk_motion, cfg.bulk_motion));
        }
    }

    Phantom ph;
    ph.volume = MultiRepeatVolume(cfg.nr, cfg.ny, cfg.nx, cfg.nz);
    ph.vessel_mask = mask;
    ph.shifts = shifts;

    const double s = cfg.decorrelation;
    std::vector<float> repeat_buf(nvox);
    for (std::size_t r = 0; r < cfg.nr; ++r) {
        // unshifted content for this repeat
        for (std::size_t i = 0; i < nvox; ++i) {
            if (mask[i]) {
                const double fresh = rng.rayleigh(cfg.speckle_sigma);
                repeat_buf[i] = static_cast<float>((1.0 - s) * statics[i] + s * fresh);
            } else {
                repeat_buf[i] = statics[i];
            }
        }
        // whole-repeat (dx, dz) shift, zero fill at exposed borders
        const int dx = shifts[r].first, dz = shifts[r].second;
        for (std::size_t y = 0; y < cfg.ny; ++y)
            for (std::size_t x = 0; x < cfg.nx; ++x)
                for (std::size_t z = 0; z < cfg.nz; ++z) {
                    const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) - dx;
                    const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(z) - dz;
                    float v = 0.0f;
                    if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(cfg.nx) && sz >= 0 &&
                        sz < static_cast<std::ptrdiff_t>(cfg.nz))
                        v = repeat_buf[(y * cfg.nx + static_cast<std::size_t>(sx)) * cfg.nz +
                                       static_cast<std::size_t>(sz)];
                    ph.volume.at(r, y, x, z) = v;
                }
    }

    ph.volume.meta["seed"] = std::to_string(cfg.seed);
    ph.volume.meta["generator"] = "phantom";
    for (std::size_t r = 0; r < cfg.nr; ++r)
        ph.volume.meta["shift." + std::to_string(r)] =
            std::to_string(shifts[r].first) + "," + std::to_string(shifts[r].second);
    return ph;
}

}  // namespace vet
