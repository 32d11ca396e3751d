#include <cmath>

#include "doctest.h"
#include "vet/common.hpp"
#include "vet/phantom.hpp"
#include "vet/preprocess.hpp"

using namespace vet;

namespace {

Image2D speckle_frame(std::size_t nx, std::size_t nz, std::uint64_t seed) {
    Image2D img(nx, nz);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<float>(rng.rayleigh(0.3));
    return img;
}

}  // namespace

TEST_CASE("identical frames register with zero shift") {
    const auto f = speckle_frame(32, 32, 3);
    BFrameEnsemble e;
    e.frames = {f, f, f};
    const auto res = register_frames(e);
    for (const auto& s : res.shifts) {
        CHECK(s.dx == 0);
        CHECK(s.dz == 0);
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(res.ensemble.frames[i].data == f.data);
}

TEST_CASE("constructed (5,-3) shift is recovered and realigned exactly on the overlap") {
    const auto f = speckle_frame(64, 48, 9);
    BFrameEnsemble e;
    e.frames = {f, shift_frame(f, 5, -3)};
    const auto res = register_frames(e);
    CHECK(res.shifts[1].dx == 5);
    CHECK(res.shifts[1].dz == -3);
    CHECK(res.shifts[1].peak_ratio > 1.0);

    // valid overlap: pixels whose source stayed inside the frame both ways
    const auto& aligned = res.ensemble.frames[1];
    for (std::size_t x = 5; x < 64 - 5; ++x)
        for (std::size_t z = 3; z < 48 - 3; ++z) CHECK(aligned.at(x, z) == f.at(x, z));
}

TEST_CASE("shift recovery is exact over a +-8 pixel grid") {
    const auto f = speckle_frame(64, 64, 17);
    std::size_t cases = 0, exact = 0;
    for (int dx = -8; dx <= 8; dx += 2)
        for (int dz = -8; dz <= 8; dz += 2) {
            BFrameEnsemble e;
            e.frames = {f, shift_frame(f, dx, dz)};
            const auto res = register_frames(e);
            ++cases;
            if (res.shifts[1].dx == dx && res.shifts[1].dz == dz) ++exact;
        }
    CHECK(exact == cases);
}

TEST_CASE("registration is idempotent") {
    const auto f = speckle_frame(48, 48, 21);
    BFrameEnsemble e;
    e.frames = {f, shift_frame(f, 4, 2), shift_frame(f, -3, 6)};
    const auto once = register_frames(e);
    const auto twice = register_frames(once.ensemble);
    for (const auto& s : twice.shifts) {
        CHECK(s.dx == 0);
        CHECK(s.dz == 0);
    }
}

TEST_CASE("phantom bulk motion is recovered from the volume meta") {
    PhantomConfig cfg;
    cfg.nr = 4;
    cfg.nx = cfg.ny = cfg.nz = 64;
    cfg.vessel_count = 2;
    cfg.bulk_motion = 3;
    cfg.seed = 5;
    const auto ph = make_phantom(cfg);

    std::size_t total = 0, hits = 0;
    for (std::size_t y = 0; y < cfg.ny; y += 8) {
        const auto res = register_frames(slice_ensemble(ph.volume, y));
        for (std::size_t r = 1; r < cfg.nr; ++r) {
            ++total;
            if (res.shifts[r].dx == ph.shifts[r].first && res.shifts[r].dz == ph.shifts[r].second)
                ++hits;
        }
    }
    CHECK(static_cast<double>(hits) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("degenerate all-zero frame raises a registration error naming the frame") {
    BFrameEnsemble e;
    e.frames = {speckle_frame(16, 16, 1), Image2D(16, 16, 0.0f)};
    CHECK_THROWS_WITH_AS(register_frames(e), doctest::Contains("frame 1"), ArgumentError);
}

TEST_CASE("align_alines: identical frames pass through unchanged") {
    const auto f = speckle_frame(24, 32, 31);
    BFrameEnsemble e;
    e.frames = {f, f};
    const auto res = align_alines(e);
    CHECK(res.ensemble.frames[1].data == f.data);
    CHECK(res.zero_energy_lines == 0);
    for (int s : res.shifts[1]) CHECK(s == 0);
}

TEST_CASE("align_alines recovers a single shifted A-line") {
    const auto f = speckle_frame(24, 64, 37);
    Image2D moved = f;
    const std::size_t line = 7;
    // shift that A-line by +4 axially with zero fill
    for (std::size_t z = 0; z < 64; ++z) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(z) - 4;
        moved.at(line, z) = src >= 0 ? f.at(line, static_cast<std::size_t>(src)) : 0.0f;
    }
    BFrameEnsemble e;
    e.frames = {f, moved};
    const auto res = align_alines(e);
    for (std::size_t x = 0; x < 24; ++x) {
        if (x == line)
            CHECK(res.shifts[1][x] == 4);
        else
            CHECK(res.shifts[1][x] == 0);
    }
    // realigned line matches the original on the valid region
    for (std::size_t z = 0; z + 4 < 64; ++z)
        CHECK(res.ensemble.frames[1].at(line, z) == f.at(line, z));
}

TEST_CASE("align_alines: zero-energy line gets shift 0 and a warning count") {
    auto f = speckle_frame(8, 32, 41);
    auto g = f;
    for (std::size_t z = 0; z < 32; ++z) g.at(3, z) = 0.0f;
    BFrameEnsemble e;
    e.frames = {f, g};
    const auto res = align_alines(e);
    CHECK(res.zero_energy_lines == 1);
    CHECK(res.shifts[1][3] == 0);
}

TEST_CASE("A-line shifts stay within the estimator range") {
    const auto f = speckle_frame(16, 40, 43);
    const auto g = speckle_frame(16, 40, 44);  // unrelated content
    BFrameEnsemble e;
    e.frames = {f, g};
    const auto res = align_alines(e);
    for (int s : res.shifts[1]) CHECK(std::abs(s) <= 20);
}

TEST_CASE("patch boxes: paper-scale 600x300 frame yields the 8-box grid") {
    const auto boxes = extract_patch_boxes(600, 300, 192);
    REQUIRE(boxes.size() == 8);
    std::vector<std::size_t> xs, zs;
    for (const auto& b : boxes) {
        xs.push_back(b.x0);
        zs.push_back(b.z0);
        CHECK(b.size == 192);
        CHECK(b.x0 + b.size <= 600);
        CHECK(b.z0 + b.size <= 300);
    }
    CHECK(xs == std::vector<std::size_t>{0, 0, 192, 192, 384, 384, 408, 408});
    CHECK(zs == std::vector<std::size_t>{0, 108, 0, 108, 0, 108, 0, 108});
}

TEST_CASE("patch boxes: exact fit gives a single box") {
    const auto boxes = extract_patch_boxes(192, 192, 192);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].x0 == 0);
    CHECK(boxes[0].z0 == 0);
}

TEST_CASE("patch boxes: undersized frame is rejected") {
    CHECK_THROWS_AS(extract_patch_boxes(191, 192, 192), ArgumentError);
}

TEST_CASE("normalize_frame: constant input maps to zeros") {
    Image2D img(8, 8, 3.5f);
    const auto out = normalize_frame(img);
    for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("normalize_frame: full-range input with hi_pct=100 is unchanged") {
    Image2D img(4, 4);
    for (std::size_t i = 0; i < 16; ++i) img.data[i] = static_cast<float>(i) / 15.0f;
    const auto out = normalize_frame(img, 0.0, 100.0);
    for (std::size_t i = 0; i < 16; ++i) CHECK(out.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
}

TEST_CASE("normalize_frame: 0..999 ramp clamps the top value at hi_pct=99.9") {
    Image2D img(100, 10);
    for (std::size_t i = 0; i < 1000; ++i) img.data[i] = static_cast<float>(i);
    const auto out = normalize_frame(img, 0.0, 99.9);
    // P99.9 of 0..999 with linear interpolation is 998.001, so 999 clamps
    CHECK(out.data[999] == 1.0f);
    CHECK(out.data[998] < 1.0f);
    CHECK(out.data[0] == 0.0f);
}

TEST_CASE("normalize_frame preserves pixel order inside the unclamped band") {
    const auto img = speckle_frame(16, 16, 53);
    const auto out = normalize_frame(img, 0.0, 99.9);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        for (std::size_t j = 0; j < img.data.size(); ++j)
            if (img.data[i] < img.data[j] && out.data[i] < 1.0f && out.data[j] < 1.0f)
                CHECK(out.data[i] <= out.data[j]);
    for (float v : out.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}
