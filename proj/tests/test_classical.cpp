#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "vet/classical.hpp"
#include "vet/common.hpp"
#include "vet/phantom.hpp"

using namespace vet;

namespace {

BFrameEnsemble two_frames(const std::vector<float>& a, const std::vector<float>& b, std::size_t nx,
                          std::size_t nz) {
    BFrameEnsemble e;
    Image2D fa(nx, nz), fb(nx, nz);
    fa.data = a;
    fb.data = b;
    e.frames = {fa, fb};
    return e;
}

AutocorrMatrix random_symmetric(std::size_t n, std::uint64_t seed) {
    AutocorrMatrix m;
    m.n = n;
    m.entries.assign(n * n, 0.0);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) m.at(i, j) = m.at(j, i) = rng.uniform(-1.0, 1.0);
    return m;
}

// vessel/static mean flow contrast on a shared phantom; used by both
// classical algorithms
struct Contrast {
    double vessel = 0.0;
    double background = 0.0;
    double ratio() const { return vessel / background; }
};

Contrast flow_contrast(const FlowFrame& flow, const Phantom& ph, std::size_t y) {
    Contrast c;
    std::size_t nv = 0, nb = 0;
    for (std::size_t x = 0; x < flow.nx; ++x)
        for (std::size_t z = 0; z < flow.nz; ++z) {
            if (ph.mask_at(y, x, z)) {
                c.vessel += flow.at(x, z);
                ++nv;
            } else {
                c.background += flow.at(x, z);
                ++nb;
            }
        }
    c.vessel /= static_cast<double>(nv);
    c.background /= static_cast<double>(nb);
    return c;
}

Phantom contrast_phantom() {
    PhantomConfig cfg;
    cfg.nr = 4;
    cfg.nx = cfg.ny = cfg.nz = 64;
    cfg.vessel_count = 3;
    cfg.decorrelation = 1.0;
    cfg.bulk_motion = 0;
    cfg.seed = 1234;
    return make_phantom(cfg);
}

}  // namespace

TEST_CASE("sv_octa: identical frames give exactly zero flow") {
    std::vector<float> f(64, 0.4f);
    const auto flow = sv_octa(two_frames(f, f, 8, 8));
    for (float v : flow.data) CHECK(v == 0.0f);
}

TEST_CASE("sv_octa: two constant frames differ by their offset") {
    std::vector<float> a(64, 0.0f), b(64, 2.0f);
    const auto flow = sv_octa(two_frames(a, b, 8, 8));
    for (float v : flow.data) CHECK(v == 2.0f);
}

TEST_CASE("sv_octa rejects a single frame") {
    BFrameEnsemble e;
    e.frames = {Image2D(4, 4, 1.0f)};
    CHECK_THROWS_AS(sv_octa(e), ArgumentError);
}

TEST_CASE("sv_octa: vessel flow dominates static flow on the phantom") {
    // statics are bit-identical across repeats on this phantom model, so the
    // background flow is exactly zero and the vessel/static ratio is infinite
    // (trivially >= 5); the vessel mean is the frozen regression constant
    const auto ph = contrast_phantom();
    const std::size_t y = 32;
    const auto flow = sv_octa(slice_ensemble(ph.volume, y));
    const auto c = flow_contrast(flow, ph, y);
    CHECK(c.background == 0.0);
    CHECK(c.vessel > 0.0);
    CHECK(c.ratio() >= 5.0);  // +inf
    CHECK(c.vessel == doctest::Approx(0.20485).epsilon(0.02));
}

TEST_CASE("eigh: identity matrix") {
    AutocorrMatrix m;
    m.n = 4;
    m.entries.assign(16, 0.0);
    for (std::size_t i = 0; i < 4; ++i) m.at(i, i) = 1.0;
    const auto eig = eigh_hermitian(m);
    for (double v : eig.eigenvalues) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eigh: diag(3,1) eigenpairs") {
    AutocorrMatrix m;
    m.n = 2;
    m.entries = {3.0, 0.0, 0.0, 1.0};
    const auto eig = eigh_hermitian(m);
    CHECK(eig.eigenvalues[0] == doctest::Approx(3.0));
    CHECK(eig.eigenvalues[1] == doctest::Approx(1.0));
    // eigenvectors are +-e1 and +-e2
    CHECK(std::abs(eig.vec(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(eig.vec(1, 0)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(eig.vec(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("eigh: random symmetric matrices reconstruct and stay orthonormal") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const auto m = random_symmetric(8, seed);
        const auto eig = eigh_hermitian(m);

        // descending order
        for (std::size_t i = 0; i + 1 < 8; ++i) CHECK(eig.eigenvalues[i] >= eig.eigenvalues[i + 1]);

        // trace preservation
        double tr = 0.0, sum = 0.0;
        for (std::size_t i = 0; i < 8; ++i) {
            tr += m.at(i, i);
            sum += eig.eigenvalues[i];
        }
        CHECK(sum == doctest::Approx(tr).epsilon(1e-10));

        // E diag(L) E^T reconstructs m within 1e-10 relative Frobenius
        double err2 = 0.0, norm2 = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                double rec = 0.0;
                for (std::size_t k = 0; k < 8; ++k)
                    rec += eig.vec(i, k) * eig.eigenvalues[k] * eig.vec(j, k);
                err2 += (rec - m.at(i, j)) * (rec - m.at(i, j));
                norm2 += m.at(i, j) * m.at(i, j);
            }
        CHECK(std::sqrt(err2 / norm2) < 1e-10);

        // unitarity within 1e-10
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < 8; ++k) dot += eig.vec(k, i) * eig.vec(k, j);
                CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
            }
    }
}

TEST_CASE("eigh matches closed-form 2x2 and 3x3 eigenvalues") {
    AutocorrMatrix m2;
    m2.n = 2;
    m2.entries = {1.3, -0.7, -0.7, 2.1};
    const auto e2 = eigh_hermitian(m2);
    const auto expect2 = oracle::eig2x2(1.3, -0.7, 2.1);
    CHECK(e2.eigenvalues[0] == doctest::Approx(expect2[0]).epsilon(1e-12));
    CHECK(e2.eigenvalues[1] == doctest::Approx(expect2[1]).epsilon(1e-12));

    const std::array<double, 9> m3v{2.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 0.7};
    AutocorrMatrix m3;
    m3.n = 3;
    m3.entries.assign(m3v.begin(), m3v.end());
    const auto e3 = eigh_hermitian(m3);
    const auto expect3 = oracle::eig3x3(m3v);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(e3.eigenvalues[i] == doctest::Approx(expect3[i]).epsilon(1e-10));
}

TEST_CASE("eigh rejects asymmetric input") {
    AutocorrMatrix m;
    m.n = 2;
    m.entries = {1.0, 0.5, 0.2, 1.0};
    CHECK_THROWS_AS(eigh_hermitian(m), ArgumentError);
}

TEST_CASE("ed_octa: identical frames are annihilated by k=1") {
    Rng rng(5);
    std::vector<float> f(256);
    for (auto& v : f) v = static_cast<float>(rng.rayleigh(0.3));
    BFrameEnsemble e;
    Image2D img(16, 16);
    img.data = f;
    e.frames = {img, img, img, img};
    const auto flow = ed_octa(e, 1);
    double energy = 0.0, input_energy = 0.0;
    for (float v : flow.data) energy += static_cast<double>(v) * v;
    for (float v : f) input_energy += static_cast<double>(v) * v;
    CHECK(energy <= 1e-12 * input_energy);
}

TEST_CASE("ed_octa: antisymmetric pair f,-f collapses to rank one") {
    Rng rng(8);
    std::vector<float> f(64), g(64);
    for (std::size_t i = 0; i < 64; ++i) {
        f[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
        g[i] = -f[i];
    }
    const auto e = two_frames(f, g, 8, 8);

    // the autocorrelation has exactly one nonzero eigenvalue
    const auto c = autocorrelation(stack_ensemble(e));
    const auto eig = eigh_hermitian(c);
    CHECK(eig.eigenvalues[0] > 0.0);
    CHECK(std::abs(eig.eigenvalues[1]) < 1e-12 * eig.eigenvalues[0]);

    const auto flow = ed_octa(e, 1);
    for (float v : flow.data) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("ed projector is idempotent and splits energy orthogonally") {
    PhantomConfig cfg;
    cfg.nr = 6;
    cfg.nx = cfg.ny = cfg.nz = 32;
    cfg.vessel_count = 2;
    cfg.seed = 77;
    const auto ph = make_phantom(cfg);
    const auto x = stack_ensemble(slice_ensemble(ph.volume, 16));
    const auto eig = eigh_hermitian(autocorrelation(x));

    for (std::size_t k : {1u, 2u}) {
        const auto once = project_out(x, eig, k);
        const auto twice = project_out(once, eig, k);

        double diff2 = 0.0, norm2 = 0.0;
        for (std::size_t i = 0; i < once.values.size(); ++i) {
            diff2 += (twice.values[i] - once.values[i]) * (twice.values[i] - once.values[i]);
            norm2 += once.values[i] * once.values[i];
        }
        CHECK(std::sqrt(diff2) <= 1e-10 * std::sqrt(norm2));

        // ||X||^2 = ||Xv||^2 + ||X - Xv||^2
        double ex = 0.0, ev = 0.0, er = 0.0;
        for (std::size_t i = 0; i < x.values.size(); ++i) {
            ex += x.values[i] * x.values[i];
            ev += once.values[i] * once.values[i];
            const double r = x.values[i] - once.values[i];
            er += r * r;
        }
        CHECK(std::abs(ex - (ev + er)) <= 1e-8 * ex);
    }
}

TEST_CASE("ed suppresses static tissue at least as well as sv under frame noise") {
    // noiseless statics give sv an infinite ratio outright, so the
    // suppression comparison is made on ensembles with additive sensor noise,
    // where both backgrounds are nonzero
    const auto ph = contrast_phantom();
    const std::size_t y = 20;
    auto ensemble = slice_ensemble(ph.volume, y);
    Rng rng(99);
    for (auto& frame : ensemble.frames)
        for (auto& v : frame.data) v += static_cast<float>(rng.rayleigh(0.02));

    const auto sv_c = flow_contrast(sv_octa(ensemble), ph, y);
    const auto ed_c = flow_contrast(ed_octa(ensemble, 1), ph, y);
    CHECK(std::isfinite(sv_c.ratio()));
    CHECK(ed_c.ratio() >= sv_c.ratio());
}

TEST_CASE("ed vessel/static contrast on the noiseless phantom is a frozen constant") {
    const auto ph = contrast_phantom();
    const std::size_t y = 20;
    const auto ed_c = flow_contrast(ed_octa(slice_ensemble(ph.volume, y), 1), ph, y);
    CHECK(ed_c.ratio() >= 100.0);
    CHECK(ed_c.ratio() == doctest::Approx(476.45).epsilon(0.05));
}

TEST_CASE("sv and ed are permutation-covariant in pixels") {
    Rng rng(3);
    const std::size_t nx = 8, nz = 8, n = nx * nz;
    BFrameEnsemble e;
    for (int r = 0; r < 4; ++r) {
        Image2D f(nx, nz);
        for (auto& v : f.data) v = static_cast<float>(rng.rayleigh(0.4));
        e.frames.push_back(std::move(f));
    }
    // a fixed permutation of pixel columns
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = (i * 37 + 11) % n;
    BFrameEnsemble pe;
    for (const auto& f : e.frames) {
        Image2D g(nx, nz);
        for (std::size_t i = 0; i < n; ++i) g.data[i] = f.data[perm[i]];
        pe.frames.push_back(std::move(g));
    }

    const auto sv_a = sv_octa(e), sv_b = sv_octa(pe);
    const auto ed_a = ed_octa(e, 1), ed_b = ed_octa(pe, 1);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(sv_b.data[i] == doctest::Approx(sv_a.data[perm[i]]).epsilon(1e-12));
        CHECK(ed_b.data[i] == doctest::Approx(ed_a.data[perm[i]]).epsilon(1e-7));
    }
}

TEST_CASE("ed_octa validates k") {
    BFrameEnsemble e;
    e.frames = {Image2D(4, 4, 0.5f), Image2D(4, 4, 0.6f)};
    CHECK_THROWS_AS(ed_octa(e, 2), ArgumentError);
    CHECK_THROWS_AS(ed_octa(e, 5), ArgumentError);
}
