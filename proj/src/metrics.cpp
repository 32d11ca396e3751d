#include "vet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "vet/common.hpp"

namespace vet {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L=1
constexpr double kC2 = 0.03 * 0.03;  // (K2*L)^2

const std::array<double, kWindow>& gaussian_taps() {
    static const std::array<double, kWindow> taps = [] {
        std::array<double, kWindow> t{};
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - (kWindow - 1) / 2.0;
            t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += t[i];
        }
        for (auto& v : t) v /= sum;  // renormalized after truncation
        return t;
    }();
    return taps;
}

void check_pair(const Image2D& a, const Image2D& b, const char* who) {
    if (a.nx != b.nx || a.nz != b.nz) throw ArgumentError(std::string(who) + ": image shapes differ");
    for (const auto* img : {&a, &b})
        for (float v : img->data)
            if (!(v >= 0.0f && v <= 1.0f))
                throw ArgumentError(std::string(who) + ": values must lie in [0,1]");
}

// Separable valid-region Gaussian filter; output is (w-10) x (h-10) row-major
// with row length (h-10) matching Image2D's [x][z] layout.
std::vector<double> gauss_valid(const std::vector<double>& img, std::size_t w, std::size_t h) {
    const auto& taps = gaussian_taps();
    const std::size_t ho = h - (kWindow - 1);
    std::vector<double> tmp(w * ho);
    for (std::size_t x = 0; x < w; ++x)
        for (std::size_t z = 0; z < ho; ++z) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * img[x * h + z + k];
            tmp[x * ho + z] = acc;
        }
    const std::size_t wo = w - (kWindow - 1);
    std::vector<double> out(wo * ho);
    for (std::size_t x = 0; x < wo; ++x)
        for (std::size_t z = 0; z < ho; ++z) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * tmp[(x + k) * ho + z];
            out[x * ho + z] = acc;
        }
    return out;
}

std::vector<double> to_double(const Image2D& img) {
    return std::vector<double>(img.data.begin(), img.data.end());
}

std::vector<double> elementwise_product(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

SsimComponents ssim_components_impl(const Image2D& a, const Image2D& b) {
    if (a.nx < kWindow || a.nz < kWindow)
        throw ArgumentError("ssim: image smaller than the 11x11 window");

    const std::size_t w = a.nx, h = a.nz;
    const auto av = to_double(a);
    const auto bv = to_double(b);
    const auto mu_a = gauss_valid(av, w, h);
    const auto mu_b = gauss_valid(bv, w, h);
    const auto raw_aa = gauss_valid(elementwise_product(av, av), w, h);
    const auto raw_bb = gauss_valid(elementwise_product(bv, bv), w, h);
    const auto raw_ab = gauss_valid(elementwise_product(av, bv), w, h);

    double sum_l = 0.0, sum_cs = 0.0, sum_full = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = raw_aa[i] - ma * ma;
        const double vb = raw_bb[i] - mb * mb;
        const double cov = raw_ab[i] - ma * mb;
        const double l = (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
        const double cs = (2.0 * cov + kC2) / (va + vb + kC2);
        sum_l += l;
        sum_cs += cs;
        sum_full += l * cs;
    }
    const double inv = 1.0 / static_cast<double>(mu_a.size());
    return SsimComponents{sum_l * inv, sum_cs * inv, sum_full * inv};
}

Image2D mean_pool2(const Image2D& img) {
    Image2D out(img.nx / 2, img.nz / 2);
    for (std::size_t x = 0; x < out.nx; ++x)
        for (std::size_t z = 0; z < out.nz; ++z)
            out.at(x, z) = 0.25f * (img.at(2 * x, 2 * z) + img.at(2 * x + 1, 2 * z) +
                                    img.at(2 * x, 2 * z + 1) + img.at(2 * x + 1, 2 * z + 1));
    return out;
}

}  // namespace

double psnr(const Image2D& a, const Image2D& b) {
    check_pair(a, b, "psnr");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

SsimComponents ssim_components(const Image2D& a, const Image2D& b) {
    check_pair(a, b, "ssim");
    return ssim_components_impl(a, b);
}

double ssim(const Image2D& a, const Image2D& b) {
    check_pair(a, b, "ssim");
    return ssim_components_impl(a, b).full;
}

double ms_ssim(const Image2D& a, const Image2D& b, int scales, int* scales_used) {
    check_pair(a, b, "ms_ssim");
    if (scales < 1) throw ArgumentError("ms_ssim: scales must be >= 1");

    static const std::array<double, 5> kWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    if (scales > static_cast<int>(kWeights.size()))
        throw ArgumentError("ms_ssim: at most 5 scales supported");

    // largest feasible count: min dimension >= 11 * 2^(scales-1)
    const std::size_t min_dim = std::min(a.nx, a.nz);
    int feasible = 1;
    while (feasible < scales && min_dim >= static_cast<std::size_t>(kWindow) * (1u << feasible))
        ++feasible;
    const int used = std::min(scales, feasible);
    if (scales_used) *scales_used = used;

    std::array<double, 5> weights{};
    if (used == static_cast<int>(kWeights.size())) {
        weights = kWeights;
    } else {
        double sum = 0.0;
        for (int i = 0; i < used; ++i) sum += kWeights[static_cast<std::size_t>(i)];
        for (int i = 0; i < used; ++i) weights[static_cast<std::size_t>(i)] = kWeights[static_cast<std::size_t>(i)] / sum;
    }

    Image2D cur_a = a, cur_b = b;
    double result = 1.0;
    for (int s = 0; s < used; ++s) {
        const SsimComponents c = ssim_components_impl(cur_a, cur_b);
        // negative component means anticorrelated structure; clamp so the
        // fractional power stays real
        const double cs = std::max(c.contrast_structure, 0.0);
        result *= std::pow(cs, weights[static_cast<std::size_t>(s)]);
        if (s == used - 1) {
            const double l = std::max(c.luminance, 0.0);
            result *= std::pow(l, weights[static_cast<std::size_t>(s)]);
        } else {
            cur_a = mean_pool2(cur_a);
            cur_b = mean_pool2(cur_b);
        }
    }
    return result;
}

MetricReport evaluate_set(const std::vector<std::pair<const Image2D*, const Image2D*>>& pairs) {
    if (pairs.empty()) throw ArgumentError("evaluate_set: empty input");

    MetricReport rep;
    for (const auto& [pa, pb] : pairs) {
        rep.psnr_values.push_back(psnr(*pa, *pb));
        rep.ssim_values.push_back(ssim(*pa, *pb));
        rep.ms_ssim_values.push_back(ms_ssim(*pa, *pb));
    }

    const auto stats = [](const std::vector<double>& v) {
        MetricStats s;
        s.n = v.size();
        if (v.empty()) return s;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        s.mean = mean;
        s.std_dev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        return s;
    };

    std::vector<double> finite_psnr;
    for (double v : rep.psnr_values) {
        if (std::isinf(v))
            ++rep.psnr_infinite_excluded;
        else
            finite_psnr.push_back(v);
    }
    rep.psnr = stats(finite_psnr);
    rep.ssim = stats(rep.ssim_values);
    rep.ms_ssim = stats(rep.ms_ssim_values);
    return rep;
}

}  // namespace vet
