#ifndef VET_METRICS_HPP
#define VET_METRICS_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "vet/volume.hpp"

namespace vet {

// 10*log10(1/MSE) with MAX=1; identical images return +infinity.
double psnr(const Image2D& a, const Image2D& b);

// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5, truncated and
// renormalized to sum 1), K1=0.01, K2=0.03, L=1, evaluated where the window
// fully fits.
double ssim(const Image2D& a, const Image2D& b);

// Mean luminance and contrast-structure components per scale; the building
// block of ms_ssim, exposed for the metric's compositional checks.
struct SsimComponents {
    double luminance = 0.0;
    double contrast_structure = 0.0;
    double full = 0.0;
};
SsimComponents ssim_components(const Image2D& a, const Image2D& b);

// Product over scales of contrast-structure means (luminance joins at the
// coarsest scale), standard exponents, 2x2 mean-pool downsampling. When the
// images are too small for the requested scale count it drops to the largest
// feasible count (min dimension >= 11*2^(scales-1)); scales_used reports the
// actual count.
double ms_ssim(const Image2D& a, const Image2D& b, int scales = 5, int* scales_used = nullptr);

struct MetricStats {
    double mean = 0.0;
    double std_dev = 0.0;
    std::size_t n = 0;
};

struct MetricReport {
    MetricStats psnr;
    MetricStats ssim;
    MetricStats ms_ssim;
    std::vector<double> psnr_values;  // per image, +inf kept in place
    std::vector<double> ssim_values;
    std::vector<double> ms_ssim_values;
    std::size_t psnr_infinite_excluded = 0;  // identical pairs left out of the mean
};

// Per-image metrics then mean and sample standard deviation (n-1 denominator,
// 0 when n=1). Infinite PSNR values are excluded from the PSNR statistics.
MetricReport evaluate_set(const std::vector<std::pair<const Image2D*, const Image2D*>>& pairs);

}  // namespace vet

#endif
