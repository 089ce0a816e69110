#pragma once

#include <string>
#include <vector>

#include "civs/tensor.hpp"

namespace civs {

// Reconstruction quality metrics. `peak` <= 0 selects the maximum of the
// reference stack; an explicit positive value overrides it (the value must
// end up > 0 either way).

// 10 log10(peak^2 / MSE) with the MSE pooled over all voxels. An exact
// match returns +infinity, which the JSON writer serializes as "inf".
double psnr(const RealStack& ref, const RealStack& est, double peak = 0.0);

// Mean local SSIM over one slice pair: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, both inputs divided by peak so the dynamic range
// is 1. Only window positions fully inside the slice contribute, so slices
// must be at least 11x11.
double ssim_slice(const double* ref, const double* est, int rows, int cols,
                  double peak);

// Per-slice SSIM averaged across the stack.
double ssim(const RealStack& ref, const RealStack& est, double peak = 0.0);

// Mean angle, in degrees, between the depth-direction spectral vectors of
// the two stacks, taken over pixels where both vectors have norm > 1e-12.
// Throws DegenerateSignalError when every pixel is skipped.
double sam_degrees(const RealStack& ref, const RealStack& est);

struct MetricReport {
    int rows = 0, cols = 0, depth = 0;
    double peak = 0.0;
    std::vector<double> psnr_slices;  // per slice, shared peak
    double psnr_db = 0.0;             // pooled over all voxels
    std::vector<double> ssim_slices;
    double ssim_mean = 0.0;
    double sam = 0.0;  // degrees
};

MetricReport score_stacks(const RealStack& ref, const RealStack& est,
                          double peak = 0.0);

// Infinities become the string "inf" so the document stays valid JSON.
std::string metric_report_json(const MetricReport& report);

}  // namespace civs
