#include "civs/metrics.hpp"

#include <cmath>
#include <limits>

#include "civs/errors.hpp"
#include "civs/threading.hpp"

#include "json.hpp"

namespace civs {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

double resolve_peak(const RealStack& ref, double peak) {
    if (peak <= 0.0) {
        for (double v : ref.v) peak = std::max(peak, v);
    }
    if (peak <= 0.0)
        throw InvalidArgument("metrics: peak must be positive (reference has "
                              "no positive entries to default from)");
    return peak;
}

double mse_range(const double* a, const double* b, size_t count) {
    double acc = 0.0;
    for (size_t i = 0; i < count; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / double(count);
}

double psnr_from_mse(double mse, double peak) {
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

// Normalized 1D Gaussian taps; the 2D window is their outer product.
std::vector<double> gaussian_taps() {
    std::vector<double> g(kWin);
    const double c = (kWin - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        g[i] = std::exp(-(i - c) * (i - c) / (2.0 * kWinSigma * kWinSigma));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Valid-mode separable filtering: horizontal pass into rows x (cols-10),
// vertical pass into (rows-10) x (cols-10).
void valid_filter(const std::vector<double>& img, int rows, int cols,
                  const std::vector<double>& taps, std::vector<double>& tmp,
                  std::vector<double>& out) {
    const int oc = cols - kWin + 1;
    const int orows = rows - kWin + 1;
    tmp.assign(size_t(rows) * oc, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < oc; ++c) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k)
                acc += taps[k] * img[size_t(r) * cols + c + k];
            tmp[size_t(r) * oc + c] = acc;
        }
    out.assign(size_t(orows) * oc, 0.0);
    for (int r = 0; r < orows; ++r)
        for (int c = 0; c < oc; ++c) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k)
                acc += taps[k] * tmp[size_t(r + k) * oc + c];
            out[size_t(r) * oc + c] = acc;
        }
}

}  // namespace

double psnr(const RealStack& ref, const RealStack& est, double peak) {
    require_same_shape(ref, est, "psnr");
    peak = resolve_peak(ref, peak);
    return psnr_from_mse(mse_range(ref.v.data(), est.v.data(), ref.size()), peak);
}

double ssim_slice(const double* ref, const double* est, int rows, int cols,
                  double peak) {
    if (rows < kWin || cols < kWin)
        throw DimensionError("ssim: slices must be at least 11x11");
    if (peak <= 0.0) throw InvalidArgument("ssim: peak must be positive");

    const size_t count = size_t(rows) * cols;
    std::vector<double> x(count), y(count), xx(count), yy(count), xy(count);
    for (size_t i = 0; i < count; ++i) {
        x[i] = ref[i] / peak;
        y[i] = est[i] / peak;
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }

    const std::vector<double> taps = gaussian_taps();
    std::vector<double> tmp, mu_x, mu_y, m_xx, m_yy, m_xy;
    valid_filter(x, rows, cols, taps, tmp, mu_x);
    valid_filter(y, rows, cols, taps, tmp, mu_y);
    valid_filter(xx, rows, cols, taps, tmp, m_xx);
    valid_filter(yy, rows, cols, taps, tmp, m_yy);
    valid_filter(xy, rows, cols, taps, tmp, m_xy);

    const double c1 = kK1 * kK1;  // dynamic range is 1 after rescaling
    const double c2 = kK2 * kK2;
    double acc = 0.0;
    for (size_t i = 0; i < mu_x.size(); ++i) {
        const double vx = m_xx[i] - mu_x[i] * mu_x[i];
        const double vy = m_yy[i] - mu_y[i] * mu_y[i];
        const double cxy = m_xy[i] - mu_x[i] * mu_y[i];
        acc += (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cxy + c2) /
               ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (vx + vy + c2));
    }
    return acc / double(mu_x.size());
}

double ssim(const RealStack& ref, const RealStack& est, double peak) {
    require_same_shape(ref, est, "ssim");
    peak = resolve_peak(ref, peak);
    std::vector<double> per_slice(ref.depth);
    parallel_for(ref.depth, [&](int s) {
        per_slice[s] = ssim_slice(ref.slice(s), est.slice(s), ref.rows, ref.cols, peak);
    });
    double acc = 0.0;
    for (double v : per_slice) acc += v;
    return acc / double(ref.depth);
}

double sam_degrees(const RealStack& ref, const RealStack& est) {
    require_same_shape(ref, est, "sam");
    const int n2 = ref.rows * ref.cols;
    const size_t plane = size_t(n2);
    double acc = 0.0;
    long kept = 0;
    for (int p = 0; p < n2; ++p) {
        double aa = 0.0, bb = 0.0, ab = 0.0;
        for (int s = 0; s < ref.depth; ++s) {
            const double a = ref.v[size_t(s) * plane + p];
            const double b = est.v[size_t(s) * plane + p];
            aa += a * a;
            bb += b * b;
            ab += a * b;
        }
        if (std::sqrt(aa) <= 1e-12 || std::sqrt(bb) <= 1e-12) continue;
        // Clamp on the squared scale so identical vectors give exactly 0.
        if (ab * ab >= aa * bb) {
            acc += ab >= 0.0 ? 0.0 : kPi;
        } else {
            acc += std::acos(ab / std::sqrt(aa * bb));
        }
        ++kept;
    }
    if (kept == 0)
        throw DegenerateSignalError(
            "sam: every pixel has a near-zero spectral vector");
    return acc / double(kept) * (180.0 / kPi);
}

MetricReport score_stacks(const RealStack& ref, const RealStack& est, double peak) {
    require_same_shape(ref, est, "score_stacks");
    peak = resolve_peak(ref, peak);

    MetricReport rep;
    rep.rows = ref.rows;
    rep.cols = ref.cols;
    rep.depth = ref.depth;
    rep.peak = peak;

    const size_t plane = size_t(ref.rows) * ref.cols;
    rep.psnr_slices.resize(ref.depth);
    for (int s = 0; s < ref.depth; ++s)
        rep.psnr_slices[s] =
            psnr_from_mse(mse_range(ref.slice(s), est.slice(s), plane), peak);
    rep.psnr_db = psnr(ref, est, peak);

    rep.ssim_slices.resize(ref.depth);
    parallel_for(ref.depth, [&](int s) {
        rep.ssim_slices[s] =
            ssim_slice(ref.slice(s), est.slice(s), ref.rows, ref.cols, peak);
    });
    double acc = 0.0;
    for (double v : rep.ssim_slices) acc += v;
    rep.ssim_mean = acc / double(ref.depth);

    rep.sam = sam_degrees(ref, est);
    return rep;
}

namespace {

nlohmann::json db_value(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

nlohmann::json db_array(const std::vector<double>& vs) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : vs) arr.push_back(db_value(v));
    return arr;
}

}  // namespace

std::string metric_report_json(const MetricReport& report) {
    nlohmann::json j;
    j["dims"] = {{"rows", report.rows}, {"cols", report.cols}, {"depth", report.depth}};
    j["peak"] = report.peak;
    j["psnr_db"] = {{"per_slice", db_array(report.psnr_slices)},
                    {"mean", db_value(report.psnr_db)}};
    j["ssim"] = {{"per_slice", db_array(report.ssim_slices)},
                 {"mean", db_value(report.ssim_mean)}};
    j["sam_degrees"] = db_value(report.sam);
    return j.dump(2);
}

}  // namespace civs
