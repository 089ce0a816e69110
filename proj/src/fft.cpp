#include "civs/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "civs/threading.hpp"

namespace civs {

namespace {

enum class Kind { Slice2D, Depth1D, Full3D };

// FFTW planning is not thread safe; executing a plan on fresh buffers is.
// Plans are created once per shape with FFTW_ESTIMATE (deterministic plan
// choice, unlike the timing-based planners) and FFTW_UNALIGNED so they can
// run in place on ordinary vector storage.
class PlanCache {
  public:
    fftw_plan get(Kind kind, int sign, int rows, int cols, int depth) {
        const auto key = std::make_tuple(kind, sign, rows, cols, depth);
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;

        // A scratch buffer only for plan creation; execution happens on the
        // caller's arrays via fftw_execute_dft.
        size_t n = static_cast<size_t>(rows) * cols * (kind == Kind::Slice2D ? 1 : depth);
        fftw_complex* buf = fftw_alloc_complex(n);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan plan = nullptr;
        switch (kind) {
            case Kind::Slice2D:
                plan = fftw_plan_dft_2d(rows, cols, buf, buf, sign, flags);
                break;
            case Kind::Depth1D: {
                // One transform of length `depth` per pixel; pixels are
                // contiguous within a slice, slices are rows*cols apart.
                int len = depth;
                plan = fftw_plan_many_dft(1, &len, rows * cols,
                                          buf, nullptr, rows * cols, 1,
                                          buf, nullptr, rows * cols, 1,
                                          sign, flags);
                break;
            }
            case Kind::Full3D:
                // FFTW's first dimension varies slowest; our layout is
                // (slice, row, col) with col fastest.
                plan = fftw_plan_dft_3d(depth, rows, cols, buf, buf, sign, flags);
                break;
        }
        fftw_free(buf);
        if (!plan) throw Error("fft: plan creation failed");
        cache_.emplace(key, plan);
        return plan;
    }

  private:
    std::mutex mu_;
    std::map<std::tuple<Kind, int, int, int, int>, fftw_plan> cache_;
};

PlanCache& plans() {
    static PlanCache cache;
    return cache;
}

fftw_complex* as_fftw(std::complex<double>* p) {
    return reinterpret_cast<fftw_complex*>(p);
}

ComplexStack to_complex(const RealStack& x) {
    ComplexStack out(x.rows, x.cols, x.depth);
    for (size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i];
    return out;
}

void require_square(const ComplexStack& x, const char* what) {
    if (!x.square())
        throw DimensionError(std::string(what) + ": slices must be square");
}

// In-place transform of every slice (Slice2D) or of the whole volume.
void run(ComplexStack& x, Kind kind, int sign, double scale) {
    if (kind == Kind::Slice2D) {
        fftw_plan plan = plans().get(kind, sign, x.rows, x.cols, 1);
        parallel_for(x.depth, [&](int64_t s) {
            fftw_complex* p = as_fftw(x.slice(static_cast<int>(s)));
            fftw_execute_dft(plan, p, p);
        });
    } else {
        fftw_plan plan = plans().get(kind, sign, x.rows, x.cols, x.depth);
        fftw_execute_dft(plan, as_fftw(x.data()), as_fftw(x.data()));
    }
    for (auto& z : x.v) z *= scale;
}

RealStack take_real_checked(const ComplexStack& x, double rel_tol, const char* what) {
    double max_re = 0.0, max_im = 0.0;
    for (const auto& z : x.v) {
        max_re = std::max(max_re, std::abs(z.real()));
        max_im = std::max(max_im, std::abs(z.imag()));
    }
    if (max_im > rel_tol * max_re + 1e-12)
        throw NumericError(std::string(what) +
                           ": imaginary residue exceeds tolerance; spectrum is not "
                           "Hermitian-symmetric");
    RealStack out(x.rows, x.cols, x.depth);
    for (size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i].real();
    return out;
}

}  // namespace

ComplexStack fft2(const ComplexStack& x) {
    require_square(x, "fft2");
    ComplexStack out = x;
    run(out, Kind::Slice2D, FFTW_FORWARD, 1.0 / std::sqrt(double(x.rows) * x.cols));
    return out;
}

ComplexStack fft2(const RealStack& x) { return fft2(to_complex(x)); }

ComplexStack ifft2(const ComplexStack& x) {
    require_square(x, "ifft2");
    ComplexStack out = x;
    run(out, Kind::Slice2D, FFTW_BACKWARD, 1.0 / std::sqrt(double(x.rows) * x.cols));
    return out;
}

ComplexStack fft1_depth(const ComplexStack& x) {
    ComplexStack out = x;
    run(out, Kind::Depth1D, FFTW_FORWARD, 1.0 / std::sqrt(double(x.depth)));
    return out;
}

ComplexStack fft1_depth(const RealStack& x) { return fft1_depth(to_complex(x)); }

ComplexStack ifft1_depth(const ComplexStack& x) {
    ComplexStack out = x;
    run(out, Kind::Depth1D, FFTW_BACKWARD, 1.0 / std::sqrt(double(x.depth)));
    return out;
}

ComplexStack fft3(const ComplexStack& x) {
    require_square(x, "fft3");
    ComplexStack out = x;
    run(out, Kind::Full3D, FFTW_FORWARD,
        1.0 / std::sqrt(double(x.rows) * x.cols * x.depth));
    return out;
}

ComplexStack fft3(const RealStack& x) { return fft3(to_complex(x)); }

ComplexStack ifft3(const ComplexStack& x) {
    require_square(x, "ifft3");
    ComplexStack out = x;
    run(out, Kind::Full3D, FFTW_BACKWARD,
        1.0 / std::sqrt(double(x.rows) * x.cols * x.depth));
    return out;
}

RealStack ifft2_real(const ComplexStack& x, double rel_tol) {
    return take_real_checked(ifft2(x), rel_tol, "ifft2_real");
}

RealStack ifft3_real(const ComplexStack& x, double rel_tol) {
    return take_real_checked(ifft3(x), rel_tol, "ifft3_real");
}

}  // namespace civs
