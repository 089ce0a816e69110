#include "civs/prox.hpp"

#include <cmath>
#include <vector>

namespace civs {

double soft_threshold(double x, double tau) {
    if (tau < 0.0) throw InvalidArgument("soft_threshold: tau must be >= 0");
    const double mag = std::abs(x) - tau;
    if (mag <= 0.0) return 0.0;
    return x >= 0.0 ? mag : -mag;  // sign(0) = +1 falls in the first branch
}

RealStack soft_threshold(const RealStack& x, double tau) {
    if (tau < 0.0) throw InvalidArgument("soft_threshold: tau must be >= 0");
    RealStack out = x;
    for (double& v : out.v) v = soft_threshold(v, tau);
    return out;
}

namespace {

// Forward differences with circular boundary on one n x n slice.
// g1 = u(r+1,c) - u(r,c), g2 = u(r,c+1) - u(r,c).
void grad2(const double* u, int n, double* g1, double* g2) {
    for (int r = 0; r < n; ++r) {
        const int rn = (r + 1 == n) ? 0 : r + 1;
        for (int c = 0; c < n; ++c) {
            const int cn = (c + 1 == n) ? 0 : c + 1;
            g1[r * n + c] = u[rn * n + c] - u[r * n + c];
            g2[r * n + c] = u[r * n + cn] - u[r * n + c];
        }
    }
}

// Negative adjoint of grad2: div(p)(r,c) = p1(r,c) - p1(r-1,c)
//                                        + p2(r,c) - p2(r,c-1).
void div2(const double* p1, const double* p2, int n, double* out) {
    for (int r = 0; r < n; ++r) {
        const int rp = (r == 0) ? n - 1 : r - 1;
        for (int c = 0; c < n; ++c) {
            const int cp = (c == 0) ? n - 1 : c - 1;
            out[r * n + c] = p1[r * n + c] - p1[rp * n + c] +
                             p2[r * n + c] - p2[r * n + cp];
        }
    }
}

void tv_prox_slice(const double* v, int n, double weight,
                   const TvProxOptions& opts, double* out) {
    const size_t m = size_t(n) * n;
    std::vector<double> p1(m, 0.0), p2(m, 0.0);
    std::vector<double> dv(m), g1(m), g2(m);

    for (int it = 0; it < opts.inner_iters; ++it) {
        // dv = div(p) - v/weight, then one projected ascent step on p.
        div2(p1.data(), p2.data(), n, dv.data());
        for (size_t i = 0; i < m; ++i) dv[i] -= v[i] / weight;
        grad2(dv.data(), n, g1.data(), g2.data());

        double delta = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const double q1 = p1[i] + opts.step * g1[i];
            const double q2 = p2[i] + opts.step * g2[i];
            const double denom =
                1.0 + opts.step * std::sqrt(g1[i] * g1[i] + g2[i] * g2[i]);
            const double n1 = q1 / denom;
            const double n2 = q2 / denom;
            delta = std::max(delta, std::max(std::abs(n1 - p1[i]),
                                             std::abs(n2 - p2[i])));
            p1[i] = n1;
            p2[i] = n2;
        }
        if (delta < opts.inner_tol) break;
    }

    div2(p1.data(), p2.data(), n, dv.data());
    for (size_t i = 0; i < m; ++i) out[i] = v[i] - weight * dv[i];
}

}  // namespace

double tv_value(const RealStack& x) {
    if (!x.square()) throw DimensionError("tv_value: slices must be square");
    const int n = x.rows;
    const size_t m = size_t(n) * n;
    std::vector<double> g1(m), g2(m);
    double acc = 0.0;
    for (int s = 0; s < x.depth; ++s) {
        grad2(x.slice(s), n, g1.data(), g2.data());
        for (size_t i = 0; i < m; ++i)
            acc += std::sqrt(g1[i] * g1[i] + g2[i] * g2[i]);
    }
    return acc;
}

RealStack tv_prox(const RealStack& v, double weight, const TvProxOptions& opts) {
    if (weight < 0.0) throw InvalidArgument("tv_prox: weight must be >= 0");
    if (!v.square()) throw DimensionError("tv_prox: slices must be square");
    if (opts.step <= 0.0 || opts.step > 0.25)
        throw InvalidArgument("tv_prox: dual step must lie in (0, 0.25]");
    if (weight == 0.0) return v;
    RealStack out = v;
    for (int s = 0; s < v.depth; ++s)
        tv_prox_slice(v.slice(s), v.rows, weight, opts, out.slice(s));
    return out;
}

}  // namespace civs
