#include "civs/tensor.hpp"

#include <cmath>

namespace civs {

double dot(const RealStack& a, const RealStack& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a.v[i] * b.v[i];
    return acc;
}

double norm2_sq(const RealStack& a) {
    double acc = 0.0;
    for (double x : a.v) acc += x * x;
    return acc;
}

double norm2(const RealStack& a) { return std::sqrt(norm2_sq(a)); }

double max_abs(const RealStack& a) {
    double m = 0.0;
    for (double x : a.v) m = std::max(m, std::abs(x));
    return m;
}

RealStack add_scaled(const RealStack& a, double alpha, const RealStack& b) {
    require_same_shape(a, b, "add_scaled");
    RealStack r = a;
    for (size_t i = 0; i < r.size(); ++i) r.v[i] += alpha * b.v[i];
    return r;
}

void scale_inplace(RealStack& a, double alpha) {
    for (double& x : a.v) x *= alpha;
}

void add_scaled_inplace(RealStack& a, double alpha, const RealStack& b) {
    require_same_shape(a, b, "add_scaled_inplace");
    for (size_t i = 0; i < a.size(); ++i) a.v[i] += alpha * b.v[i];
}

bool all_finite(const RealStack& a) {
    for (double x : a.v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace civs
