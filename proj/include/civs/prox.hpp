#pragma once

#include "civs/tensor.hpp"

namespace civs {

// Elementwise soft threshold: sign(x) * max(|x| - tau, 0), with sign(0) = +1
// (irrelevant to the value, pinned for bit-reproducibility). tau must be
// >= 0.
RealStack soft_threshold(const RealStack& x, double tau);
double soft_threshold(double x, double tau);

// Isotropic total variation of each slice, summed over slices. Forward
// differences with circular boundary.
double tv_value(const RealStack& x);

struct TvProxOptions {
    int inner_iters = 30;
    double inner_tol = 1e-5;  // max-norm change of the dual field
    double step = 0.248;      // dual ascent step, must stay below 1/4
};

// prox_{weight * TV}(v): argmin_u weight*TV(u) + 0.5*||u - v||^2, solved
// slice by slice with Chambolle's dual projection iteration. weight = 0
// returns v unchanged.
RealStack tv_prox(const RealStack& v, double weight,
                  const TvProxOptions& opts = {});

}  // namespace civs
