#pragma once

#include <cstdint>

#include "civs/tensor.hpp"

namespace civs {

// Synthetic piecewise-smooth test stack: a smooth background plus a handful
// of constant-intensity ellipses and rectangles painted in depth order, each
// modulated across slices by its own smooth positive spectral curve. All
// slices share the spatial structure, so the stack exercises both spatial
// priors and the spectral-angle metric. Values land in (0, 1] with max 1.
RealStack make_phantom(int n, int s, uint64_t seed, int shapes = 6);

}  // namespace civs
