#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "civs/tensor.hpp"

namespace civs {

// Minimal 8-bit grayscale PNG writer (one IDAT chunk, filter 0 scanlines).
void write_png_gray8(const std::string& path, const std::vector<uint8_t>& pixels,
                     int width, int height);

// Writes one PNG per slice as <base>_sNN.png, mapping values linearly from
// the stack's [min, max] onto 0..255 (a constant stack maps to 0), and a
// sidecar <base>_scale.json recording {min, max, dims, files} so the mapping
// stays invertible up to quantization. Returns the PNG paths in slice order.
// Inspection output only; containers remain the authoritative format.
std::vector<std::string> export_png_stack(const RealStack& stack,
                                          const std::string& base);

}  // namespace civs
