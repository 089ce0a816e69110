#pragma once

#include <string>

#include "civs/tensor.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Stack container file format
//
//   bytes 0..3   magic "CIVS"
//   byte  4      format version, currently 1
//   bytes 5..16  dims (rows, cols, depth) as unsigned 32-bit little-endian
//   payload      rows*cols*depth float64 little-endian values, slice-major
//                with row-major slices (identical to RealStack memory order)
//   optional     metadata: unsigned 32-bit little-endian byte length followed
//                by that many bytes of UTF-8 JSON, preserved verbatim
//
// Doubles are written bit-for-bit, so write/read round-trips are exact.
// Payloads containing NaN or infinities are rejected on read and write.
// ---------------------------------------------------------------------------

void write_container(const std::string& path, const RealStack& stack,
                     const std::string& metadata_json = "");

// Reads the stack; if metadata_json is non-null it receives the verbatim
// metadata payload ("" when the file carries none).
RealStack read_container(const std::string& path,
                         std::string* metadata_json = nullptr);

}  // namespace civs
