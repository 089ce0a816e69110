#include "civs/png_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "civs/errors.hpp"

#include "json.hpp"

namespace civs {

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& data) {
    put_u32_be(out, uint32_t(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc =
        crc32(0L, out.data() + start, uInt(out.size() - start));
    put_u32_be(out, uint32_t(crc));
}

}  // namespace

void write_png_gray8(const std::string& path, const std::vector<uint8_t>& pixels,
                     int width, int height) {
    if (width < 1 || height < 1)
        throw DimensionError("write_png_gray8: empty image");
    if (pixels.size() != size_t(width) * height)
        throw DimensionError("write_png_gray8: pixel buffer size mismatch");

    // Raw scanlines, each prefixed by filter byte 0.
    std::vector<uint8_t> raw;
    raw.reserve(size_t(height) * (width + 1));
    for (int r = 0; r < height; ++r) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + size_t(r) * width,
                   pixels.begin() + size_t(r + 1) * width);
    }

    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<uint8_t> idat(bound);
    if (compress2(idat.data(), &bound, raw.data(), uLong(raw.size()),
                  Z_BEST_COMPRESSION) != Z_OK)
        throw IoError("write_png_gray8: zlib compression failed");
    idat.resize(bound);

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, uint32_t(width));
    put_u32_be(ihdr, uint32_t(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // adaptive filtering
    ihdr.push_back(0);  // no interlace

    std::vector<uint8_t> file;
    const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    file.insert(file.end(), sig, sig + 8);
    put_chunk(file, "IHDR", ihdr);
    put_chunk(file, "IDAT", idat);
    put_chunk(file, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_png_gray8: cannot open " + path);
    f.write(reinterpret_cast<const char*>(file.data()),
            std::streamsize(file.size()));
    if (!f) throw IoError("write_png_gray8: short write to " + path);
}

std::vector<std::string> export_png_stack(const RealStack& stack,
                                          const std::string& base) {
    double lo = stack.v[0], hi = stack.v[0];
    for (double v : stack.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo;

    std::vector<std::string> paths;
    std::vector<uint8_t> pixels(stack.slice_size());
    for (int s = 0; s < stack.depth; ++s) {
        const double* src = stack.slice(s);
        for (size_t i = 0; i < pixels.size(); ++i) {
            const double t = span > 0 ? (src[i] - lo) / span : 0.0;
            pixels[i] = uint8_t(std::lround(255.0 * std::min(1.0, std::max(0.0, t))));
        }
        char suffix[24];
        std::snprintf(suffix, sizeof suffix, "_s%02d.png", s);
        paths.push_back(base + suffix);
        write_png_gray8(paths.back(), pixels, stack.cols, stack.rows);
    }

    nlohmann::json side;
    side["min"] = lo;
    side["max"] = hi;
    side["dims"] = {{"rows", stack.rows}, {"cols", stack.cols}, {"depth", stack.depth}};
    side["files"] = paths;
    std::ofstream f(base + "_scale.json", std::ios::trunc);
    if (!f) throw IoError("export_png_stack: cannot open " + base + "_scale.json");
    f << side.dump(2) << "\n";
    return paths;
}

}  // namespace civs
