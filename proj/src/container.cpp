#include "civs/container.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

namespace civs {

namespace {

constexpr char kMagic[4] = {'C', 'I', 'V', 'S'};
constexpr uint8_t kVersion = 1;

void put_u32_le(std::string& out, uint32_t x) {
    out.push_back(static_cast<char>(x & 0xff));
    out.push_back(static_cast<char>((x >> 8) & 0xff));
    out.push_back(static_cast<char>((x >> 16) & 0xff));
    out.push_back(static_cast<char>((x >> 24) & 0xff));
}

void put_f64_le(std::string& out, double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
           (uint32_t(p[3]) << 24);
}

double get_f64_le(const unsigned char* p) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= uint64_t(p[i]) << (8 * i);
    double x;
    std::memcpy(&x, &bits, sizeof x);
    return x;
}

}  // namespace

void write_container(const std::string& path, const RealStack& stack,
                     const std::string& metadata_json) {
    if (stack.rows < 1 || stack.cols < 1 || stack.depth < 1 ||
        stack.v.size() != stack.size())
        throw DimensionError("write_container: malformed stack");
    for (double x : stack.v)
        if (!std::isfinite(x))
            throw NonFiniteError("write_container: non-finite value in payload (" +
                                 path + ")");

    std::string buf;
    buf.reserve(17 + stack.size() * 8 + metadata_json.size() + 4);
    buf.append(kMagic, 4);
    buf.push_back(static_cast<char>(kVersion));
    put_u32_le(buf, static_cast<uint32_t>(stack.rows));
    put_u32_le(buf, static_cast<uint32_t>(stack.cols));
    put_u32_le(buf, static_cast<uint32_t>(stack.depth));
    for (double x : stack.v) put_f64_le(buf, x);
    if (!metadata_json.empty()) {
        put_u32_le(buf, static_cast<uint32_t>(metadata_json.size()));
        buf.append(metadata_json);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_container: cannot open " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("write_container: short write to " + path);
}

RealStack read_container(const std::string& path, std::string* metadata_json) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_container: cannot open " + path);
    std::string raw((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    const size_t n = raw.size();

    // a short file whose bytes are still consistent with the magic is a
    // truncation, not a foreign format
    if (std::memcmp(p, kMagic, std::min<size_t>(n, 4)) != 0)
        throw BadMagicError("read_container: bad magic in " + path);
    if (n < 17) throw TruncatedError("read_container: truncated header in " + path);
    if (p[4] != kVersion)
        throw IoError("read_container: unsupported format version in " + path);

    const uint32_t rows = get_u32_le(p + 5);
    const uint32_t cols = get_u32_le(p + 9);
    const uint32_t depth = get_u32_le(p + 13);
    if (rows < 1 || cols < 1 || depth < 1)
        throw IoError("read_container: zero dimension in " + path);

    const uint64_t count = uint64_t(rows) * cols * depth;
    size_t off = 17;
    if (n < off + count * 8)
        throw TruncatedError("read_container: truncated payload in " + path);

    RealStack stack(static_cast<int>(rows), static_cast<int>(cols),
                    static_cast<int>(depth));
    for (uint64_t i = 0; i < count; ++i) {
        stack.v[i] = get_f64_le(p + off);
        off += 8;
        if (!std::isfinite(stack.v[i]))
            throw NonFiniteError("read_container: non-finite value in " + path);
    }

    std::string meta;
    if (off < n) {
        if (n < off + 4)
            throw TruncatedError("read_container: truncated metadata length in " + path);
        const uint32_t len = get_u32_le(p + off);
        off += 4;
        if (n < off + len)
            throw TruncatedError("read_container: truncated metadata in " + path);
        meta.assign(raw, off, len);
        off += len;
        if (off != n)
            throw IoError("read_container: trailing bytes after metadata in " + path);
    }
    if (metadata_json) *metadata_json = meta;
    return stack;
}

}  // namespace civs
