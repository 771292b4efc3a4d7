#pragma once
// Internal little-endian binary IO helpers shared by the checkpoint and
// trace readers/writers.  Not installed.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>

#include "evfl/error.hpp"

namespace evfl::binio {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

inline File open_read(const std::string& path, const char* what) {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError(std::string(what) + ": cannot open " + path);
    return f;
}

inline File open_write(const std::string& path, const char* what) {
    File f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError(std::string(what) + ": cannot open " + path + " for writing");
    return f;
}

inline void put_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xff);
    if (std::fwrite(b, 1, 4, f) != 4) throw IoError("short write");
}

inline std::uint32_t get_u32(std::FILE* f, const char* what) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4)
        throw FormatError(std::string(what) + ": truncated header");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
}

inline void put_u64(std::FILE* f, std::uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xff);
    if (std::fwrite(b, 1, 8, f) != 8) throw IoError("short write");
}

inline std::uint64_t get_u64(std::FILE* f, const char* what) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8)
        throw FormatError(std::string(what) + ": truncated header");
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return v;
}

inline void put_f64(std::FILE* f, const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t u;
        std::memcpy(&u, &p[i], 8);
        put_u64(f, u);
    }
}

inline void get_f64(std::FILE* f, double* p, std::size_t n, const char* what) {
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char b[8];
        if (std::fread(b, 1, 8, f) != 8)
            throw FormatError(std::string(what) + ": truncated payload");
        std::uint64_t u = 0;
        for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(b[k]) << (8 * k);
        std::memcpy(&p[i], &u, 8);
    }
}

} // namespace evfl::binio
