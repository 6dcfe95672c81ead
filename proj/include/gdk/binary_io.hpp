#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdk {

struct ParseError : std::runtime_error {
    size_t offset;
    ParseError(const std::string& what, size_t off)
        : std::runtime_error(what + " at byte offset " + std::to_string(off)), offset(off) {}
};

// All container formats are little-endian with explicit byte packing.
class ByteWriter {
  public:
    void magic(const char tag[4]) { buf_.insert(buf_.end(), tag, tag + 4); }

    void u32(uint32_t x) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(x >> (8 * i)));
    }

    void u64(uint64_t x) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(x >> (8 * i)));
    }

    void u8(uint8_t x) { buf_.push_back(x); }

    void f32(float x) {
        uint32_t bits;
        std::memcpy(&bits, &x, 4);
        u32(bits);
    }

    void f32_plane(const std::vector<double>& vals) {
        for (double v : vals) f32(static_cast<float>(v));
    }

    void mask_bits(const std::vector<uint8_t>& mask) {
        // packed LSB-first
        uint8_t byte = 0;
        int filled = 0;
        for (uint8_t m : mask) {
            if (m) byte |= static_cast<uint8_t>(1u << filled);
            if (++filled == 8) {
                buf_.push_back(byte);
                byte = 0;
                filled = 0;
            }
        }
        if (filled > 0) buf_.push_back(byte);
    }

    const std::vector<uint8_t>& bytes() const { return buf_; }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }

  private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::vector<uint8_t> data, std::string context)
        : buf_(std::move(data)), context_(std::move(context)) {}

    static ByteReader from_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open: " + path.string());
        std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(data), path.filename().string());
    }

    void expect_magic(const char tag[4]) {
        need(4, std::string("magic '") + std::string(tag, 4) + "'");
        if (std::memcmp(buf_.data() + pos_, tag, 4) != 0) {
            throw ParseError(context_ + ": bad magic, expected '" + std::string(tag, 4) + "'", pos_);
        }
        pos_ += 4;
    }

    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return x;
    }

    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t x = 0;
        for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return x;
    }

    uint8_t u8(const char* what) {
        need(1, what);
        return buf_[pos_++];
    }

    std::vector<double> f32_plane(size_t count, const char* what) {
        need(count * 4, what);
        std::vector<double> vals(count);
        for (size_t i = 0; i < count; ++i) {
            uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<uint32_t>(buf_[pos_ + i * 4 + b]) << (8 * b);
            float f;
            std::memcpy(&f, &bits, 4);
            vals[i] = static_cast<double>(f);
        }
        pos_ += count * 4;
        return vals;
    }

    std::vector<uint8_t> mask_bits(size_t count, const char* what) {
        size_t nbytes = (count + 7) / 8;
        need(nbytes, what);
        std::vector<uint8_t> mask(count);
        for (size_t i = 0; i < count; ++i) {
            mask[i] = (buf_[pos_ + i / 8] >> (i % 8)) & 1u;
        }
        pos_ += nbytes;
        return mask;
    }

    void expect_end() {
        if (pos_ != buf_.size()) {
            throw ParseError(context_ + ": trailing bytes after payload", pos_);
        }
    }

    size_t offset() const { return pos_; }

  private:
    void need(size_t n, const std::string& what) {
        if (pos_ + n > buf_.size()) {
            throw ParseError(context_ + ": truncated reading " + what, pos_);
        }
    }

    std::vector<uint8_t> buf_;
    std::string context_;
    size_t pos_ = 0;
};

}  // namespace gdk
