// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gammcl/error.hpp"

namespace gammcl::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

// Little-endian binary writer for the snapshot formats.
class BinaryWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    template <typename T>
    void scalar(T v) {
        std::array<char, sizeof(T)> raw{};
        std::memcpy(raw.data(), &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        buf_.insert(buf_.end(), raw.begin(), raw.end());
    }

    void u8(std::uint8_t v) { scalar(v); }
    void u32(std::uint32_t v) { scalar(v); }
    void u64(std::uint64_t v) { scalar(v); }
    void f64(double v) { scalar(v); }

    void f64s(std::span<const double> values) {
        for (double v : values) f64(v);
    }

    [[nodiscard]] const std::vector<char>& buffer() const noexcept { return buf_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + path + " for writing");
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw DataError("write failed for " + path);
    }

private:
    std::vector<char> buf_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::vector<char> data, std::string name = "buffer")
        : data_(std::move(data)), name_(std::move(name)) {}

    static BinaryReader from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open " + path);
        std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return BinaryReader(std::move(data), path);
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    template <typename T>
    T scalar() {
        need(sizeof(T));
        std::array<char, sizeof(T)> raw{};
        std::memcpy(raw.data(), data_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, raw.data(), sizeof(T));
        return v;
    }

    std::uint8_t u8() { return scalar<std::uint8_t>(); }
    std::uint32_t u32() { return scalar<std::uint32_t>(); }
    std::uint64_t u64() { return scalar<std::uint64_t>(); }
    double f64() { return scalar<double>(); }

    std::vector<double> f64s(std::uint64_t n) {
        need(n * sizeof(double));
        std::vector<double> out(n);
        for (auto& v : out) v = f64();
        return out;
    }

    [[nodiscard]] bool at_end() const noexcept { return pos_ == data_.size(); }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw DataError(name_ + ": truncated file");
    }

    std::vector<char> data_;
    std::string name_;
    std::size_t pos_ = 0;
};

// 64-bit FNV-1a, used for config digests.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace gammcl::io
