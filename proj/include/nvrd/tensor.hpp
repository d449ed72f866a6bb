#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include <zlib.h>

#include "nvrd/errors.hpp"

namespace nvrd {

// Dense row-major tensor of doubles. The last axis is fastest. Image-like
// data uses (H, W, C), clips use (T, H, W, C), series use (T, V).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        require_shape(data_.size() == count(shape_), "tensor data size does not match shape");
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i) { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    double at(std::size_t i) const { return data_[i]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    Tensor reshaped(std::vector<std::size_t> shape) const {
        require_shape(count(shape) == data_.size(), "reshape changes element count");
        return Tensor(std::move(shape), data_);
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Blob format: magic "NVRD1\0", then little-endian u32 rank, rank u32 dims,
// u8 dtype (0 = float32), then the row-major payload.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t f32_bits(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
}

inline float bits_f32(std::uint32_t u) {
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

}  // namespace detail

inline constexpr char kBlobMagic[6] = {'N', 'V', 'R', 'D', '1', '\0'};

inline std::string encode_blob(const Tensor& t) {
    std::string out;
    out.reserve(6 + 4 + 4 * t.rank() + 1 + 4 * t.numel());
    out.append(kBlobMagic, 6);
    detail::put_u32_le(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::put_u32_le(out, static_cast<std::uint32_t>(d));
    out.push_back('\0');  // dtype 0: float32
    for (std::size_t i = 0; i < t.numel(); ++i) {
        detail::put_u32_le(out, detail::f32_bits(static_cast<float>(t[i])));
    }
    return out;
}

inline Tensor decode_blob(const std::string& bytes) {
    if (bytes.size() < 11 || std::memcmp(bytes.data(), kBlobMagic, 6) != 0) {
        throw io_error("not a tensor blob (bad magic)");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::size_t off = 6;
    std::uint32_t rank = detail::get_u32_le(p + off);
    off += 4;
    if (rank > 8) throw io_error("tensor blob rank out of range");
    if (bytes.size() < off + 4 * rank + 1) throw io_error("tensor blob truncated header");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape[i] = detail::get_u32_le(p + off);
        off += 4;
        n *= shape[i];
    }
    unsigned char dtype = p[off++];
    if (dtype != 0) throw io_error("unsupported tensor blob dtype");
    if (bytes.size() != off + 4 * n) throw io_error("tensor blob payload size mismatch");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        data[i] = static_cast<double>(detail::bits_f32(detail::get_u32_le(p + off + 4 * i)));
    }
    return Tensor(std::move(shape), std::move(data));
}

inline void write_blob(const std::filesystem::path& path, const Tensor& t) {
    std::string bytes = encode_blob(t);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw io_error("short write: " + path.string());
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

inline Tensor read_blob(const std::filesystem::path& path) {
    return decode_blob(read_file_bytes(path));
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw io_error("short write: " + path.string());
}

inline std::uint32_t crc32_of(const std::string& bytes) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

inline std::uint32_t file_crc32(const std::filesystem::path& path) {
    return crc32_of(read_file_bytes(path));
}

}  // namespace nvrd
