#pragma once

#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <zlib.h>

#include "nvrd/errors.hpp"
#include "nvrd/tensor.hpp"

namespace nvrd {

// Minimal PNG and PPM support for report images and image-directory
// ingestion. Images are (H,W,3) tensors with values in [0,1]. PNG reading
// handles 8-bit non-interlaced grayscale, gray+alpha, RGB and RGBA with all
// five scanline filters; alpha is dropped.

namespace img_detail {

inline void put_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

inline std::uint32_t get_u32_be(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    put_u32_be(out, crc);
}

inline unsigned char paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<unsigned char>(a);
    if (pb <= pc) return static_cast<unsigned char>(b);
    return static_cast<unsigned char>(c);
}

inline unsigned char to_byte(double v) {
    double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<unsigned char>(c * 255.0 + 0.5);
}

}  // namespace img_detail

inline std::string encode_png(const Tensor& image) {
    require_shape(image.rank() == 3 && image.dim(2) == 3, "encode_png expects (H,W,3)");
    std::size_t H = image.dim(0), W = image.dim(1);
    std::string raw;
    raw.reserve(H * (1 + W * 3));
    for (std::size_t h = 0; h < H; ++h) {
        raw.push_back('\0');  // filter: none
        for (std::size_t w = 0; w < W; ++w)
            for (std::size_t c = 0; c < 3; ++c)
                raw.push_back(static_cast<char>(img_detail::to_byte(image.at(h, w, c))));
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::string comp(comp_len, '\0');
    if (compress2(reinterpret_cast<Bytef*>(comp.data()), &comp_len,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  6) != Z_OK) {
        throw io_error("png deflate failed");
    }
    comp.resize(comp_len);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    img_detail::put_u32_be(ihdr, static_cast<std::uint32_t>(W));
    img_detail::put_u32_be(ihdr, static_cast<std::uint32_t>(H));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: RGB
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace
    img_detail::append_chunk(out, "IHDR", ihdr);
    img_detail::append_chunk(out, "IDAT", comp);
    img_detail::append_chunk(out, "IEND", "");
    return out;
}

inline void write_png(const std::filesystem::path& path, const Tensor& image) {
    write_text_file(path, encode_png(image));
}

inline Tensor decode_png(const std::string& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) != 0) {
        throw io_error("not a png (bad signature)");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::size_t off = 8;
    std::size_t W = 0, H = 0, channels = 0;
    std::string idat;
    bool saw_ihdr = false;
    while (off + 8 <= bytes.size()) {
        std::uint32_t len = img_detail::get_u32_be(p + off);
        if (off + 12 + len > bytes.size()) throw io_error("png chunk truncated");
        std::string type(bytes, off + 4, 4);
        const unsigned char* data = p + off + 8;
        if (type == "IHDR") {
            W = img_detail::get_u32_be(data);
            H = img_detail::get_u32_be(data + 4);
            unsigned depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8) throw io_error("png: only 8-bit depth supported");
            if (interlace != 0) throw io_error("png: interlaced images not supported");
            switch (color) {
                case 0: channels = 1; break;
                case 2: channels = 3; break;
                case 4: channels = 2; break;
                case 6: channels = 4; break;
                default: throw io_error("png: palette images not supported");
            }
            saw_ihdr = true;
        } else if (type == "IDAT") {
            idat.append(reinterpret_cast<const char*>(data), len);
        } else if (type == "IEND") {
            break;
        }
        off += 12 + len;
    }
    if (!saw_ihdr || W == 0 || H == 0) throw io_error("png: missing IHDR");
    std::size_t row_bytes = W * channels;
    std::size_t raw_len = H * (1 + row_bytes);
    std::vector<unsigned char> raw(raw_len);
    uLongf dest_len = static_cast<uLongf>(raw_len);
    if (uncompress(raw.data(), &dest_len, reinterpret_cast<const Bytef*>(idat.data()),
                   static_cast<uLong>(idat.size())) != Z_OK ||
        dest_len != raw_len) {
        throw io_error("png inflate failed");
    }
    // Unfilter in place into a clean pixel buffer.
    std::vector<unsigned char> pix(H * row_bytes, 0);
    std::size_t bpp = channels;
    for (std::size_t h = 0; h < H; ++h) {
        unsigned char filter = raw[h * (1 + row_bytes)];
        const unsigned char* src = raw.data() + h * (1 + row_bytes) + 1;
        unsigned char* dst = pix.data() + h * row_bytes;
        const unsigned char* up = h > 0 ? pix.data() + (h - 1) * row_bytes : nullptr;
        for (std::size_t i = 0; i < row_bytes; ++i) {
            int a = i >= bpp ? dst[i - bpp] : 0;
            int b = up ? up[i] : 0;
            int c = (up && i >= bpp) ? up[i - bpp] : 0;
            int x = src[i];
            switch (filter) {
                case 0: dst[i] = static_cast<unsigned char>(x); break;
                case 1: dst[i] = static_cast<unsigned char>((x + a) & 0xff); break;
                case 2: dst[i] = static_cast<unsigned char>((x + b) & 0xff); break;
                case 3: dst[i] = static_cast<unsigned char>((x + (a + b) / 2) & 0xff); break;
                case 4: dst[i] = static_cast<unsigned char>((x + img_detail::paeth(a, b, c)) & 0xff); break;
                default: throw io_error("png: unknown scanline filter");
            }
        }
    }
    Tensor out({H, W, 3});
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
            const unsigned char* q = pix.data() + h * row_bytes + w * channels;
            double r, g, b;
            if (channels >= 3) {
                r = q[0] / 255.0;
                g = q[1] / 255.0;
                b = q[2] / 255.0;
            } else {
                r = g = b = q[0] / 255.0;
            }
            out.at(h, w, 0) = r;
            out.at(h, w, 1) = g;
            out.at(h, w, 2) = b;
        }
    return out;
}

inline Tensor decode_ppm(const std::string& bytes) {
    std::size_t off = 0;
    auto skip_ws = [&]() {
        while (off < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[off]))) {
                ++off;
            } else if (bytes[off] == '#') {
                while (off < bytes.size() && bytes[off] != '\n') ++off;
            } else {
                break;
            }
        }
    };
    auto next_int = [&]() -> long {
        skip_ws();
        long v = 0;
        bool any = false;
        while (off < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[off]))) {
            v = v * 10 + (bytes[off] - '0');
            ++off;
            any = true;
        }
        if (!any) throw io_error("ppm: malformed header");
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '3')) {
        throw io_error("ppm: unsupported magic");
    }
    bool binary = bytes[1] == '6';
    off = 2;
    long W = next_int(), H = next_int(), maxval = next_int();
    if (W <= 0 || H <= 0 || maxval <= 0 || maxval > 255) throw io_error("ppm: bad dimensions");
    Tensor out({static_cast<std::size_t>(H), static_cast<std::size_t>(W), 3});
    if (binary) {
        ++off;  // single whitespace after maxval
        if (bytes.size() < off + static_cast<std::size_t>(W) * H * 3) throw io_error("ppm: truncated");
        for (std::size_t i = 0; i < out.numel(); ++i) {
            out[i] = static_cast<unsigned char>(bytes[off + i]) / static_cast<double>(maxval);
        }
    } else {
        for (std::size_t i = 0; i < out.numel(); ++i) {
            out[i] = static_cast<double>(next_int()) / static_cast<double>(maxval);
        }
    }
    return out;
}

// Load a PNG or PPM image by extension.
inline Tensor read_image(const std::filesystem::path& path) {
    std::string bytes = read_file_bytes(path);
    std::string ext = path.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".png") return decode_png(bytes);
    if (ext == ".ppm") return decode_ppm(bytes);
    throw io_error("unsupported image format: " + path.string());
}

}  // namespace nvrd
