// In-memory images plus the raster formats used for fixtures and debug
// output: binary PPM (P6), binary PGM (P5) and uncompressed 24-bit BMP.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ebt/box.hpp"

namespace ebt {

struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;  // row-major, interleaved

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(w) * h * c, fill) {
        if (w < 1 || h < 1 || (c != 1 && c != 3))
            throw std::invalid_argument("Image: bad dimensions");
    }

    std::uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels &&
               pixels == o.pixels;
    }
};

// Rec. 601 luma. Gray inputs are returned unchanged.
inline Image to_grayscale(const Image& img) {
    if (img.channels == 1) return img;
    Image out(img.width, img.height, 1);
    const std::uint8_t* src = img.pixels.data();
    std::uint8_t* dst = out.pixels.data();
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
        dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
    }
    return out;
}

// Nearest-neighbor resampling of the sub-window b into out_w x out_h.
// Source coordinates outside the image replicate the nearest border pixel.
inline Image crop_resample(const Image& img, const BoundingBox& b, int out_w, int out_h) {
    if (!b.valid()) throw std::invalid_argument("crop_resample: empty box");
    if (!intersects_frame(b, img.width, img.height))
        throw std::invalid_argument("crop_resample: box fully outside image");
    if (out_w < 1 || out_h < 1) throw std::invalid_argument("crop_resample: bad output size");

    Image out(out_w, out_h, img.channels);
    const double sx = b.w / out_w;
    const double sy = b.h / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        int src_y = static_cast<int>(std::floor(b.y + (oy + 0.5) * sy));
        src_y = std::clamp(src_y, 0, img.height - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            int src_x = static_cast<int>(std::floor(b.x + (ox + 0.5) * sx));
            src_x = std::clamp(src_x, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c)
                out.at(ox, oy, c) = img.at(src_x, src_y, c);
        }
    }
    return out;
}

// Burns an axis-aligned rectangle outline into an RGB image (for overlays).
inline void draw_rect(Image& img, const BoundingBox& b, std::uint8_t r, std::uint8_t g,
                      std::uint8_t bl, int thickness = 1) {
    if (img.channels != 3) throw std::invalid_argument("draw_rect: RGB image required");
    const int x0 = static_cast<int>(std::lround(b.x));
    const int y0 = static_cast<int>(std::lround(b.y));
    const int x1 = static_cast<int>(std::lround(b.x2())) - 1;
    const int y1 = static_cast<int>(std::lround(b.y2())) - 1;
    auto put = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
        img.at(x, y, 0) = r;
        img.at(x, y, 1) = g;
        img.at(x, y, 2) = bl;
    };
    for (int t = 0; t < thickness; ++t) {
        for (int x = x0; x <= x1; ++x) {
            put(x, y0 + t);
            put(x, y1 - t);
        }
        for (int y = y0; y <= y1; ++y) {
            put(x0 + t, y);
            put(x1 - t, y);
        }
    }
}

namespace detail {

inline int pnm_read_token(std::istream& in) {
    // Skips whitespace and '#' comments, then parses a non-negative integer.
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw std::runtime_error("PNM: malformed header");
    return value;
}

inline std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline Image load_bmp(std::istream& in, const std::string& name) {
    std::vector<std::uint8_t> header(54);
    in.read(reinterpret_cast<char*>(header.data()), 54);
    if (!in || header[0] != 'B' || header[1] != 'M')
        throw std::runtime_error("BMP: bad file header in " + name);
    const std::uint32_t data_offset = le32(&header[10]);
    const std::uint32_t info_size = le32(&header[14]);
    if (info_size < 40) throw std::runtime_error("BMP: unsupported header in " + name);
    const std::int32_t width = static_cast<std::int32_t>(le32(&header[18]));
    std::int32_t height = static_cast<std::int32_t>(le32(&header[22]));
    const std::uint16_t bpp = le16(&header[28]);
    const std::uint32_t compression = le32(&header[30]);
    if (bpp != 24 || compression != 0)
        throw std::runtime_error("BMP: only uncompressed 24-bit supported: " + name);
    const bool top_down = height < 0;
    if (top_down) height = -height;
    if (width < 1 || height < 1) throw std::runtime_error("BMP: bad dimensions in " + name);

    in.seekg(data_offset, std::ios::beg);
    const int row_bytes = ((width * 3 + 3) / 4) * 4;
    std::vector<std::uint8_t> row(row_bytes);
    Image img(width, height, 3);
    for (int r = 0; r < height; ++r) {
        in.read(reinterpret_cast<char*>(row.data()), row_bytes);
        if (!in) throw std::runtime_error("BMP: truncated pixel data in " + name);
        const int y = top_down ? r : height - 1 - r;
        for (int x = 0; x < width; ++x) {
            img.at(x, y, 0) = row[x * 3 + 2];
            img.at(x, y, 1) = row[x * 3 + 1];
            img.at(x, y, 2) = row[x * 3 + 0];
        }
    }
    return img;
}

}  // namespace detail

inline Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path);
    const int c0 = in.get();
    const int c1 = in.get();
    if (c0 == 'B' && c1 == 'M') {
        in.seekg(0, std::ios::beg);
        return detail::load_bmp(in, path);
    }
    if (c0 != 'P' || (c1 != '5' && c1 != '6'))
        throw std::runtime_error("unsupported image format: " + path);
    const int channels = (c1 == '6') ? 3 : 1;
    const int width = detail::pnm_read_token(in);
    const int height = detail::pnm_read_token(in);
    const int maxval = detail::pnm_read_token(in);
    if (maxval != 255) throw std::runtime_error("PNM: only maxval 255 supported: " + path);
    if (width < 1 || height < 1) throw std::runtime_error("PNM: bad dimensions in " + path);
    Image img(width, height, channels);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw std::runtime_error("PNM: truncated pixel data in " + path);
    return img;
}

inline void save_pnm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    out << (img.channels == 3 ? "P6\n" : "P5\n") << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ebt
