// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "aor/error.hpp"

namespace aor {

PixelRect intersect(const PixelRect& a, const PixelRect& b) {
    const int x0 = std::max(a.x, b.x);
    const int y0 = std::max(a.y, b.y);
    const int x1 = std::min(a.x + a.w, b.x + b.w);
    const int y1 = std::min(a.y + a.h, b.y + b.h);
    if (x1 <= x0 || y1 <= y0) return {};
    return {x0, y0, x1 - x0, y1 - y0};
}

ColorFrame::ColorFrame(int w, int h)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

CropImage crop(const ColorFrame& frame, const PixelRect& bbox, std::size_t frame_index) {
    const PixelRect clipped = intersect(bbox, {0, 0, frame.width, frame.height});
    if (clipped.empty()) {
        throw Error(ErrorCode::kEmptyCrop, "crop: bbox does not intersect the frame");
    }
    CropImage out;
    out.frame_index = frame_index;
    out.bbox = clipped;
    out.pixels = ColorFrame(clipped.w, clipped.h);
    const std::size_t row_bytes = static_cast<std::size_t>(clipped.w) * 3;
    for (int r = 0; r < clipped.h; ++r) {
        std::memcpy(out.pixels.pixel(0, r), frame.pixel(clipped.x, clipped.y + r), row_bytes);
    }
    return out;
}

namespace png {
namespace {

struct ReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t offset{0};
};

void read_callback(png_structp png_ptr, png_bytep out, png_size_t length) {
    auto* state = static_cast<ReadState*>(png_get_io_ptr(png_ptr));
    if (state->offset + length > state->bytes.size()) {
        png_error(png_ptr, "truncated PNG data");
    }
    std::memcpy(out, state->bytes.data() + state->offset, length);
    state->offset += length;
}

void write_callback(png_structp png_ptr, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png_ptr));
    out->insert(out->end(), data, data + length);
}

void flush_callback(png_structp) {}

[[noreturn]] void error_callback(png_structp, png_const_charp message) {
    throw Error(ErrorCode::kLoad, std::string("png: ") + message);
}

void warning_callback(png_structp, png_const_charp) {}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kLoad, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

bool host_is_little_endian() {
    const std::uint16_t probe = 1;
    std::uint8_t first = 0;
    std::memcpy(&first, &probe, 1);
    return first == 1;
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : state_{bytes, 0} {
        if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
            throw Error(ErrorCode::kLoad, "png: bad signature");
        }
        png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback,
                                      warning_callback);
        info_ = png_create_info_struct(png_);
        png_set_read_fn(png_, &state_, read_callback);
        png_read_info(png_, info_);
    }
    ~Reader() { png_destroy_read_struct(&png_, &info_, nullptr); }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    png_structp png() const { return png_; }
    png_infop info() const { return info_; }

    std::vector<std::uint8_t> read_rows(std::size_t row_bytes, int height) {
        std::vector<std::uint8_t> data(row_bytes * height);
        std::vector<png_bytep> rows(height);
        for (int r = 0; r < height; ++r) rows[r] = data.data() + r * row_bytes;
        png_read_image(png_, rows.data());
        png_read_end(png_, nullptr);
        return data;
    }

private:
    ReadState state_;
    png_structp png_{nullptr};
    png_infop info_{nullptr};
};

class Writer {
public:
    Writer() {
        png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback,
                                       warning_callback);
        info_ = png_create_info_struct(png_);
    }
    ~Writer() { png_destroy_write_struct(&png_, &info_); }
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    std::vector<std::uint8_t> write(int width, int height, int bit_depth, int color_type,
                                    const std::uint8_t* data, std::size_t row_bytes) {
        std::vector<std::uint8_t> out;
        png_set_write_fn(png_, &out, write_callback, flush_callback);
        png_set_IHDR(png_, info_, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                     bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png_, info_);
        if (bit_depth == 16 && host_is_little_endian()) png_set_swap(png_);
        std::vector<png_bytep> rows(height);
        for (int r = 0; r < height; ++r) {
            rows[r] = const_cast<png_bytep>(data + r * row_bytes);
        }
        png_write_image(png_, rows.data());
        png_write_end(png_, nullptr);
        return out;
    }

private:
    png_structp png_{nullptr};
    png_infop info_{nullptr};
};

}  // namespace

ColorFrame decode_rgb(std::span<const std::uint8_t> bytes) {
    Reader reader(bytes);
    png_structp p = reader.png();
    png_infop info = reader.info();
    const int color_type = png_get_color_type(p, info);
    const int bit_depth = png_get_bit_depth(p, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(p);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(p);
    if (png_get_valid(p, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(p);
    if (bit_depth == 16) png_set_strip_16(p);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(p);
    }
    png_set_strip_alpha(p);
    png_read_update_info(p, info);

    ColorFrame frame;
    frame.width = static_cast<int>(png_get_image_width(p, info));
    frame.height = static_cast<int>(png_get_image_height(p, info));
    const std::size_t row_bytes = png_get_rowbytes(p, info);
    if (row_bytes != static_cast<std::size_t>(frame.width) * 3) {
        throw Error(ErrorCode::kLoad, "png: unsupported color layout");
    }
    frame.rgb = reader.read_rows(row_bytes, frame.height);
    return frame;
}

ColorFrame read_rgb(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_rgb(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

Gray16 read_gray16(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        Reader reader(bytes);
        png_structp p = reader.png();
        png_infop info = reader.info();
        if (png_get_color_type(p, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(p, info) != 16) {
            throw Error(ErrorCode::kLoad, "expected a 16-bit grayscale PNG");
        }
        if (host_is_little_endian()) png_set_swap(p);
        png_read_update_info(p, info);
        Gray16 image;
        image.width = static_cast<int>(png_get_image_width(p, info));
        image.height = static_cast<int>(png_get_image_height(p, info));
        const auto raw = reader.read_rows(static_cast<std::size_t>(image.width) * 2, image.height);
        image.values.resize(static_cast<std::size_t>(image.width) * image.height);
        std::memcpy(image.values.data(), raw.data(), raw.size());
        return image;
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_rgb(const ColorFrame& frame) {
    if (!frame.is_valid()) throw Error(ErrorCode::kValidation, "png: invalid color frame");
    Writer writer;
    return writer.write(frame.width, frame.height, 8, PNG_COLOR_TYPE_RGB, frame.rgb.data(),
                        static_cast<std::size_t>(frame.width) * 3);
}

void write_rgb(const std::filesystem::path& path, const ColorFrame& frame) {
    write_file(path, encode_rgb(frame));
}

void write_gray16(const std::filesystem::path& path, const Gray16& image) {
    Writer writer;
    const auto bytes = writer.write(image.width, image.height, 16, PNG_COLOR_TYPE_GRAY,
                                    reinterpret_cast<const std::uint8_t*>(image.values.data()),
                                    static_cast<std::size_t>(image.width) * 2);
    write_file(path, bytes);
}

}  // namespace png
}  // namespace aor
