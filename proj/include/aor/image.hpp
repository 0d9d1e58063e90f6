// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aor {

/// Integer pixel rectangle: columns [x, x+w), rows [y, y+h).
struct PixelRect {
    int x{0};
    int y{0};
    int w{0};
    int h{0};

    bool empty() const { return w <= 0 || h <= 0; }
    long long area() const { return empty() ? 0 : static_cast<long long>(w) * h; }
    double center_u() const { return x + (w - 1) / 2.0; }
    double center_v() const { return y + (h - 1) / 2.0; }
    bool within(int width, int height) const {
        return !empty() && x >= 0 && y >= 0 && x + w <= width && y + h <= height;
    }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Empty rect when the two do not overlap.
PixelRect intersect(const PixelRect& a, const PixelRect& b);

/// 8-bit RGB, row-major, tightly packed.
struct ColorFrame {
    int width{0};
    int height{0};
    std::vector<std::uint8_t> rgb;

    ColorFrame() = default;
    ColorFrame(int w, int h);

    bool is_valid() const {
        return width >= 1 && height >= 1 &&
               rgb.size() == static_cast<std::size_t>(width) * height * 3;
    }
    std::uint8_t* pixel(int u, int v) { return rgb.data() + (static_cast<std::size_t>(v) * width + u) * 3; }
    const std::uint8_t* pixel(int u, int v) const {
        return rgb.data() + (static_cast<std::size_t>(v) * width + u) * 3;
    }

    friend bool operator==(const ColorFrame&, const ColorFrame&) = default;
};

/// A rectangle of a recorded frame, without pixels. Proxies and conversation
/// turns carry these; pixels are resolved against the scene when needed.
struct CropRef {
    std::size_t frame_index{0};
    PixelRect bbox;

    friend bool operator==(const CropRef&, const CropRef&) = default;
};

struct CropImage {
    std::size_t frame_index{0};
    PixelRect bbox;  // clipped to the source frame
    ColorFrame pixels;

    CropRef ref() const { return {frame_index, bbox}; }
};

/// Crops the intersection of `bbox` with the frame. Throws kEmptyCrop when
/// they do not overlap.
CropImage crop(const ColorFrame& frame, const PixelRect& bbox, std::size_t frame_index = 0);

namespace png {

ColorFrame read_rgb(const std::filesystem::path& path);
ColorFrame decode_rgb(std::span<const std::uint8_t> bytes);

struct Gray16 {
    int width{0};
    int height{0};
    std::vector<std::uint16_t> values;
};

/// Requires a 16-bit single-channel PNG.
Gray16 read_gray16(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_rgb(const ColorFrame& frame);
void write_rgb(const std::filesystem::path& path, const ColorFrame& frame);
void write_gray16(const std::filesystem::path& path, const Gray16& image);

}  // namespace png
}  // namespace aor
