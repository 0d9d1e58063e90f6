// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit and acceptance suites. The box renderer here is
// an independent oracle: it intersects pixel rays with an axis-aligned box
// using the slab method and does not touch the library's geometry code.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "aor/geometry.hpp"
#include "aor/image.hpp"

namespace aor::test {

inline std::filesystem::path fixtures_dir() { return AOR_FIXTURES_DIR; }
inline std::filesystem::path scene_dir(const std::string& name) {
    return fixtures_dir() / "scenes" / name;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("aor-test-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

inline ColorFrame solid_frame(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    ColorFrame f(w, h);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            auto* px = f.pixel(u, v);
            px[0] = r;
            px[1] = g;
            px[2] = b;
        }
    }
    return f;
}

/// Depth image and tight bbox of an axis-aligned box seen through a pinhole
/// camera, with a background plane at `background` meters along camera z.
struct BoxRender {
    geometry::DepthFrame depth;
    PixelRect bbox;
    std::size_t hits{0};
};

inline BoxRender render_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                            const geometry::Pose& pose, const geometry::CameraIntrinsics& k,
                            double background = 6.0) {
    BoxRender out;
    out.depth = geometry::DepthFrame::constant(k.width, k.height, background);
    int u0 = k.width, v0 = k.height, u1 = -1, v1 = -1;
    const Eigen::Vector3d origin = pose.translation;
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            const Eigen::Vector3d ray_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            const Eigen::Vector3d dir = pose.rotation * ray_cam;
            double tmin = -std::numeric_limits<double>::infinity();
            double tmax = std::numeric_limits<double>::infinity();
            bool miss = false;
            for (int a = 0; a < 3 && !miss; ++a) {
                if (std::abs(dir[a]) < 1e-15) {
                    if (origin[a] < lo[a] || origin[a] > hi[a]) miss = true;
                    continue;
                }
                double t1 = (lo[a] - origin[a]) / dir[a];
                double t2 = (hi[a] - origin[a]) / dir[a];
                if (t1 > t2) std::swap(t1, t2);
                tmin = std::max(tmin, t1);
                tmax = std::min(tmax, t2);
            }
            if (miss || tmax < tmin || tmin <= 0) continue;
            // ray_cam has unit z, so the ray parameter is the camera-frame depth.
            out.depth.depth(v, u) = tmin;
            out.depth.valid(v, u) = true;
            ++out.hits;
            u0 = std::min(u0, u);
            v0 = std::min(v0, v);
            u1 = std::max(u1, u);
            v1 = std::max(v1, v);
        }
    }
    if (out.hits > 0) out.bbox = {u0, v0, u1 - u0 + 1, v1 - v0 + 1};
    return out;
}

/// Camera at `eye` looking at `target`, world y down.
inline geometry::Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
    const Eigen::Vector3d f = (target - eye).normalized();
    const Eigen::Vector3d r = Eigen::Vector3d(0, 1, 0).cross(f).normalized();
    const Eigen::Vector3d d = f.cross(r);
    geometry::Pose pose;
    pose.rotation.col(0) = r;
    pose.rotation.col(1) = d;
    pose.rotation.col(2) = f;
    pose.translation = eye;
    return pose;
}

inline geometry::CameraIntrinsics vga_intrinsics() {
    geometry::CameraIntrinsics k;
    k.fx = k.fy = 525.0;
    k.cx = 319.5;
    k.cy = 239.5;
    k.width = 640;
    k.height = 480;
    return k;
}

}  // namespace aor::test
