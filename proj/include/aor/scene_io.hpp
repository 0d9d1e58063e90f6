// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Recorded RGB-D scene directories. Layout (see docs/scene-format.md):
//
//   scene.json          manifest with intrinsics and frame count
//   frames/%06d.png     8-bit RGB color frames
//   depth/%06d.png      16-bit grayscale depth in millimeters, 0 = invalid
//   poses.jsonl         one row-major 3x4 camera->world matrix per line
//   detections.jsonl    optional ground-truth detections

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "aor/geometry.hpp"
#include "aor/image.hpp"

namespace aor {

/// One row of detections.jsonl.
struct GroundTruthRow {
    std::size_t frame{0};
    std::string label;
    PixelRect bbox;
    double confidence{1.0};
};

struct SceneFrame {
    ColorFrame color;
    geometry::DepthFrame depth;
    geometry::Pose pose;
};

struct SceneDirectory {
    std::filesystem::path path;
    std::string name;
    geometry::CameraIntrinsics intrinsics;
    std::vector<SceneFrame> frames;
    bool has_ground_truth{false};
    /// Indexed by frame; rows keep file order.
    std::vector<std::vector<GroundTruthRow>> ground_truth;

    std::size_t frame_count() const { return frames.size(); }
};

/// Loads and validates every file eagerly. Throws Error(kLoad) naming the
/// offending file.
SceneDirectory load_scene(const std::filesystem::path& path);

std::shared_ptr<const SceneDirectory> load_shared_scene(const std::filesystem::path& path);

/// Parses a row-major 3x4 camera->world matrix. Throws kLoad with "invalid
/// rotation" when the rotation block is not orthonormal with det +1 within
/// `tolerance`.
geometry::Pose parse_pose_row(const std::vector<double>& values, double tolerance = 1e-4);

std::string frame_file_name(std::size_t index);

}  // namespace aor
