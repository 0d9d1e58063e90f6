// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/scene_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "aor/error.hpp"

namespace aor {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const fs::path& file, const std::string& what) {
    throw Error(ErrorCode::kLoad, file.string() + ": " + what);
}

json read_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) fail(file, "cannot open");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(file, std::string("malformed JSON: ") + e.what());
    }
}

std::vector<std::string> read_lines(const fs::path& file) {
    std::ifstream in(file);
    if (!in) fail(file, "cannot open");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

double number_field(const json& obj, const char* key, const fs::path& file) {
    if (!obj.contains(key) || !obj.at(key).is_number()) {
        fail(file, std::string("missing numeric field '") + key + "'");
    }
    return obj.at(key).get<double>();
}

geometry::CameraIntrinsics parse_intrinsics(const json& manifest, const fs::path& file) {
    if (!manifest.contains("intrinsics") || !manifest.at("intrinsics").is_object()) {
        fail(file, "missing 'intrinsics' object");
    }
    const json& obj = manifest.at("intrinsics");
    geometry::CameraIntrinsics k;
    k.fx = number_field(obj, "fx", file);
    k.fy = number_field(obj, "fy", file);
    k.cx = number_field(obj, "cx", file);
    k.cy = number_field(obj, "cy", file);
    const double w = number_field(obj, "width", file);
    const double h = number_field(obj, "height", file);
    if (w != std::floor(w) || h != std::floor(h)) fail(file, "width/height must be integers");
    k.width = static_cast<int>(w);
    k.height = static_cast<int>(h);
    try {
        k.validate();
    } catch (const Error& e) {
        fail(file, e.what());
    }
    return k;
}

std::string string_field_or(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<std::string>();
}

void check_no_extra_frames(const fs::path& dir, std::size_t count) {
    std::set<std::string> expected;
    for (std::size_t i = 0; i < count; ++i) expected.insert(frame_file_name(i));
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() != ".png") continue;
        if (!expected.count(entry.path().filename().string())) {
            fail(entry.path(), "unexpected frame beyond frame_count");
        }
    }
}

}  // namespace

std::string frame_file_name(std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", index);
    return name;
}

geometry::Pose parse_pose_row(const std::vector<double>& values, double tolerance) {
    if (values.size() != 12) {
        throw Error(ErrorCode::kLoad, "pose must have 12 numbers (row-major 3x4)");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::kLoad, "pose has non-finite entries");
    }
    geometry::Pose pose;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pose.rotation(r, c) = values[r * 4 + c];
        pose.translation(r) = values[r * 4 + 3];
    }
    if (!pose.is_valid(tolerance)) {
        std::ostringstream msg;
        msg << "invalid rotation (det " << pose.rotation.determinant() << ")";
        throw Error(ErrorCode::kLoad, msg.str());
    }
    return pose;
}

SceneDirectory load_scene(const fs::path& path) {
    const fs::path manifest_path = path / "scene.json";
    if (!fs::is_directory(path)) fail(path, "scene directory does not exist");
    if (!fs::exists(manifest_path)) fail(manifest_path, "missing manifest");
    const json manifest = read_json_file(manifest_path);

    SceneDirectory scene;
    scene.path = path;
    scene.name = string_field_or(manifest, "name", path.filename().string());
    scene.intrinsics = parse_intrinsics(manifest, manifest_path);

    const double count_raw = number_field(manifest, "frame_count", manifest_path);
    if (count_raw < 1 || count_raw != std::floor(count_raw)) {
        fail(manifest_path, "frame_count must be a positive integer");
    }
    const auto count = static_cast<std::size_t>(count_raw);

    const fs::path frames_dir = path / string_field_or(manifest, "frames_dir", "frames");
    const fs::path depth_dir = path / string_field_or(manifest, "depth_dir", "depth");
    const fs::path poses_path = path / string_field_or(manifest, "poses", "poses.jsonl");

    for (const auto& dir : {frames_dir, depth_dir}) {
        if (!fs::is_directory(dir)) fail(dir, "missing directory");
    }
    for (std::size_t i = 0; i < count; ++i) {
        for (const auto& dir : {frames_dir, depth_dir}) {
            const fs::path file = dir / frame_file_name(i);
            if (!fs::exists(file)) fail(file, "missing frame");
        }
    }
    check_no_extra_frames(frames_dir, count);
    check_no_extra_frames(depth_dir, count);

    const auto pose_lines = read_lines(poses_path);
    if (pose_lines.size() != count) {
        std::ostringstream msg;
        msg << "expected " << count << " poses, found " << pose_lines.size();
        fail(poses_path, msg.str());
    }

    const geometry::CameraIntrinsics& k = scene.intrinsics;
    scene.frames.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        SceneFrame& frame = scene.frames[i];
        const fs::path color_path = frames_dir / frame_file_name(i);
        frame.color = png::read_rgb(color_path);
        if (frame.color.width != k.width || frame.color.height != k.height) {
            fail(color_path, "dimension mismatch with intrinsics");
        }
        const fs::path depth_path = depth_dir / frame_file_name(i);
        const png::Gray16 depth = png::read_gray16(depth_path);
        if (depth.width != frame.color.width || depth.height != frame.color.height) {
            fail(depth_path, "dimension mismatch with color frame");
        }
        frame.depth = geometry::DepthFrame::from_millimeters(depth.width, depth.height, depth.values);

        std::vector<double> values;
        try {
            values = json::parse(pose_lines[i]).get<std::vector<double>>();
        } catch (const json::exception&) {
            fail(poses_path, "line " + std::to_string(i + 1) + ": expected an array of 12 numbers");
        }
        try {
            frame.pose = parse_pose_row(values);
        } catch (const Error& e) {
            fail(poses_path, "line " + std::to_string(i + 1) + ": " + e.what());
        }
    }

    scene.ground_truth.resize(count);
    if (manifest.contains("detections")) {
        const fs::path det_path = path / manifest.at("detections").get<std::string>();
        scene.has_ground_truth = true;
        const auto lines = read_lines(det_path);
        for (std::size_t n = 0; n < lines.size(); ++n) {
            if (lines[n].empty()) continue;
            const std::string where = "line " + std::to_string(n + 1) + ": ";
            GroundTruthRow row;
            try {
                const json obj = json::parse(lines[n]);
                row.frame = obj.at("frame").get<std::size_t>();
                row.label = obj.at("label").get<std::string>();
                const auto box = obj.at("bbox").get<std::vector<int>>();
                if (box.size() != 4) fail(det_path, where + "bbox must be [x,y,w,h]");
                row.bbox = {box[0], box[1], box[2], box[3]};
                row.confidence = obj.at("confidence").get<double>();
            } catch (const json::exception& e) {
                fail(det_path, where + e.what());
            }
            if (row.frame >= count) fail(det_path, where + "frame index out of range");
            if (row.label.empty()) fail(det_path, where + "empty label");
            if (!(row.confidence >= 0 && row.confidence <= 1)) {
                fail(det_path, where + "confidence outside [0,1]");
            }
            if (!row.bbox.within(k.width, k.height)) fail(det_path, where + "bbox outside the frame");
            scene.ground_truth[row.frame].push_back(std::move(row));
        }
    }
    return scene;
}

std::shared_ptr<const SceneDirectory> load_shared_scene(const fs::path& path) {
    return std::make_shared<const SceneDirectory>(load_scene(path));
}

}  // namespace aor
