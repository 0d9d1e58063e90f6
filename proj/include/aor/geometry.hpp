// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Pinhole camera math used to turn 2D detections into world anchors and to
// project anchors back into a view. Pixel centers sit at integer coordinates;
// camera frame is x right, y down, z forward.

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "aor/error.hpp"

namespace aor::geometry {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Continuous pixel coordinates (u, v).
template <typename Scalar>
using PixelPointT = Vec2<Scalar>;
/// Meters in the camera frame.
template <typename Scalar>
using CameraPointT = Vec3<Scalar>;
/// Meters in the world frame.
template <typename Scalar>
using WorldPointT = Vec3<Scalar>;

using PixelPoint = PixelPointT<double>;
using CameraPoint = CameraPointT<double>;
using WorldPoint = WorldPointT<double>;

template <typename Scalar>
struct CameraIntrinsicsT {
    Scalar fx{1};
    Scalar fy{1};
    Scalar cx{0};
    Scalar cy{0};
    int width{1};
    int height{1};

    bool is_valid() const {
        return std::isfinite(fx) && std::isfinite(fy) && fx > 0 && fy > 0 && width >= 1 &&
               height >= 1 && cx >= 0 && cx < width && cy >= 0 && cy < height;
    }

    /// Throws kValidation naming the first broken invariant.
    void validate() const {
        if (!(width >= 1 && height >= 1)) {
            throw Error(ErrorCode::kValidation, "intrinsics: width and height must be >= 1");
        }
        if (!(std::isfinite(fx) && std::isfinite(fy) && fx > 0 && fy > 0)) {
            throw Error(ErrorCode::kValidation, "intrinsics: focal lengths must be positive");
        }
        if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
            throw Error(ErrorCode::kValidation, "intrinsics: principal point outside the frame");
        }
    }

    bool contains(const PixelPointT<Scalar>& p) const {
        return std::isfinite(p.x()) && std::isfinite(p.y()) && p.x() >= 0 && p.y() >= 0 &&
               p.x() <= Scalar(width - 1) && p.y() <= Scalar(height - 1);
    }
};

using CameraIntrinsics = CameraIntrinsicsT<double>;

/// Rigid camera-to-world transform.
template <typename Scalar>
struct PoseT {
    Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
    Vec3<Scalar> translation = Vec3<Scalar>::Zero();

    static PoseT identity() { return {}; }

    static PoseT from_translation(const Vec3<Scalar>& t) {
        PoseT pose;
        pose.translation = t;
        return pose;
    }

    bool is_valid(Scalar tolerance = Scalar(1e-6)) const {
        if (!rotation.allFinite() || !translation.allFinite()) return false;
        const Mat3<Scalar> gram = rotation.transpose() * rotation;
        if ((gram - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff() > tolerance) return false;
        return std::abs(rotation.determinant() - Scalar(1)) <= tolerance;
    }

    WorldPointT<Scalar> to_world(const CameraPointT<Scalar>& c) const {
        return rotation * c + translation;
    }

    CameraPointT<Scalar> to_camera(const WorldPointT<Scalar>& w) const {
        return rotation.transpose() * (w - translation);
    }

    /// Composition: (this ∘ other)(x) = this(other(x)).
    PoseT operator*(const PoseT& other) const {
        PoseT out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        return out;
    }
};

using Pose = PoseT<double>;

/// Per-pixel depth in meters with an explicit validity mask. Row-major so a
/// row of pixels is contiguous, like the image buffers it pairs with.
template <typename Scalar>
struct DepthFrameT {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Array depth;
    Mask valid;

    int width() const { return static_cast<int>(depth.cols()); }
    int height() const { return static_cast<int>(depth.rows()); }

    static DepthFrameT constant(int width, int height, Scalar meters) {
        DepthFrameT df;
        df.depth = Array::Constant(height, width, meters);
        df.valid = Mask::Constant(height, width, std::isfinite(meters) && meters > 0);
        return df;
    }

    /// Values of 0 mean "no measurement"; everything else is millimeters.
    template <typename Millimeters>
    static DepthFrameT from_millimeters(int width, int height, const Millimeters& mm) {
        DepthFrameT df;
        df.depth.resize(height, width);
        df.valid.resize(height, width);
        for (int v = 0; v < height; ++v) {
            for (int u = 0; u < width; ++u) {
                const auto raw = mm[static_cast<std::size_t>(v) * width + u];
                df.depth(v, u) = Scalar(raw) / Scalar(1000);
                df.valid(v, u) = raw != 0;
            }
        }
        return df;
    }

    void invalidate(int u, int v) {
        depth(v, u) = 0;
        valid(v, u) = false;
    }
};

using DepthFrame = DepthFrameT<double>;

inline constexpr int kDefaultDepthWindow = 5;

template <typename Scalar>
CameraPointT<Scalar> backproject(const PixelPointT<Scalar>& p, Scalar depth,
                                 const CameraIntrinsicsT<Scalar>& k) {
    if (!std::isfinite(depth) || depth <= 0) {
        throw Error(ErrorCode::kInvalidDepth, "backproject: depth must be finite and positive");
    }
    if (!k.contains(p)) {
        std::ostringstream msg;
        msg << "backproject: pixel (" << p.x() << ", " << p.y() << ") outside " << k.width << "x"
            << k.height;
        throw Error(ErrorCode::kOutOfBounds, msg.str());
    }
    return {(p.x() - k.cx) * depth / k.fx, (p.y() - k.cy) * depth / k.fy, depth};
}

/// Projects a world point into the image. Returns nullopt when the point is
/// at or behind the camera plane. The pixel may fall outside the frame.
template <typename Scalar>
std::optional<PixelPointT<Scalar>> project(const WorldPointT<Scalar>& w, const PoseT<Scalar>& pose,
                                           const CameraIntrinsicsT<Scalar>& k) {
    const CameraPointT<Scalar> c = pose.to_camera(w);
    if (!(c.z() > 0)) return std::nullopt;
    return PixelPointT<Scalar>{k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy};
}

inline bool is_supported_window(int window) {
    return window == 1 || window == 3 || window == 5 || window == 7;
}

/// Median of the valid depths in a window×window block centered at round(p).
template <typename Scalar>
std::optional<Scalar> sample_depth(const DepthFrameT<Scalar>& df, const PixelPointT<Scalar>& p,
                                   int window = kDefaultDepthWindow) {
    if (!is_supported_window(window)) {
        throw Error(ErrorCode::kPrecondition, "sample_depth: window must be 1, 3, 5 or 7");
    }
    if (!std::isfinite(p.x()) || !std::isfinite(p.y())) {
        throw Error(ErrorCode::kOutOfBounds, "sample_depth: non-finite pixel");
    }
    const long cu = std::lround(p.x());
    const long cv = std::lround(p.y());
    if (cu < 0 || cv < 0 || cu >= df.width() || cv >= df.height()) {
        throw Error(ErrorCode::kOutOfBounds, "sample_depth: center outside the depth frame");
    }
    std::array<Scalar, 49> samples{};
    std::size_t count = 0;
    const int half = window / 2;
    const long u0 = std::max<long>(0, cu - half);
    const long u1 = std::min<long>(df.width() - 1, cu + half);
    const long v0 = std::max<long>(0, cv - half);
    const long v1 = std::min<long>(df.height() - 1, cv + half);
    for (long v = v0; v <= v1; ++v) {
        for (long u = u0; u <= u1; ++u) {
            if (df.valid(v, u)) samples[count++] = df.depth(v, u);
        }
    }
    if (count == 0) return std::nullopt;
    auto* first = samples.data();
    auto* mid = first + count / 2;
    std::nth_element(first, mid, first + count);
    if (count % 2 == 1) return *mid;
    const Scalar upper = *mid;
    const Scalar lower = *std::max_element(first, mid);
    return (lower + upper) / Scalar(2);
}

template <typename Scalar>
std::optional<WorldPointT<Scalar>> raycast_to_world(const PixelPointT<Scalar>& p,
                                                    const DepthFrameT<Scalar>& df,
                                                    const CameraIntrinsicsT<Scalar>& k,
                                                    const PoseT<Scalar>& pose,
                                                    int window = kDefaultDepthWindow) {
    const auto depth = sample_depth(df, p, window);
    if (!depth) return std::nullopt;
    return pose.to_world(backproject(p, *depth, k));
}

}  // namespace aor::geometry
