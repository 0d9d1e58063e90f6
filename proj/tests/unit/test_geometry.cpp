// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "aor/geometry.hpp"
#include "support.hpp"

using namespace aor;
using namespace aor::geometry;

namespace {

CameraIntrinsics small_k() {
    CameraIntrinsics k;
    k.fx = 500;
    k.fy = 480;
    k.cx = 320;
    k.cy = 240;
    k.width = 640;
    k.height = 480;
    return k;
}

Pose random_pose(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> t(-5, 5);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    Pose pose;
    pose.rotation = q.toRotationMatrix();
    pose.translation = {t(rng), t(rng), t(rng)};
    return pose;
}

// Median computed by sorting the whole list.
double median_oracle(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("backproject maps the principal point to the optical axis") {
    const auto k = small_k();
    const auto c = backproject(PixelPoint{k.cx, k.cy}, 1.0, k);
    CHECK(c.isApprox(CameraPoint{0, 0, 1.0}));
    const auto off = backproject(PixelPoint{k.cx + k.fx / 4, k.cy}, 2.0, k);
    CHECK(off.x() == doctest::Approx(0.5));
    CHECK(off.y() == doctest::Approx(0.0));
    CHECK(off.z() == doctest::Approx(2.0));
}

TEST_CASE("backproject rejects bad depth and out-of-frame pixels") {
    const auto k = small_k();
    for (double d : {0.0, -1.0, std::nan(""), std::numeric_limits<double>::infinity()}) {
        try {
            backproject(PixelPoint{10, 10}, d, k);
            FAIL("expected invalid-depth");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kInvalidDepth);
        }
    }
    for (auto p : {PixelPoint{-0.5, 10}, PixelPoint{640, 10}, PixelPoint{10, 479.5}}) {
        try {
            backproject(p, 1.0, k);
            FAIL("expected out-of-bounds");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kOutOfBounds);
        }
    }
}

TEST_CASE("project handles the optical axis and points behind the camera") {
    const auto k = small_k();
    const auto p = project(WorldPoint{0, 0, 1}, Pose::identity(), k);
    REQUIRE(p);
    CHECK(p->x() == doctest::Approx(k.cx));
    CHECK(p->y() == doctest::Approx(k.cy));
    CHECK_FALSE(project(WorldPoint{0, 0, 0}, Pose::identity(), k));
    CHECK_FALSE(project(WorldPoint{0.3, 0.2, -1}, Pose::identity(), k));
    const Pose moved = Pose::from_translation({0, 0, 5});
    CHECK_FALSE(project(WorldPoint{0, 0, 4}, moved, k));
    const auto outside = project(WorldPoint{10, 0, 1}, Pose::identity(), k);
    REQUIRE(outside);
    CHECK(outside->x() > k.width);
}

TEST_CASE("roundtrip through backproject and project stays under 1e-6 px") {
    std::mt19937_64 rng(20260101);
    std::uniform_real_distribution<double> f(100, 2000);
    std::uniform_real_distribution<double> unit(0, 1);
    std::uniform_real_distribution<double> depth(0.05, 50);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        CameraIntrinsics k;
        k.width = 1 + static_cast<int>(unit(rng) * 1919);
        k.height = 1 + static_cast<int>(unit(rng) * 1079);
        k.fx = f(rng);
        k.fy = f(rng);
        k.cx = unit(rng) * (k.width - 1);
        k.cy = unit(rng) * (k.height - 1);
        const PixelPoint p{unit(rng) * (k.width - 1), unit(rng) * (k.height - 1)};
        const auto back = project(Pose::identity().to_world(backproject(p, depth(rng), k)),
                                  Pose::identity(), k);
        REQUIRE(back);
        worst = std::max(worst, (*back - p).norm());
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("sample_depth takes the median of valid samples") {
    auto plane = DepthFrame::constant(20, 20, 1.5);
    CHECK(*sample_depth(plane, PixelPoint{10, 10}, 5) == doctest::Approx(1.5));

    auto holes = DepthFrame::constant(20, 20, 1.0);
    for (int v = 3; v <= 7; ++v)
        for (int u = 3; u <= 7; ++u) holes.invalidate(u, v);
    CHECK_FALSE(sample_depth(holes, PixelPoint{5, 5}, 5));
    CHECK(sample_depth(holes, PixelPoint{5, 5}, 7));

    // 12 valid samples at 1.0, one outlier at 9.0, the other 12 invalid.
    auto mixed = DepthFrame::constant(20, 20, 1.0);
    std::vector<double> samples;
    int seen = 0;
    for (int v = 8; v <= 12; ++v) {
        for (int u = 8; u <= 12; ++u, ++seen) {
            if (seen < 12) {
                samples.push_back(1.0);
            } else if (seen == 12) {
                mixed.depth(v, u) = 9.0;
                samples.push_back(9.0);
            } else {
                mixed.invalidate(u, v);
            }
        }
    }
    const double expected = median_oracle(samples);
    CHECK(expected == 1.0);
    CHECK(*sample_depth(mixed, PixelPoint{10, 10}, 5) == expected);
}

TEST_CASE("sample_depth averages the middle pair for even counts") {
    auto df = DepthFrame::constant(3, 1, 1.0);
    df.depth(0, 0) = 1.0;
    df.depth(0, 1) = 2.0;
    df.invalidate(2, 0);
    CHECK(*sample_depth(df, PixelPoint{1, 0}, 3) == doctest::Approx(1.5));
}

TEST_CASE("sample_depth is permutation invariant and returns a sample for odd counts") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(0.2, 8);
    std::bernoulli_distribution valid(0.7);
    for (int trial = 0; trial < 500; ++trial) {
        const int window = std::vector<int>{1, 3, 5, 7}[trial % 4];
        auto df = DepthFrame::constant(window, window, 1.0);
        std::vector<double> values;
        for (int v = 0; v < window; ++v) {
            for (int u = 0; u < window; ++u) {
                if (valid(rng)) {
                    df.depth(v, u) = d(rng);
                    values.push_back(df.depth(v, u));
                } else {
                    df.invalidate(u, v);
                }
            }
        }
        const PixelPoint center{double(window / 2), double(window / 2)};
        const auto got = sample_depth(df, center, window);
        if (values.empty()) {
            CHECK_FALSE(got);
            continue;
        }
        REQUIRE(got);
        CHECK(*got == doctest::Approx(median_oracle(values)).epsilon(1e-12));
        if (values.size() % 2 == 1) {
            CHECK(std::find(values.begin(), values.end(), *got) != values.end());
        }

        // Shuffle the valid samples among the valid cells.
        std::vector<std::pair<int, int>> cells;
        for (int v = 0; v < window; ++v)
            for (int u = 0; u < window; ++u)
                if (df.valid(v, u)) cells.emplace_back(u, v);
        auto shuffled = values;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t i = 0; i < cells.size(); ++i) df.depth(cells[i].second, cells[i].first) = shuffled[i];
        CHECK(*sample_depth(df, center, window) == *got);
    }
}

TEST_CASE("sample_depth rejects unsupported windows and outside centers") {
    auto df = DepthFrame::constant(10, 10, 1.0);
    for (int w : {0, 2, 4, 9}) {
        try {
            sample_depth(df, PixelPoint{5, 5}, w);
            FAIL("expected precondition");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kPrecondition);
        }
    }
    try {
        sample_depth(df, PixelPoint{10, 5}, 3);
        FAIL("expected out-of-bounds");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kOutOfBounds);
    }
    // Windows are clipped at the border.
    CHECK(*sample_depth(df, PixelPoint{0, 0}, 7) == 1.0);
}

TEST_CASE("depth from millimeters marks zeros invalid") {
    const std::vector<std::uint16_t> mm{0, 1500, 2000, 0};
    const auto df = DepthFrame::from_millimeters(2, 2, mm);
    CHECK_FALSE(df.valid(0, 0));
    CHECK(df.valid(0, 1));
    CHECK(df.depth(0, 1) == doctest::Approx(1.5));
    CHECK(df.depth(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("raycast_to_world examples") {
    const auto k = small_k();
    const auto plane = DepthFrame::constant(k.width, k.height, 2.0);
    const auto w = raycast_to_world(PixelPoint{k.cx, k.cy}, plane, k, Pose::identity());
    REQUIRE(w);
    CHECK(w->isApprox(WorldPoint{0, 0, 2}));
    const WorldPoint t{0.5, -1.25, 3};
    const auto shifted = raycast_to_world(PixelPoint{k.cx, k.cy}, plane, k, Pose::from_translation(t));
    REQUIRE(shifted);
    CHECK((*shifted - (WorldPoint{0, 0, 2} + t)).norm() < 1e-12);

    auto empty = plane;
    empty.valid.setConstant(false);
    CHECK_FALSE(raycast_to_world(PixelPoint{k.cx, k.cy}, empty, k, Pose::identity()));
}

TEST_CASE("rigid invariance: raycast under P equals P applied to the identity result") {
    std::mt19937_64 rng(99);
    const auto k = small_k();
    std::uniform_real_distribution<double> depth(0.3, 9);
    std::uniform_real_distribution<double> u(0, k.width - 1), v(0, k.height - 1);
    double worst = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto df = DepthFrame::constant(k.width, k.height, depth(rng));
        const PixelPoint p{u(rng), v(rng)};
        const Pose pose = random_pose(rng);
        REQUIRE(pose.is_valid());
        const auto base = raycast_to_world(p, df, k, Pose::identity());
        const auto moved = raycast_to_world(p, df, k, pose);
        REQUIRE(base);
        REQUIRE(moved);
        worst = std::max(worst, (*moved - pose.to_world(*base)).norm());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("pose composition and inverse transforms agree") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const Pose a = random_pose(rng), b = random_pose(rng);
        const WorldPoint x{0.3, -0.7, 2.1};
        CHECK(((a * b).to_world(x) - a.to_world(b.to_world(x))).norm() < 1e-9);
        CHECK((a.to_camera(a.to_world(x)) - x).norm() < 1e-9);
    }
    Pose bad;
    bad.rotation(0, 0) = 2;
    CHECK_FALSE(bad.is_valid());
    Pose mirrored;
    mirrored.rotation(0, 0) = -1;
    CHECK_FALSE(mirrored.is_valid());
}

TEST_CASE("intrinsics validation") {
    auto k = small_k();
    CHECK_NOTHROW(k.validate());
    k.fx = 0;
    CHECK_THROWS_AS(k.validate(), Error);
    k = small_k();
    k.cx = 640;
    CHECK_FALSE(k.is_valid());
}

TEST_CASE("synthetic box seen from two poses localizes within 2 cm") {
    const auto k = aor::test::vga_intrinsics();
    const Eigen::Vector3d center{1, 0, 2};
    const Eigen::Vector3d half{0.005, 0.005, 0.005};
    std::vector<WorldPoint> anchors;
    for (const Eigen::Vector3d eye : {Eigen::Vector3d{0, 0, 0}, Eigen::Vector3d{0.4, -0.1, 0.2}}) {
        const Pose pose = aor::test::look_at(eye, center);
        const auto r = aor::test::render_box(center - half, center + half, pose, k);
        REQUIRE(r.hits > 0);
        const PixelPoint c{r.bbox.center_u(), r.bbox.center_v()};
        const auto w = raycast_to_world(c, r.depth, k, pose, 1);
        REQUIRE(w);
        CHECK((*w - center).norm() < 0.02);
        anchors.push_back(*w);
    }
    CHECK((anchors[0] - anchors[1]).norm() < 0.02);
}

}  // TEST_SUITE
