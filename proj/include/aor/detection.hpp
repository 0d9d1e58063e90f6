// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aor/http_endpoint.hpp"
#include "aor/image.hpp"
#include "aor/scene_io.hpp"

namespace aor::detection {

struct Detection {
    std::string label;
    double confidence{0};
    PixelRect bbox;
    std::size_t frame_index{0};

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Ordered, duplicate-free list of class labels.
class ClassVocabulary {
public:
    explicit ClassVocabulary(std::vector<std::string> labels);

    /// The 80 COCO detection classes in their canonical order.
    static const ClassVocabulary& coco();

    bool contains(std::string_view label) const;
    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }

private:
    std::vector<std::string> labels_;
    std::set<std::string, std::less<>> index_;
};

inline constexpr double kDefaultMinConfidence = 0.5;

struct FilterPolicy {
    /// Never forwarded to the MLLM client.
    std::set<std::string, std::less<>> denylist{"person"};
    /// Empty means "every label not denylisted".
    std::set<std::string, std::less<>> allowlist;
    double min_confidence{kDefaultMinConfidence};

    /// Throws kValidation when lists overlap or the threshold is outside [0,1].
    void validate() const;
    bool is_denylisted(std::string_view label) const { return denylist.count(label) > 0; }

    friend bool operator==(const FilterPolicy&, const FilterPolicy&) = default;
};

enum class SuppressionReason { kDenylisted, kNotAllowlisted, kLowConfidence };

std::string_view to_string(SuppressionReason reason);

struct Suppressed {
    Detection detection;
    SuppressionReason reason;
};

struct PolicyResult {
    std::vector<Detection> kept;
    std::vector<Suppressed> suppressed;
};

/// Splits detections into kept/suppressed, preserving input order in both.
/// Denylisting is checked first, then the allowlist, then confidence.
PolicyResult apply_policy(std::span<const Detection> detections, const FilterPolicy& policy);

/// A detection whose bbox was modified or that was dropped on arrival.
struct ClipNote {
    std::string label;
    PixelRect original;
    PixelRect clipped;  // empty when the detection was dropped
    std::string reason;
};

struct DetectResult {
    std::vector<Detection> detections;
    std::vector<ClipNote> clipped;
};

class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;
    virtual DetectResult detect(const ColorFrame& frame, std::size_t frame_index) = 0;
    virtual std::string name() const = 0;
};

/// Replays a scene's detections.jsonl verbatim.
class ScriptedDetector final : public DetectorBackend {
public:
    explicit ScriptedDetector(std::shared_ptr<const SceneDirectory> scene,
                              const ClassVocabulary& vocabulary = ClassVocabulary::coco());

    DetectResult detect(const ColorFrame& frame, std::size_t frame_index) override;
    std::string name() const override { return "scripted"; }

private:
    std::shared_ptr<const SceneDirectory> scene_;
};

inline constexpr std::chrono::milliseconds kDefaultDetectorTimeout{5000};

/// Posts each frame as PNG to an external detector service and parses the
/// JSON array it returns (docs/detector-api.md).
class HttpDetector final : public DetectorBackend {
public:
    HttpDetector(std::string url, std::chrono::milliseconds timeout = kDefaultDetectorTimeout,
                 const ClassVocabulary& vocabulary = ClassVocabulary::coco());

    DetectResult detect(const ColorFrame& frame, std::size_t frame_index) override;
    std::string name() const override { return "http:" + url_; }

private:
    std::string url_;
    HttpEndpoint endpoint_;
    std::chrono::milliseconds timeout_;
    const ClassVocabulary* vocabulary_;
};

/// Parses a detector service response body. Boxes are [x, y, w, h] in
/// (possibly fractional) pixels; they are snapped outward to whole pixels and
/// clipped to the frame. Throws kProtocol for malformed bodies.
DetectResult parse_detector_response(std::string_view body, int width, int height,
                                     std::size_t frame_index,
                                     const ClassVocabulary& vocabulary = ClassVocabulary::coco());

}  // namespace aor::detection
