// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/detection.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "aor/error.hpp"

namespace aor::detection {
using nlohmann::json;

ClassVocabulary::ClassVocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (const auto& label : labels_) {
        if (label.empty()) throw Error(ErrorCode::kValidation, "vocabulary: empty label");
        if (!index_.insert(label).second) {
            throw Error(ErrorCode::kValidation, "vocabulary: duplicate label '" + label + "'");
        }
    }
}

const ClassVocabulary& ClassVocabulary::coco() {
    static const ClassVocabulary vocabulary({
        "person",        "bicycle",      "car",           "motorcycle",    "airplane",
        "bus",           "train",        "truck",         "boat",          "traffic light",
        "fire hydrant",  "stop sign",    "parking meter", "bench",         "bird",
        "cat",           "dog",          "horse",         "sheep",         "cow",
        "elephant",      "bear",         "zebra",         "giraffe",       "backpack",
        "umbrella",      "handbag",      "tie",           "suitcase",      "frisbee",
        "skis",          "snowboard",    "sports ball",   "kite",          "baseball bat",
        "baseball glove", "skateboard",  "surfboard",     "tennis racket", "bottle",
        "wine glass",    "cup",          "fork",          "knife",         "spoon",
        "bowl",          "banana",       "apple",         "sandwich",      "orange",
        "broccoli",      "carrot",       "hot dog",       "pizza",         "donut",
        "cake",          "chair",        "couch",         "potted plant",  "bed",
        "dining table",  "toilet",       "tv",            "laptop",        "mouse",
        "remote",        "keyboard",     "cell phone",    "microwave",     "oven",
        "toaster",       "sink",         "refrigerator",  "book",          "clock",
        "vase",          "scissors",     "teddy bear",    "hair drier",    "toothbrush",
    });
    return vocabulary;
}

bool ClassVocabulary::contains(std::string_view label) const { return index_.count(label) > 0; }

void FilterPolicy::validate() const {
    if (!(min_confidence >= 0 && min_confidence <= 1)) {
        throw Error(ErrorCode::kValidation, "policy: min_confidence must be in [0,1]");
    }
    for (const auto& label : allowlist) {
        if (denylist.count(label)) {
            throw Error(ErrorCode::kValidation,
                        "policy: '" + label + "' is both allowlisted and denylisted");
        }
    }
}

std::string_view to_string(SuppressionReason reason) {
    switch (reason) {
        case SuppressionReason::kDenylisted: return "denylisted";
        case SuppressionReason::kNotAllowlisted: return "not-allowlisted";
        case SuppressionReason::kLowConfidence: return "below-min-confidence";
    }
    return "unknown";
}

PolicyResult apply_policy(std::span<const Detection> detections, const FilterPolicy& policy) {
    PolicyResult result;
    for (const auto& det : detections) {
        if (policy.is_denylisted(det.label)) {
            result.suppressed.push_back({det, SuppressionReason::kDenylisted});
        } else if (!policy.allowlist.empty() && !policy.allowlist.count(det.label)) {
            result.suppressed.push_back({det, SuppressionReason::kNotAllowlisted});
        } else if (det.confidence < policy.min_confidence) {
            result.suppressed.push_back({det, SuppressionReason::kLowConfidence});
        } else {
            result.kept.push_back(det);
        }
    }
    return result;
}

ScriptedDetector::ScriptedDetector(std::shared_ptr<const SceneDirectory> scene,
                                   const ClassVocabulary& vocabulary)
    : scene_(std::move(scene)) {
    if (!scene_->has_ground_truth) {
        throw Error(ErrorCode::kValidation,
                    "scripted detector: scene '" + scene_->name + "' has no detections.jsonl");
    }
    for (const auto& rows : scene_->ground_truth) {
        for (const auto& row : rows) {
            if (!vocabulary.contains(row.label)) {
                throw Error(ErrorCode::kValidation,
                            "scripted detector: label '" + row.label + "' not in the vocabulary");
            }
        }
    }
}

DetectResult ScriptedDetector::detect(const ColorFrame&, std::size_t frame_index) {
    if (frame_index >= scene_->ground_truth.size()) {
        throw Error(ErrorCode::kOutOfRange, "scripted detector: frame index out of range");
    }
    DetectResult result;
    for (const auto& row : scene_->ground_truth[frame_index]) {
        result.detections.push_back({row.label, row.confidence, row.bbox, frame_index});
    }
    return result;
}

HttpDetector::HttpDetector(std::string url, std::chrono::milliseconds timeout,
                           const ClassVocabulary& vocabulary)
    : url_(std::move(url)),
      endpoint_(parse_http_url(url_)),
      timeout_(timeout),
      vocabulary_(&vocabulary) {}

DetectResult HttpDetector::detect(const ColorFrame& frame, std::size_t frame_index) {
    const auto png_bytes = png::encode_rgb(frame);
    const std::string body(png_bytes.begin(), png_bytes.end());
    HttpResult response;
    try {
        response = http_post(endpoint_, body, "image/png", {}, timeout_);
    } catch (const Error& e) {
        throw Error(ErrorCode::kBackendUnavailable, std::string("detector: ") + e.what());
    }
    if (response.status != 200) {
        throw Error(ErrorCode::kBackendUnavailable,
                    "detector: HTTP status " + std::to_string(response.status));
    }
    return parse_detector_response(response.body, frame.width, frame.height, frame_index,
                                   *vocabulary_);
}

DetectResult parse_detector_response(std::string_view body, int width, int height,
                                     std::size_t frame_index, const ClassVocabulary& vocabulary) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kProtocol, std::string("detector: malformed JSON: ") + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorCode::kProtocol, "detector: expected a JSON array");

    DetectResult result;
    const PixelRect frame_rect{0, 0, width, height};
    for (const auto& item : doc) {
        Detection det;
        std::vector<double> box;
        try {
            det.label = item.at("label").get<std::string>();
            det.confidence = item.at("confidence").get<double>();
            box = item.at("bbox").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kProtocol, std::string("detector: bad detection: ") + e.what());
        }
        if (box.size() != 4) throw Error(ErrorCode::kProtocol, "detector: bbox must be [x,y,w,h]");
        for (double v : box) {
            if (!std::isfinite(v)) throw Error(ErrorCode::kProtocol, "detector: non-finite bbox");
        }
        if (!(det.confidence >= 0 && det.confidence <= 1)) {
            throw Error(ErrorCode::kProtocol, "detector: confidence outside [0,1]");
        }
        det.frame_index = frame_index;
        const int x0 = static_cast<int>(std::floor(box[0]));
        const int y0 = static_cast<int>(std::floor(box[1]));
        const int x1 = static_cast<int>(std::ceil(box[0] + box[2]));
        const int y1 = static_cast<int>(std::ceil(box[1] + box[3]));
        const PixelRect original{x0, y0, x1 - x0, y1 - y0};

        if (det.label.empty() || !vocabulary.contains(det.label)) {
            result.clipped.push_back({det.label, original, {}, "unknown-label"});
            continue;
        }
        det.bbox = intersect(original, frame_rect);
        if (det.bbox.empty()) {
            result.clipped.push_back({det.label, original, {}, "outside-frame"});
            continue;
        }
        if (det.bbox != original) {
            result.clipped.push_back({det.label, original, det.bbox, "clipped-to-frame"});
        }
        result.detections.push_back(std::move(det));
    }
    return result;
}

}  // namespace aor::detection
