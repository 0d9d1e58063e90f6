// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/json_codec.hpp"

#include "aor/error.hpp"

namespace aor::codec {
using nlohmann::json;

json rect(const PixelRect& r) { return json::array({r.x, r.y, r.w, r.h}); }

PixelRect rect_from(const json& j) {
    if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::kParse, "bbox must be [x,y,w,h]");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

json point(const geometry::WorldPoint& p) { return json::array({p.x(), p.y(), p.z()}); }

geometry::WorldPoint point_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kParse, "point must be [x,y,z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json crop_ref(const CropRef& c) { return {{"frame", c.frame_index}, {"bbox", rect(c.bbox)}}; }

CropRef crop_ref_from(const json& j) {
    return {j.at("frame").get<std::size_t>(), rect_from(j.at("bbox"))};
}

}  // namespace aor::codec
