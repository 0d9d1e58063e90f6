// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// JSON shapes shared by the event log, snapshots and the outbox files.

#pragma once

#include <nlohmann/json.hpp>

#include "aor/geometry.hpp"
#include "aor/image.hpp"

namespace aor::codec {

nlohmann::json rect(const PixelRect& r);                 // [x, y, w, h]
PixelRect rect_from(const nlohmann::json& j);
nlohmann::json point(const geometry::WorldPoint& p);     // [x, y, z]
geometry::WorldPoint point_from(const nlohmann::json& j);
nlohmann::json crop_ref(const CropRef& c);               // {"frame": n, "bbox": [...]}
CropRef crop_ref_from(const nlohmann::json& j);

}  // namespace aor::codec
