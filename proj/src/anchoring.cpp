// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/anchoring.hpp"

#include <charconv>
#include <limits>
#include <set>

#include "aor/error.hpp"

namespace aor::anchoring {

std::string ProxyId::str() const { return "p" + std::to_string(value); }

std::optional<ProxyId> ProxyId::parse(std::string_view text) {
    if (text.size() < 2 || text.front() != 'p') return std::nullopt;
    std::uint32_t value = 0;
    const auto* first = text.data() + 1;
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || value == 0) return std::nullopt;
    return ProxyId{value};
}

bool is_legal_transition(const ProxyState& from, const ProxyState& to) {
    using Kind = ProxyState::Kind;
    switch (from.kind) {
        case Kind::kBubble: return to.kind == Kind::kMenuOpen;
        case Kind::kMenuOpen: return to.kind == Kind::kBubble || to.kind == Kind::kActionActive;
        case Kind::kActionActive: return to.kind == Kind::kMenuOpen;
    }
    return false;
}

std::string to_string(const ProxyState& state) {
    switch (state.kind) {
        case ProxyState::Kind::kBubble: return "bubble";
        case ProxyState::Kind::kMenuOpen: return "menu_open";
        case ProxyState::Kind::kActionActive:
            return "action_active:" + std::string(to_string(state.action.value_or(ActionId::kInfo)));
    }
    return "unknown";
}

std::optional<ProxyState> parse_proxy_state(std::string_view text) {
    if (text == "bubble") return ProxyState::bubble();
    if (text == "menu_open") return ProxyState::menu_open();
    constexpr std::string_view prefix = "action_active:";
    if (text.substr(0, prefix.size()) == prefix) {
        if (auto action = parse_action_id(text.substr(prefix.size()))) {
            return ProxyState::action_active(*action);
        }
    }
    return std::nullopt;
}

ProxyRegistry::ProxyRegistry(double dedup_radius) : dedup_radius_(dedup_radius) {
    if (!(dedup_radius >= 0) || !std::isfinite(dedup_radius)) {
        throw Error(ErrorCode::kValidation, "registry: dedup radius must be finite and >= 0");
    }
}

UpsertPlan ProxyRegistry::plan_upsert(const std::string& label,
                                      const geometry::WorldPoint& world_pos,
                                      const CropRef& crop) const {
    const ObjectProxy* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [id, proxy] : proxies_) {
        if (proxy.label != label) continue;
        const double distance = (proxy.world_pos - world_pos).norm();
        if (distance < dedup_radius_ && distance < best) {
            best = distance;
            nearest = &proxy;
        }
    }
    if (nearest == nullptr) return {ProxyId{next_id_}, true, false};
    return {nearest->id, false, crop.bbox.area() > nearest->crop.bbox.area()};
}

std::pair<ProxyId, bool> ProxyRegistry::upsert(const std::string& label,
                                               const geometry::WorldPoint& world_pos,
                                               const CropRef& crop, std::size_t frame_index) {
    const UpsertPlan plan = plan_upsert(label, world_pos, crop);
    if (plan.spawn) {
        spawn(plan.id, label, world_pos, crop, frame_index);
    } else {
        touch(plan.id, frame_index, plan.replace_crop ? std::optional<CropRef>(crop) : std::nullopt);
    }
    return {plan.id, plan.spawn};
}

void ProxyRegistry::spawn(ProxyId id, const std::string& label,
                          const geometry::WorldPoint& world_pos, const CropRef& crop,
                          std::size_t frame_index) {
    if (id.value < next_id_ || proxies_.count(id)) {
        throw Error(ErrorCode::kState, "registry: proxy id " + id.str() + " already used");
    }
    if (label.empty()) throw Error(ErrorCode::kValidation, "registry: empty label");
    if (!world_pos.allFinite()) throw Error(ErrorCode::kValidation, "registry: non-finite position");
    for (const auto& [other_id, other] : proxies_) {
        if (other.label == label && (other.world_pos - world_pos).norm() < dedup_radius_) {
            throw Error(ErrorCode::kState, "registry: " + id.str() + " would duplicate " +
                                               other_id.str() + " within the dedup radius");
        }
    }
    ObjectProxy proxy;
    proxy.id = id;
    proxy.label = label;
    proxy.world_pos = world_pos;
    proxy.crop = crop;
    proxy.first_seen = frame_index;
    proxy.last_seen = frame_index;
    proxies_.emplace(id, std::move(proxy));
    next_id_ = id.value + 1;
}

void ProxyRegistry::touch(ProxyId id, std::size_t frame_index,
                          const std::optional<CropRef>& new_crop) {
    ObjectProxy& proxy = mutable_get(id);
    if (frame_index < proxy.last_seen) {
        throw Error(ErrorCode::kState, "registry: " + id.str() + " seen at an earlier frame");
    }
    proxy.last_seen = frame_index;
    if (new_crop) proxy.crop = *new_crop;
}

void ProxyRegistry::remove(ProxyId id) {
    if (proxies_.erase(id) == 0) throw Error(ErrorCode::kNotFound, "registry: unknown " + id.str());
}

void ProxyRegistry::check_transition(ProxyId id, const ProxyState& to) const {
    const ObjectProxy& proxy = get(id);
    if (!is_legal_transition(proxy.state, to)) {
        throw Error(ErrorCode::kState, "illegal transition for " + id.str() + ": " +
                                           to_string(proxy.state) + " -> " + to_string(to));
    }
}

ProxyState ProxyRegistry::transition(ProxyId id, const ProxyState& to) {
    check_transition(id, to);
    ObjectProxy& proxy = mutable_get(id);
    proxy.state = to;
    return to;
}

void ProxyRegistry::mark(std::span<const ProxyId> ids) {
    std::set<ProxyId> wanted;
    for (const auto id : ids) {
        if (!contains(id)) throw Error(ErrorCode::kNotFound, "mark: unknown " + id.str());
        wanted.insert(id);
    }
    for (auto& [id, proxy] : proxies_) proxy.marked = wanted.count(id) > 0;
}

void ProxyRegistry::attach_conversation(ProxyId id, const std::string& conversation) {
    ObjectProxy& proxy = mutable_get(id);
    if (proxy.conversation && *proxy.conversation != conversation) {
        throw Error(ErrorCode::kState, "registry: " + id.str() + " already has a conversation");
    }
    proxy.conversation = conversation;
}

void ProxyRegistry::set_refined_label(ProxyId id, const std::string& refined_label) {
    mutable_get(id).refined_label = refined_label;
}

const ObjectProxy& ProxyRegistry::get(ProxyId id) const {
    const auto it = proxies_.find(id);
    if (it == proxies_.end()) throw Error(ErrorCode::kNotFound, "unknown proxy " + id.str());
    return it->second;
}

const ObjectProxy* ProxyRegistry::find(ProxyId id) const {
    const auto it = proxies_.find(id);
    return it == proxies_.end() ? nullptr : &it->second;
}

ObjectProxy& ProxyRegistry::mutable_get(ProxyId id) {
    const auto it = proxies_.find(id);
    if (it == proxies_.end()) throw Error(ErrorCode::kNotFound, "unknown proxy " + id.str());
    return it->second;
}

std::optional<geometry::WorldPoint> localize(const detection::Detection& det,
                                             const geometry::DepthFrame& depth,
                                             const geometry::CameraIntrinsics& k,
                                             const geometry::Pose& pose, int window) {
    const geometry::PixelPoint center{det.bbox.center_u(), det.bbox.center_v()};
    return geometry::raycast_to_world(center, depth, k, pose, window);
}

}  // namespace aor::anchoring
