// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aor/action_id.hpp"
#include "aor/detection.hpp"
#include "aor/geometry.hpp"
#include "aor/image.hpp"

namespace aor::anchoring {

struct ProxyId {
    std::uint32_t value{0};

    /// "p<value>"
    std::string str() const;
    static std::optional<ProxyId> parse(std::string_view text);

    friend auto operator<=>(const ProxyId&, const ProxyId&) = default;
};

/// Bubble -> MenuOpen (select), MenuOpen -> Bubble (dismiss),
/// MenuOpen -> ActionActive (dispatch), ActionActive -> MenuOpen (complete).
struct ProxyState {
    enum class Kind { kBubble, kMenuOpen, kActionActive };

    Kind kind{Kind::kBubble};
    std::optional<ActionId> action;  // set iff kind == kActionActive

    static ProxyState bubble() { return {}; }
    static ProxyState menu_open() { return {Kind::kMenuOpen, std::nullopt}; }
    static ProxyState action_active(ActionId id) { return {Kind::kActionActive, id}; }

    friend bool operator==(const ProxyState&, const ProxyState&) = default;
};

bool is_legal_transition(const ProxyState& from, const ProxyState& to);
std::string to_string(const ProxyState& state);
/// Inverse of to_string: "bubble", "menu_open", "action_active:<action>".
std::optional<ProxyState> parse_proxy_state(std::string_view text);

struct ObjectProxy {
    ProxyId id;
    std::string label;
    std::optional<std::string> refined_label;
    geometry::WorldPoint world_pos = geometry::WorldPoint::Zero();
    CropRef crop;
    ProxyState state;
    std::optional<std::string> conversation;
    std::size_t first_seen{0};
    std::size_t last_seen{0};
    bool marked{false};

    friend bool operator==(const ObjectProxy&, const ObjectProxy&) = default;
};

inline constexpr double kDefaultDedupRadius = 0.3;

/// What upsert would do, computed without mutating the registry.
struct UpsertPlan {
    ProxyId id;
    bool spawn{false};
    bool replace_crop{false};
};

/// World-anchored proxies keyed by id. Invariant: no two proxies with the
/// same label lie closer than the dedup radius.
class ProxyRegistry {
public:
    explicit ProxyRegistry(double dedup_radius = kDefaultDedupRadius);

    double dedup_radius() const { return dedup_radius_; }

    UpsertPlan plan_upsert(const std::string& label, const geometry::WorldPoint& world_pos,
                           const CropRef& crop) const;

    /// Returns (id, spawned). Same-label proxies within the radius absorb the
    /// observation: last_seen advances and the crop is swapped for a larger one.
    /// Positions never move once set.
    std::pair<ProxyId, bool> upsert(const std::string& label, const geometry::WorldPoint& world_pos,
                                    const CropRef& crop, std::size_t frame_index);

    /// Low-level mutations, each validated. Used by upsert and by the session
    /// fold when it replays recorded decisions.
    void spawn(ProxyId id, const std::string& label, const geometry::WorldPoint& world_pos,
               const CropRef& crop, std::size_t frame_index);
    void touch(ProxyId id, std::size_t frame_index, const std::optional<CropRef>& new_crop);
    void remove(ProxyId id);

    /// Throws kNotFound / kState without mutating.
    void check_transition(ProxyId id, const ProxyState& to) const;
    ProxyState transition(ProxyId id, const ProxyState& to);

    ProxyState select(ProxyId id) { return transition(id, ProxyState::menu_open()); }
    ProxyState dismiss(ProxyId id) { return transition(id, ProxyState::bubble()); }
    ProxyState begin_action(ProxyId id, ActionId action) {
        return transition(id, ProxyState::action_active(action));
    }
    ProxyState complete_action(ProxyId id) { return transition(id, ProxyState::menu_open()); }

    /// Exactly the listed proxies end up marked. Unknown ids throw kNotFound
    /// before anything changes.
    void mark(std::span<const ProxyId> ids);

    void attach_conversation(ProxyId id, const std::string& conversation);
    void set_refined_label(ProxyId id, const std::string& refined_label);

    bool contains(ProxyId id) const { return proxies_.count(id) > 0; }
    const ObjectProxy& get(ProxyId id) const;
    const ObjectProxy* find(ProxyId id) const;
    const std::map<ProxyId, ObjectProxy>& proxies() const { return proxies_; }
    std::size_t size() const { return proxies_.size(); }
    ProxyId next_id() const { return {next_id_}; }

    friend bool operator==(const ProxyRegistry&, const ProxyRegistry&) = default;

private:
    ObjectProxy& mutable_get(ProxyId id);

    double dedup_radius_;
    std::map<ProxyId, ObjectProxy> proxies_;
    std::uint32_t next_id_{1};
};

/// World position of a detection: depth-sampled raycast through the bbox center.
std::optional<geometry::WorldPoint> localize(const detection::Detection& det,
                                             const geometry::DepthFrame& depth,
                                             const geometry::CameraIntrinsics& k,
                                             const geometry::Pose& pose,
                                             int window = geometry::kDefaultDepthWindow);

}  // namespace aor::anchoring
