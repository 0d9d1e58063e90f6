// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/action_id.hpp"

#include <array>
#include <utility>

namespace aor {
namespace {

constexpr std::array<std::pair<ActionId, std::string_view>, 8> kActionNames{{
    {ActionId::kInfo, "info"},
    {ActionId::kAsk, "ask"},
    {ActionId::kCompare, "compare"},
    {ActionId::kSendToContact, "send_to_contact"},
    {ActionId::kAddToShoppingList, "add_to_shopping_list"},
    {ActionId::kNote, "note"},
    {ActionId::kTimer, "timer"},
    {ActionId::kCountdown, "countdown"},
}};

constexpr std::array<std::pair<ActionCategory, std::string_view>, 4> kCategoryNames{{
    {ActionCategory::kInformation, "information"},
    {ActionCategory::kCompare, "compare"},
    {ActionCategory::kShare, "share"},
    {ActionCategory::kAnchor, "anchor"},
}};

}  // namespace

std::string_view to_string(ActionId action) {
    for (const auto& [id, name] : kActionNames) {
        if (id == action) return name;
    }
    return "unknown";
}

std::string_view to_string(ActionCategory category) {
    for (const auto& [id, name] : kCategoryNames) {
        if (id == category) return name;
    }
    return "unknown";
}

std::optional<ActionId> parse_action_id(std::string_view text) {
    for (const auto& [id, name] : kActionNames) {
        if (name == text) return id;
    }
    return std::nullopt;
}

std::optional<ActionCategory> parse_action_category(std::string_view text) {
    for (const auto& [id, name] : kCategoryNames) {
        if (name == text) return id;
    }
    return std::nullopt;
}

}  // namespace aor
