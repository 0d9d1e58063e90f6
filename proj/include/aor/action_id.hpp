// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string_view>

namespace aor {

enum class ActionCategory { kInformation, kCompare, kShare, kAnchor };

enum class ActionId {
    kInfo,
    kAsk,
    kCompare,
    kSendToContact,
    kAddToShoppingList,
    kNote,
    kTimer,
    kCountdown,
};

std::string_view to_string(ActionCategory category);
std::string_view to_string(ActionId action);
std::optional<ActionId> parse_action_id(std::string_view text);
std::optional<ActionCategory> parse_action_category(std::string_view text);

}  // namespace aor
