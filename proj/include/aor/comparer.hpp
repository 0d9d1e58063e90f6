// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Multi-object questions: crops of the selected proxies are stitched left to
// right (screen order), sent to a fresh comparer conversation, and for
// "which" questions a second query asks for the matching indices so the
// matching proxies can be marked.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aor/anchoring.hpp"
#include "aor/conversation.hpp"
#include "aor/geometry.hpp"
#include "aor/image.hpp"
#include "aor/mllm_client.hpp"

namespace aor::comparer {

/// Appended to the user's prompt for the index follow-up. Pinned by a
/// fixture test.
inline constexpr std::string_view kIndexingSubPrompt =
    "Considering that the items are ordered from left to right with the first object being "
    "index 0, tell me ONLY the correct indices, written as numbers.";

inline constexpr int kSeparatorWidth = 8;

/// Horizontal concatenation with an 8 px black gap between neighbors; every
/// crop is top-aligned and padded with black to the tallest height.
/// Throws kPrecondition for fewer than two crops.
CropImage stitch(std::span<const CropImage> crops);

/// True iff "which" occurs as a standalone word, ignoring case.
bool is_which_question(std::string_view prompt);

/// Every base-10 integer in the reply, deduplicated and sorted. Throws
/// kParse when there is none and kOutOfRange when any lies outside [0, n).
std::vector<int> extract_indices(std::string_view reply, int n);

/// user prompt + " " + indexing sub-prompt
std::string indexing_reprompt(std::string_view user_prompt);

/// Sorts proxies by the u coordinate of their projected anchors (ties by
/// id). Throws kPrecondition when an anchor is behind the camera.
std::vector<anchoring::ProxyId> order_by_screen_x(const anchoring::ProxyRegistry& registry,
                                                  std::span<const anchoring::ProxyId> ids,
                                                  const geometry::Pose& pose,
                                                  const geometry::CameraIntrinsics& k);

using CropResolver = std::function<CropImage(const anchoring::ObjectProxy&)>;

/// Everything decided before the first query goes out.
struct ComparerPlan {
    std::vector<anchoring::ProxyId> ordered;
    std::vector<std::string> labels;  // in `ordered` order
    CropImage stitched;
    std::string user_prompt;
    bool which_question{false};
};

ComparerPlan plan_compare(const anchoring::ProxyRegistry& registry,
                          std::span<const anchoring::ProxyId> ids, const std::string& prompt,
                          const geometry::Pose& pose, const geometry::CameraIntrinsics& k,
                          const CropResolver& crops);

struct Exchange {
    std::string prompt;
    std::vector<mllm::Turn> history;
    std::optional<mllm::MllmReply> reply;  // empty on failure
    std::string error;
};

/// Result of running the plan's queries; touches no session state.
struct ComparerOutcome {
    std::vector<Exchange> exchanges;
    std::string answer;
    std::optional<std::vector<int>> indices;
    std::optional<std::string> error;
};

/// One query for plain prompts, two for "which" prompts. Failures end the
/// job early and land in `error`.
ComparerOutcome run_compare_queries(const ComparerPlan& plan, const std::string& conversation_id,
                                    mllm::Client& client, const detection::FilterPolicy& policy);

struct ComparerJob {
    std::string conversation_id;
    std::vector<anchoring::ProxyId> proxies;
    CropImage stitched;
    std::string user_prompt;
    std::string answer;
    std::optional<std::vector<int>> indices;
    std::optional<std::string> error;
};

/// Full comparer flow: plan, query, record both exchanges in a fresh
/// conversation, and mark the proxies the indices point at.
ComparerJob compare(anchoring::ProxyRegistry& registry, std::span<const anchoring::ProxyId> ids,
                    const std::string& prompt, const geometry::Pose& pose,
                    const geometry::CameraIntrinsics& k, const CropResolver& crops,
                    conversation::ConversationBook& book, const std::string& conversation_id,
                    mllm::Client& client, const detection::FilterPolicy& policy);

/// Proxies selected by the indices, in `ordered` position order.
std::vector<anchoring::ProxyId> indices_to_proxies(std::span<const anchoring::ProxyId> ordered,
                                                   std::span<const int> indices);

}  // namespace aor::comparer
