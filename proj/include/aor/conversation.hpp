// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aor/anchoring.hpp"
#include "aor/detection.hpp"
#include "aor/image.hpp"
#include "aor/mllm_client.hpp"

namespace aor::conversation {

struct PromptTemplate {
    std::string_view name;
    std::string_view text;
};

/// Sent verbatim when the Info action runs. Pinned by a fixture test.
inline constexpr std::string_view kInfoSummaryPrompt =
    "Provide the information from the following list that makes sense for this object. "
    "Fill in the missing “…” using info from the Internet. "
    "Exclude the one that are irrelevant. "
    "Divide the relevant ones with a “*”. "
    "* Price: … (give price+vendor+score/ rating) "
    "* Cheaper alternatives: name - price "
    "* Main ingredients: … (top 2) "
    "* Calories: … "
    "* Allergens: … "
    "* Instructions: … (short) "
    "* Care: …(if fashion/tool/plant). "
    "Use extremely short answers and exclude answers that are ‘None’ or ‘n/a’ "
    "or ‘irrelevant’. Limit to 30 words.";

inline constexpr PromptTemplate kInfoSummary{"info_summary", kInfoSummaryPrompt};

/// Replies are shown truncated to this many words.
inline constexpr std::size_t kDisplayWordLimit = 60;

struct ConversationTurn {
    mllm::Turn::Role role{mllm::Turn::Role::kUser};
    std::string text;
    std::vector<CropRef> images;
    /// Assistant-slot marker recorded when the backend failed.
    bool failed{false};

    friend bool operator==(const ConversationTurn&, const ConversationTurn&) = default;
};

/// One dialogue. Turns alternate user/assistant starting with user and are
/// never rewritten.
struct ConversationState {
    std::string id;
    std::optional<anchoring::ProxyId> proxy;  // empty for comparer jobs
    CropRef context_crop;
    std::vector<ConversationTurn> turns;

    bool awaiting_reply() const {
        return !turns.empty() && turns.back().role == mllm::Turn::Role::kUser;
    }

    void append_user(std::string text, std::vector<CropRef> images);
    void append_assistant(std::string text);
    void append_failure(std::string reason);

    /// Prior turns as sent to the model; exchanges whose reply failed are left out.
    std::vector<mllm::Turn> request_history() const;
    /// Text of the latest successful assistant turn, if any.
    std::optional<std::string> last_reply() const;

    friend bool operator==(const ConversationState&, const ConversationState&) = default;
};

/// "conv-p<n>"
std::string conversation_id_for(anchoring::ProxyId proxy);

/// All conversations of a session keyed by id.
class ConversationBook {
public:
    /// Returns the proxy's conversation id, creating the conversation when
    /// it does not exist yet. `created` reports which case happened.
    std::string ensure_session(const anchoring::ObjectProxy& proxy, bool* created = nullptr);

    /// Creates a conversation with an explicit id; throws kState if it exists.
    ConversationState& open(const std::string& id, std::optional<anchoring::ProxyId> proxy,
                            const CropRef& context_crop);

    bool contains(const std::string& id) const { return conversations_.count(id) > 0; }
    const ConversationState& get(const std::string& id) const;
    ConversationState& get(const std::string& id);
    const std::map<std::string, ConversationState>& all() const { return conversations_; }

    friend bool operator==(const ConversationBook&, const ConversationBook&) = default;

private:
    std::map<std::string, ConversationState> conversations_;
};

/// Builds the Info request: the pinned summary prompt plus the crop.
mllm::MllmRequest build_summary_request(const ConversationState& state, const CropImage& crop,
                                        const std::string& label,
                                        const detection::FilterPolicy& policy);

/// Builds an Ask request. Throws kPrecondition for a blank question.
mllm::MllmRequest build_ask_request(const ConversationState& state, const std::string& question,
                                    const CropImage& crop, const std::string& label,
                                    const detection::FilterPolicy& policy);

/// Runs the Info action on the proxy's conversation (created on demand) and
/// returns the model's full reply. Backend failures are recorded in the
/// history and rethrown as kActionFailed.
std::string summarize(ConversationBook& book, const anchoring::ObjectProxy& proxy,
                      const CropImage& crop, mllm::Client& client,
                      const detection::FilterPolicy& policy);

std::string ask(ConversationBook& book, const anchoring::ObjectProxy& proxy,
                const std::string& question, const CropImage& crop, mllm::Client& client,
                const detection::FilterPolicy& policy);

/// Keeps the first `max_words` whitespace-separated words and appends " …"
/// when anything was cut.
std::string truncate_words(std::string_view text, std::size_t max_words = kDisplayWordLimit);

/// The product name a summary leads with: the text before the first "*",
/// when it is between 1 and 8 words.
std::optional<std::string> refined_label_from_summary(std::string_view summary);

}  // namespace aor::conversation
