// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Session state as a left fold over the event log. The live session mutates
// state only by applying the events it emits, so replaying a log through
// apply() reconstructs exactly what the live session held.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aor/actions.hpp"
#include "aor/anchoring.hpp"
#include "aor/conversation.hpp"
#include "aor/detection.hpp"
#include "aor/service/events.hpp"

namespace aor::service {

struct ComparerRecord {
    std::string job;
    std::string conversation;
    std::vector<anchoring::ProxyId> proxies;  // left-to-right order
    std::string prompt;
    std::string answer;
    std::optional<std::vector<int>> indices;
    std::optional<std::string> error;

    friend bool operator==(const ComparerRecord&, const ComparerRecord&) = default;
};

struct ErrorRecord {
    std::uint64_t seq{0};
    std::string code;
    std::string reason;

    friend bool operator==(const ErrorRecord&, const ErrorRecord&) = default;
};

/// "cmp-<n>"
std::string comparer_job_id(std::uint32_t n);

class SessionState {
public:
    /// Validates the event against the current state and folds it in.
    /// Throws Error(kLog) naming the event's seq; on throw the state is
    /// unspecified and should be discarded.
    void apply(const SessionEvent& event);

    /// Folds a whole log from the empty state.
    static SessionState fold(std::span<const SessionEvent> events);

    /// Canonical JSON rendering; equal states render byte-identically.
    nlohmann::json to_json() const;

    bool started() const { return started_; }
    std::uint64_t last_seq() const { return last_seq_; }
    std::int64_t now_ms() const { return now_ms_; }
    std::optional<std::size_t> current_frame() const { return current_frame_; }
    std::size_t frames_processed() const { return frames_processed_; }
    const nlohmann::json& config() const { return config_; }
    const detection::FilterPolicy& policy() const { return policy_; }

    const anchoring::ProxyRegistry& registry() const { return registry_; }
    const conversation::ConversationBook& conversations() const { return conversations_; }
    const actions::WidgetBoard& widgets() const { return widgets_; }
    const actions::ShoppingList& shopping() const { return shopping_; }
    const std::vector<actions::SharePayload>& shares() const { return shares_; }
    const std::vector<ComparerRecord>& comparer_jobs() const { return comparer_jobs_; }
    const std::vector<ErrorRecord>& errors() const { return errors_; }
    std::uint32_t next_comparer_job() const { return comparer_jobs_opened_ + 1; }

    friend bool operator==(const SessionState&, const SessionState&) = default;

private:
    void apply_unchecked(const SessionEvent& event);

    bool started_{false};
    std::uint64_t last_seq_{0};
    std::int64_t now_ms_{0};
    std::optional<std::size_t> current_frame_;
    std::size_t frames_processed_{0};
    nlohmann::json config_ = nlohmann::json::object();
    detection::FilterPolicy policy_;

    anchoring::ProxyRegistry registry_;
    conversation::ConversationBook conversations_;
    actions::WidgetBoard widgets_;
    actions::ShoppingList shopping_;
    std::vector<actions::SharePayload> shares_;
    std::vector<ComparerRecord> comparer_jobs_;
    std::uint32_t comparer_jobs_opened_{0};
    std::vector<ErrorRecord> errors_;
    std::set<actions::WidgetId> unreported_fires_;
    std::set<actions::WidgetId> reported_fires_;
};

nlohmann::json proxy_to_json(const anchoring::ObjectProxy& proxy);
nlohmann::json conversation_to_json(const conversation::ConversationState& conv);
nlohmann::json policy_to_json(const detection::FilterPolicy& policy);
detection::FilterPolicy policy_from_json(const nlohmann::json& j);

}  // namespace aor::service
