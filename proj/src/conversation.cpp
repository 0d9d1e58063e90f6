// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/conversation.hpp"

#include <cctype>
#include <sstream>

#include "aor/error.hpp"

namespace aor::conversation {
using mllm::Turn;

namespace {

bool is_blank(std::string_view text) {
    for (unsigned char c : text) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

std::string trim(std::string_view text) {
    std::size_t first = 0;
    std::size_t last = text.size();
    while (first < last && std::isspace(static_cast<unsigned char>(text[first]))) ++first;
    while (last > first && std::isspace(static_cast<unsigned char>(text[last - 1]))) --last;
    return std::string(text.substr(first, last - first));
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) words.push_back(word);
    return words;
}

mllm::ImageAttachment attach(const CropImage& crop, const std::string& label) {
    return {{label}, crop.pixels};
}

std::string run_exchange(ConversationState& state, const mllm::MllmRequest& request,
                         const CropImage& crop, mllm::Client& client) {
    state.append_user(request.prompt(), {crop.ref()});
    try {
        mllm::MllmReply reply = client.query(request);
        state.append_assistant(reply.text);
        return reply.text;
    } catch (const Error& e) {
        state.append_failure(e.what());
        throw Error(ErrorCode::kActionFailed, std::string("action failed: ") + e.what());
    }
}

}  // namespace

void ConversationState::append_user(std::string text, std::vector<CropRef> images) {
    if (awaiting_reply()) {
        throw Error(ErrorCode::kState, "conversation " + id + ": a request is already in flight");
    }
    turns.push_back({Turn::Role::kUser, std::move(text), std::move(images), false});
}

void ConversationState::append_assistant(std::string text) {
    if (!awaiting_reply()) {
        throw Error(ErrorCode::kState, "conversation " + id + ": reply without a request");
    }
    turns.push_back({Turn::Role::kAssistant, std::move(text), {}, false});
}

void ConversationState::append_failure(std::string reason) {
    if (!awaiting_reply()) {
        throw Error(ErrorCode::kState, "conversation " + id + ": failure without a request");
    }
    turns.push_back({Turn::Role::kAssistant, std::move(reason), {}, true});
}

std::vector<Turn> ConversationState::request_history() const {
    std::vector<Turn> out;
    for (std::size_t i = 0; i + 1 < turns.size(); i += 2) {
        if (turns[i + 1].failed) continue;
        out.push_back({Turn::Role::kUser, turns[i].text});
        out.push_back({Turn::Role::kAssistant, turns[i + 1].text});
    }
    return out;
}

std::optional<std::string> ConversationState::last_reply() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (it->role == Turn::Role::kAssistant && !it->failed) return it->text;
    }
    return std::nullopt;
}

std::string conversation_id_for(anchoring::ProxyId proxy) { return "conv-" + proxy.str(); }

std::string ConversationBook::ensure_session(const anchoring::ObjectProxy& proxy, bool* created) {
    const std::string id = proxy.conversation.value_or(conversation_id_for(proxy.id));
    const bool fresh = !contains(id);
    if (fresh) open(id, proxy.id, proxy.crop);
    if (created) *created = fresh;
    return id;
}

ConversationState& ConversationBook::open(const std::string& id,
                                          std::optional<anchoring::ProxyId> proxy,
                                          const CropRef& context_crop) {
    if (contains(id)) throw Error(ErrorCode::kState, "conversation " + id + " already exists");
    ConversationState state;
    state.id = id;
    state.proxy = proxy;
    state.context_crop = context_crop;
    return conversations_.emplace(id, std::move(state)).first->second;
}

const ConversationState& ConversationBook::get(const std::string& id) const {
    const auto it = conversations_.find(id);
    if (it == conversations_.end()) throw Error(ErrorCode::kNotFound, "unknown conversation " + id);
    return it->second;
}

ConversationState& ConversationBook::get(const std::string& id) {
    const auto it = conversations_.find(id);
    if (it == conversations_.end()) throw Error(ErrorCode::kNotFound, "unknown conversation " + id);
    return it->second;
}

mllm::MllmRequest build_summary_request(const ConversationState& state, const CropImage& crop,
                                        const std::string& label,
                                        const detection::FilterPolicy& policy) {
    return mllm::MllmRequest::create(state.id, state.request_history(), {attach(crop, label)},
                                     std::string(kInfoSummary.text), policy);
}

mllm::MllmRequest build_ask_request(const ConversationState& state, const std::string& question,
                                    const CropImage& crop, const std::string& label,
                                    const detection::FilterPolicy& policy) {
    if (is_blank(question)) throw Error(ErrorCode::kPrecondition, "ask: empty question");
    return mllm::MllmRequest::create(state.id, state.request_history(), {attach(crop, label)},
                                     question, policy);
}

std::string summarize(ConversationBook& book, const anchoring::ObjectProxy& proxy,
                      const CropImage& crop, mllm::Client& client,
                      const detection::FilterPolicy& policy) {
    ConversationState& state = book.get(book.ensure_session(proxy));
    const auto request = build_summary_request(state, crop, proxy.label, policy);
    return run_exchange(state, request, crop, client);
}

std::string ask(ConversationBook& book, const anchoring::ObjectProxy& proxy,
                const std::string& question, const CropImage& crop, mllm::Client& client,
                const detection::FilterPolicy& policy) {
    if (is_blank(question)) throw Error(ErrorCode::kPrecondition, "ask: empty question");
    ConversationState& state = book.get(book.ensure_session(proxy));
    const auto request = build_ask_request(state, question, crop, proxy.label, policy);
    return run_exchange(state, request, crop, client);
}

std::string truncate_words(std::string_view text, std::size_t max_words) {
    const auto words = split_words(text);
    if (words.size() <= max_words) return std::string(text);
    std::string out;
    for (std::size_t i = 0; i < max_words; ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out + " …";
}

std::optional<std::string> refined_label_from_summary(std::string_view summary) {
    const auto star = summary.find('*');
    if (star == std::string_view::npos) return std::nullopt;
    std::string head = trim(summary.substr(0, star));
    while (!head.empty() && (head.back() == ':' || head.back() == '-' || head.back() == ',')) {
        head.pop_back();
        head = trim(head);
    }
    const auto words = split_words(head);
    if (words.empty() || words.size() > 8) return std::nullopt;
    return head;
}

}  // namespace aor::conversation
