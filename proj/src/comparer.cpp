// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/comparer.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <set>

#include "aor/error.hpp"

namespace aor::comparer {
using anchoring::ProxyId;

CropImage stitch(std::span<const CropImage> crops) {
    if (crops.size() < 2) throw Error(ErrorCode::kPrecondition, "stitch: need at least two crops");
    int width = 0;
    int height = 0;
    for (const auto& c : crops) {
        if (!c.pixels.is_valid()) throw Error(ErrorCode::kPrecondition, "stitch: empty crop");
        width += c.pixels.width;
        height = std::max(height, c.pixels.height);
    }
    width += kSeparatorWidth * static_cast<int>(crops.size() - 1);

    CropImage out;
    out.bbox = {0, 0, width, height};
    out.pixels = ColorFrame(width, height);
    int x = 0;
    for (const auto& c : crops) {
        const std::size_t row_bytes = static_cast<std::size_t>(c.pixels.width) * 3;
        for (int r = 0; r < c.pixels.height; ++r) {
            std::memcpy(out.pixels.pixel(x, r), c.pixels.pixel(0, r), row_bytes);
        }
        x += c.pixels.width + kSeparatorWidth;
    }
    return out;
}

bool is_which_question(std::string_view prompt) {
    std::string word;
    auto flush = [&word] {
        const bool hit = word == "which";
        word.clear();
        return hit;
    };
    for (unsigned char c : prompt) {
        if (std::isalnum(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else if (flush()) {
            return true;
        }
    }
    return flush();
}

std::vector<int> extract_indices(std::string_view reply, int n) {
    if (n < 1) throw Error(ErrorCode::kPrecondition, "extract_indices: n must be >= 1");
    std::set<long long> found;
    bool any = false;
    bool out_of_range = false;
    for (std::size_t i = 0; i < reply.size();) {
        if (!std::isdigit(static_cast<unsigned char>(reply[i]))) {
            ++i;
            continue;
        }
        // A digit run glued to letters ("p2", "3rd") is not a number token.
        const bool glued_before = i > 0 && std::isalpha(static_cast<unsigned char>(reply[i - 1]));
        const bool negative = i > 0 && reply[i - 1] == '-' &&
                              (i < 2 || !std::isalnum(static_cast<unsigned char>(reply[i - 2])));
        std::size_t j = i;
        long long value = 0;
        bool overflow = false;
        while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) {
            if (value > 1'000'000'000LL) overflow = true;
            value = value * 10 + (reply[j] - '0');
            ++j;
        }
        const bool glued_after = j < reply.size() && std::isalpha(static_cast<unsigned char>(reply[j]));
        i = j;
        if (glued_before || glued_after) continue;
        any = true;
        if (negative || overflow || value >= n) {
            out_of_range = true;
            continue;
        }
        found.insert(value);
    }
    if (!any) throw Error(ErrorCode::kParse, "extract_indices: no integer in reply");
    if (out_of_range) throw Error(ErrorCode::kOutOfRange, "extract_indices: index outside [0, n)");
    return {found.begin(), found.end()};
}

std::string indexing_reprompt(std::string_view user_prompt) {
    return std::string(user_prompt) + " " + std::string(kIndexingSubPrompt);
}

std::vector<ProxyId> order_by_screen_x(const anchoring::ProxyRegistry& registry,
                                       std::span<const ProxyId> ids, const geometry::Pose& pose,
                                       const geometry::CameraIntrinsics& k) {
    std::vector<std::pair<double, ProxyId>> keyed;
    for (const auto id : ids) {
        const auto& proxy = registry.get(id);
        const auto pixel = geometry::project(proxy.world_pos, pose, k);
        if (!pixel) {
            throw Error(ErrorCode::kPrecondition, "compare: " + id.str() + " is behind the camera");
        }
        keyed.emplace_back(pixel->x(), id);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<ProxyId> out;
    for (const auto& [u, id] : keyed) out.push_back(id);
    return out;
}

ComparerPlan plan_compare(const anchoring::ProxyRegistry& registry, std::span<const ProxyId> ids,
                          const std::string& prompt, const geometry::Pose& pose,
                          const geometry::CameraIntrinsics& k, const CropResolver& crops) {
    if (ids.size() < 2) throw Error(ErrorCode::kPrecondition, "compare: need at least two proxies");
    if (std::set<ProxyId>(ids.begin(), ids.end()).size() != ids.size()) {
        throw Error(ErrorCode::kPrecondition, "compare: duplicate proxy");
    }
    if (std::all_of(prompt.begin(), prompt.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
        throw Error(ErrorCode::kPrecondition, "compare: empty prompt");
    }
    ComparerPlan plan;
    plan.ordered = order_by_screen_x(registry, ids, pose, k);
    std::vector<CropImage> images;
    for (const auto id : plan.ordered) {
        const auto& proxy = registry.get(id);
        plan.labels.push_back(proxy.label);
        images.push_back(crops(proxy));
    }
    plan.stitched = stitch(images);
    plan.user_prompt = prompt;
    plan.which_question = is_which_question(prompt);
    return plan;
}

ComparerOutcome run_compare_queries(const ComparerPlan& plan, const std::string& conversation_id,
                                    mllm::Client& client, const detection::FilterPolicy& policy) {
    ComparerOutcome outcome;
    std::vector<mllm::Turn> history;
    auto exchange = [&](const std::string& prompt) -> std::optional<std::string> {
        Exchange ex;
        ex.prompt = prompt;
        ex.history = history;
        try {
            const auto request = mllm::MllmRequest::create(
                conversation_id, history, {{plan.labels, plan.stitched.pixels}}, prompt, policy);
            ex.reply = client.query(request);
        } catch (const Error& e) {
            ex.error = e.what();
            outcome.error = "action failed: " + std::string(e.what());
            outcome.exchanges.push_back(std::move(ex));
            return std::nullopt;
        }
        const std::string text = ex.reply->text;
        history.push_back({mllm::Turn::Role::kUser, prompt});
        history.push_back({mllm::Turn::Role::kAssistant, text});
        outcome.exchanges.push_back(std::move(ex));
        return text;
    };

    const auto answer = exchange(plan.user_prompt);
    if (!answer) return outcome;
    outcome.answer = *answer;
    if (!plan.which_question) return outcome;

    const auto index_reply = exchange(indexing_reprompt(plan.user_prompt));
    if (!index_reply) return outcome;
    try {
        outcome.indices = extract_indices(*index_reply, static_cast<int>(plan.ordered.size()));
    } catch (const Error& e) {
        outcome.error = "index reply rejected: " + std::string(e.what());
    }
    return outcome;
}

std::vector<ProxyId> indices_to_proxies(std::span<const ProxyId> ordered,
                                        std::span<const int> indices) {
    std::vector<ProxyId> out;
    for (int index : indices) {
        if (index < 0 || static_cast<std::size_t>(index) >= ordered.size()) {
            throw Error(ErrorCode::kOutOfRange, "index outside the compared set");
        }
        out.push_back(ordered[static_cast<std::size_t>(index)]);
    }
    return out;
}

ComparerJob compare(anchoring::ProxyRegistry& registry, std::span<const ProxyId> ids,
                    const std::string& prompt, const geometry::Pose& pose,
                    const geometry::CameraIntrinsics& k, const CropResolver& crops,
                    conversation::ConversationBook& book, const std::string& conversation_id,
                    mllm::Client& client, const detection::FilterPolicy& policy) {
    const ComparerPlan plan = plan_compare(registry, ids, prompt, pose, k, crops);
    const ComparerOutcome outcome = run_compare_queries(plan, conversation_id, client, policy);

    auto& state = book.open(conversation_id, std::nullopt, plan.stitched.ref());
    for (const auto& ex : outcome.exchanges) {
        state.append_user(ex.prompt, {});
        if (ex.reply) {
            state.append_assistant(ex.reply->text);
        } else {
            state.append_failure(ex.error);
        }
    }

    ComparerJob job;
    job.conversation_id = conversation_id;
    job.proxies = plan.ordered;
    job.stitched = plan.stitched;
    job.user_prompt = plan.user_prompt;
    job.answer = outcome.answer;
    job.indices = outcome.indices;
    job.error = outcome.error;
    if (job.indices && !job.error) {
        const auto marked = indices_to_proxies(job.proxies, *job.indices);
        registry.mark(marked);
    }
    return job;
}

}  // namespace aor::comparer
