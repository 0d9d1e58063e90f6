// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aor/detection.hpp"
#include "aor/http_endpoint.hpp"
#include "aor/image.hpp"

namespace aor::mllm {

struct Turn {
    enum class Role { kUser, kAssistant };

    Role role{Role::kUser};
    std::string text;

    friend bool operator==(const Turn&, const Turn&) = default;
};

std::string_view to_string(Turn::Role role);

/// An image sent to the model plus the class labels of every object it shows.
struct ImageAttachment {
    std::vector<std::string> source_labels;
    ColorFrame pixels;
};

/// A query to the model. Only constructible through create(), which rejects
/// any image whose source label is denylisted by the active policy.
class MllmRequest {
public:
    static MllmRequest create(std::string conversation_id, std::vector<Turn> history,
                              std::vector<ImageAttachment> images, std::string prompt,
                              const detection::FilterPolicy& policy);

    const std::string& conversation_id() const { return conversation_id_; }
    const std::vector<Turn>& history() const { return history_; }
    const std::vector<ImageAttachment>& images() const { return images_; }
    const std::string& prompt() const { return prompt_; }
    std::vector<std::string> labels() const;

private:
    MllmRequest() = default;

    std::string conversation_id_;
    std::vector<Turn> history_;
    std::vector<ImageAttachment> images_;
    std::string prompt_;
};

struct MllmReply {
    std::string text;
    double latency_ms{0};
    std::string backend;
};

/// Lowercase hex SHA-256 of width, height (u32 little-endian) and RGB bytes.
std::string image_content_hash(const ColorFrame& image);

/// Lowercase hex SHA-256 over the length-prefixed prompt, history turn texts
/// and image content hashes, in order (layout in docs/mllm-api.md).
std::string fingerprint(const MllmRequest& request);

class Backend {
public:
    virtual ~Backend() = default;
    virtual MllmReply query(const MllmRequest& request) = 0;
    virtual std::string tag() const = 0;
};

/// First matching rule wins; with no match the backend echoes the prompt.
struct MockRule {
    enum class Action { kEcho, kFixed, kFail };

    std::optional<std::string> conversation;  // exact conversation id
    std::optional<std::string> prompt_contains;
    std::optional<std::string> label;  // any attached image carries it
    Action action{Action::kEcho};
    std::string text;
    double latency_ms{0};

    bool matches(const MllmRequest& request) const;
};

class MockBackend final : public Backend {
public:
    MockBackend() = default;
    explicit MockBackend(std::vector<MockRule> rules) : rules_(std::move(rules)) {}

    /// JSON array of rules: {"conversation"?, "prompt_contains"?, "label"?,
    /// "action": "echo"|"fixed"|"fail", "text"?, "latency_ms"?}.
    static MockBackend from_file(const std::filesystem::path& path);

    MllmReply query(const MllmRequest& request) override;
    std::string tag() const override { return "mock"; }

private:
    std::vector<MockRule> rules_;
};

struct RecordedReply {
    std::string text;
    double latency_ms{0};

    friend bool operator==(const RecordedReply&, const RecordedReply&) = default;
};

/// Fingerprint -> reply, kept in insertion order so files round-trip exactly.
class ReplayStore {
public:
    static ReplayStore load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::optional<RecordedReply> find(const std::string& fingerprint) const;
    /// Returns false (and keeps the old entry) when the fingerprint exists.
    bool insert(const std::string& fingerprint, RecordedReply reply);
    std::size_t size() const;

    /// One JSON line per entry.
    static std::string serialize_entry(const std::string& fingerprint, const RecordedReply& reply);

    friend bool operator==(const ReplayStore& a, const ReplayStore& b) {
        return a.order_ == b.order_ && a.entries_ == b.entries_;
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, RecordedReply> entries_;
};

class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(std::shared_ptr<const ReplayStore> store) : store_(std::move(store)) {}

    MllmReply query(const MllmRequest& request) override;
    std::string tag() const override { return "replay"; }

private:
    std::shared_ptr<const ReplayStore> store_;
};

/// Wraps another backend and persists each new (fingerprint, reply) pair,
/// appending to `path` as it goes. Requests already in the store are
/// answered from it.
class RecordingBackend final : public Backend {
public:
    RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path path);

    MllmReply query(const MllmRequest& request) override;
    std::string tag() const override { return "record:" + inner_->tag(); }

    ReplayStore store() const;

private:
    std::shared_ptr<Backend> inner_;
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    ReplayStore store_;
};

inline constexpr std::chrono::milliseconds kDefaultLiveTimeout{10000};

/// POSTs {conversation_id, prompt, history, images:[base64 PNG]} and expects
/// {text}. One retry after a timeout.
class LiveBackend final : public Backend {
public:
    LiveBackend(std::string url, std::string auth_token = {},
                std::chrono::milliseconds timeout = kDefaultLiveTimeout, int retries_on_timeout = 1);

    MllmReply query(const MllmRequest& request) override;
    std::string tag() const override { return "live"; }

    /// The exact body query() sends.
    static std::string encode_body(const MllmRequest& request);

private:
    std::string url_;
    HttpEndpoint endpoint_;
    std::string auth_token_;
    std::chrono::milliseconds timeout_;
    int retries_on_timeout_;
};

/// Redacted per-query records: fingerprints, labels and sizes, never prompt
/// text or image bytes. Appends are atomic per record.
class AuditLog {
public:
    AuditLog() = default;  // in-memory only
    explicit AuditLog(std::filesystem::path path);

    struct Record {
        std::string fingerprint;
        std::string conversation_id;
        std::vector<std::string> labels;
        std::size_t image_bytes{0};
        std::size_t prompt_bytes{0};
        std::size_t history_turns{0};
        double latency_ms{0};
        std::string backend;
        std::string status;  // "ok" or the error code
    };

    void append(const Record& record);
    std::vector<Record> records() const;

    static std::vector<Record> read(const std::filesystem::path& path);

private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mutex_;
    std::vector<Record> records_;
};

/// A backend plus the audit trail; the only entry point the session uses.
class Client {
public:
    Client(std::shared_ptr<Backend> backend, std::shared_ptr<AuditLog> audit);

    MllmReply query(const MllmRequest& request);
    const Backend& backend() const { return *backend_; }
    AuditLog& audit() { return *audit_; }

private:
    std::shared_ptr<Backend> backend_;
    std::shared_ptr<AuditLog> audit_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace aor::mllm
