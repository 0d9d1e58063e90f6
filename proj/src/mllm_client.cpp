// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/mllm_client.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "aor/error.hpp"

namespace aor::mllm {
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx_, data, size); }

    void update_u32(std::uint32_t value) {
        const std::array<std::uint8_t, 4> le{
            static_cast<std::uint8_t>(value), static_cast<std::uint8_t>(value >> 8),
            static_cast<std::uint8_t>(value >> 16), static_cast<std::uint8_t>(value >> 24)};
        update(le.data(), le.size());
    }

    void update_string(const std::string& text) {
        update_u32(static_cast<std::uint32_t>(text.size()));
        update(text.data(), text.size());
    }

    std::array<std::uint8_t, 32> digest() {
        std::array<std::uint8_t, 32> out{};
        unsigned int length = 0;
        EVP_DigestFinal_ex(ctx_, out.data(), &length);
        return out;
    }

private:
    EVP_MD_CTX* ctx_;
};

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

std::array<std::uint8_t, 32> image_digest(const ColorFrame& image) {
    Sha256 sha;
    sha.update_u32(static_cast<std::uint32_t>(image.width));
    sha.update_u32(static_cast<std::uint32_t>(image.height));
    sha.update(image.rgb.data(), image.rgb.size());
    return sha.digest();
}

std::vector<std::string> read_nonempty_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

void append_line(const fs::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
    const std::string record = line + "\n";
    out.write(record.data(), static_cast<std::streamsize>(record.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace

std::string_view to_string(Turn::Role role) {
    return role == Turn::Role::kUser ? "user" : "assistant";
}

MllmRequest MllmRequest::create(std::string conversation_id, std::vector<Turn> history,
                                std::vector<ImageAttachment> images, std::string prompt,
                                const detection::FilterPolicy& policy) {
    for (const auto& image : images) {
        if (image.source_labels.empty()) {
            throw Error(ErrorCode::kPrivacy, "mllm request: image without a source label");
        }
        for (const auto& label : image.source_labels) {
            if (policy.is_denylisted(label)) {
                throw Error(ErrorCode::kPrivacy,
                            "mllm request: image of denylisted class '" + label + "'");
            }
        }
        if (!image.pixels.is_valid()) {
            throw Error(ErrorCode::kValidation, "mllm request: invalid image");
        }
    }
    if (conversation_id.empty()) {
        throw Error(ErrorCode::kValidation, "mllm request: empty conversation id");
    }
    MllmRequest request;
    request.conversation_id_ = std::move(conversation_id);
    request.history_ = std::move(history);
    request.images_ = std::move(images);
    request.prompt_ = std::move(prompt);
    return request;
}

std::vector<std::string> MllmRequest::labels() const {
    std::vector<std::string> out;
    for (const auto& image : images_) {
        out.insert(out.end(), image.source_labels.begin(), image.source_labels.end());
    }
    return out;
}

std::string image_content_hash(const ColorFrame& image) { return to_hex(image_digest(image)); }

std::string fingerprint(const MllmRequest& request) {
    Sha256 sha;
    static constexpr char kDomain[] = "aor-mllm-v1";
    sha.update(kDomain, sizeof(kDomain));  // includes the terminating NUL
    sha.update_string(request.prompt());
    sha.update_u32(static_cast<std::uint32_t>(request.history().size()));
    for (const auto& turn : request.history()) sha.update_string(turn.text);
    sha.update_u32(static_cast<std::uint32_t>(request.images().size()));
    for (const auto& image : request.images()) {
        const auto digest = image_digest(image.pixels);
        sha.update(digest.data(), digest.size());
    }
    return to_hex(sha.digest());
}

bool MockRule::matches(const MllmRequest& request) const {
    if (conversation && *conversation != request.conversation_id()) return false;
    if (prompt_contains && request.prompt().find(*prompt_contains) == std::string::npos) {
        return false;
    }
    if (label) {
        const auto labels = request.labels();
        if (std::find(labels.begin(), labels.end(), *label) == labels.end()) return false;
    }
    return true;
}

MockBackend MockBackend::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open mock rules " + path.string());
    std::vector<MockRule> rules;
    try {
        const json doc = json::parse(in);
        for (const auto& item : doc) {
            MockRule rule;
            if (item.contains("conversation")) rule.conversation = item.at("conversation").get<std::string>();
            if (item.contains("prompt_contains")) {
                rule.prompt_contains = item.at("prompt_contains").get<std::string>();
            }
            if (item.contains("label")) rule.label = item.at("label").get<std::string>();
            const auto action = item.value("action", std::string("fixed"));
            if (action == "echo") {
                rule.action = MockRule::Action::kEcho;
            } else if (action == "fixed") {
                rule.action = MockRule::Action::kFixed;
            } else if (action == "fail") {
                rule.action = MockRule::Action::kFail;
            } else {
                throw Error(ErrorCode::kParse, "mock rules: unknown action '" + action + "'");
            }
            rule.text = item.value("text", std::string());
            rule.latency_ms = item.value("latency_ms", 0.0);
            rules.push_back(std::move(rule));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
    }
    return MockBackend(std::move(rules));
}

MllmReply MockBackend::query(const MllmRequest& request) {
    for (const auto& rule : rules_) {
        if (!rule.matches(request)) continue;
        switch (rule.action) {
            case MockRule::Action::kEcho: return {request.prompt(), rule.latency_ms, tag()};
            case MockRule::Action::kFixed: return {rule.text, rule.latency_ms, tag()};
            case MockRule::Action::kFail:
                throw Error(ErrorCode::kBackendUnavailable,
                            "mock: scripted failure" + (rule.text.empty() ? "" : ": " + rule.text));
        }
    }
    return {request.prompt(), 0.0, tag()};
}

ReplayStore ReplayStore::load(const fs::path& path) {
    ReplayStore store;
    std::size_t line_no = 0;
    for (const auto& line : read_nonempty_lines(path)) {
        ++line_no;
        try {
            const json obj = json::parse(line);
            store.insert(obj.at("fingerprint").get<std::string>(),
                         {obj.at("text").get<std::string>(), obj.value("latency_ms", 0.0)});
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kParse,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return store;
}

std::string ReplayStore::serialize_entry(const std::string& fingerprint,
                                         const RecordedReply& reply) {
    json obj;
    obj["fingerprint"] = fingerprint;
    obj["text"] = reply.text;
    obj["latency_ms"] = reply.latency_ms;
    return obj.dump();
}

void ReplayStore::save(const fs::path& path) const {
    std::ostringstream body;
    for (const auto& key : order_) body << serialize_entry(key, entries_.at(key)) << '\n';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    const std::string bytes = body.str();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

std::optional<RecordedReply> ReplayStore::find(const std::string& fingerprint) const {
    const auto it = entries_.find(fingerprint);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

bool ReplayStore::insert(const std::string& fingerprint, RecordedReply reply) {
    if (entries_.count(fingerprint)) return false;
    order_.push_back(fingerprint);
    entries_.emplace(fingerprint, std::move(reply));
    return true;
}

std::size_t ReplayStore::size() const { return order_.size(); }

MllmReply ReplayBackend::query(const MllmRequest& request) {
    const std::string key = fingerprint(request);
    const auto hit = store_->find(key);
    if (!hit) throw Error(ErrorCode::kReplayMiss, "replay: no recorded reply for fingerprint " + key);
    return {hit->text, hit->latency_ms, tag()};
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, fs::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
    if (fs::exists(path_)) {
        store_ = ReplayStore::load(path_);
    } else {
        std::ofstream touch(path_, std::ios::binary);
        if (!touch) throw Error(ErrorCode::kIo, "cannot create replay store " + path_.string());
    }
}

MllmReply RecordingBackend::query(const MllmRequest& request) {
    const std::string key = fingerprint(request);
    {
        std::lock_guard lock(mutex_);
        if (const auto hit = store_.find(key)) return {hit->text, hit->latency_ms, tag()};
    }
    MllmReply reply = inner_->query(request);
    const RecordedReply recorded{reply.text, reply.latency_ms};
    std::lock_guard lock(mutex_);
    if (store_.find(key)) return reply;
    append_line(path_, ReplayStore::serialize_entry(key, recorded));
    store_.insert(key, recorded);
    reply.backend = tag();
    return reply;
}

ReplayStore RecordingBackend::store() const {
    std::lock_guard lock(mutex_);
    return store_;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                        static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(written));
    return out;
}

LiveBackend::LiveBackend(std::string url, std::string auth_token, std::chrono::milliseconds timeout,
                         int retries_on_timeout)
    : url_(std::move(url)),
      endpoint_(parse_http_url(url_)),
      auth_token_(std::move(auth_token)),
      timeout_(timeout),
      retries_on_timeout_(retries_on_timeout) {}

std::string LiveBackend::encode_body(const MllmRequest& request) {
    json body;
    body["conversation_id"] = request.conversation_id();
    body["prompt"] = request.prompt();
    body["history"] = json::array();
    for (const auto& turn : request.history()) {
        body["history"].push_back({{"role", to_string(turn.role)}, {"text", turn.text}});
    }
    body["images"] = json::array();
    for (const auto& image : request.images()) {
        body["images"].push_back(base64_encode(png::encode_rgb(image.pixels)));
    }
    return body.dump();
}

MllmReply LiveBackend::query(const MllmRequest& request) {
    const std::string body = encode_body(request);
    std::map<std::string, std::string> headers;
    if (!auth_token_.empty()) headers["Authorization"] = "Bearer " + auth_token_;
    for (int attempt = 0;; ++attempt) {
        const auto started = std::chrono::steady_clock::now();
        HttpResult result;
        try {
            result = http_post(endpoint_, body, "application/json", headers, timeout_);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::kTimeout && attempt < retries_on_timeout_) continue;
            throw;
        }
        const double latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();
        if (result.status != 200) {
            throw Error(ErrorCode::kBackendUnavailable,
                        "live mllm: HTTP status " + std::to_string(result.status));
        }
        try {
            return {json::parse(result.body).at("text").get<std::string>(), latency_ms, tag()};
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kProtocol, std::string("live mllm: bad reply: ") + e.what());
        }
    }
}

AuditLog::AuditLog(fs::path path) : path_(std::move(path)) {
    std::ofstream touch(*path_, std::ios::app);
    if (!touch) throw Error(ErrorCode::kIo, "cannot open audit log " + path_->string());
}

namespace {

json record_to_json(const AuditLog::Record& r) {
    return {{"fingerprint", r.fingerprint}, {"conversation_id", r.conversation_id},
            {"labels", r.labels},           {"image_bytes", r.image_bytes},
            {"prompt_bytes", r.prompt_bytes}, {"history_turns", r.history_turns},
            {"latency_ms", r.latency_ms},   {"backend", r.backend},
            {"status", r.status}};
}

AuditLog::Record record_from_json(const json& obj) {
    AuditLog::Record r;
    r.fingerprint = obj.at("fingerprint").get<std::string>();
    r.conversation_id = obj.at("conversation_id").get<std::string>();
    r.labels = obj.at("labels").get<std::vector<std::string>>();
    r.image_bytes = obj.at("image_bytes").get<std::size_t>();
    r.prompt_bytes = obj.at("prompt_bytes").get<std::size_t>();
    r.history_turns = obj.at("history_turns").get<std::size_t>();
    r.latency_ms = obj.at("latency_ms").get<double>();
    r.backend = obj.at("backend").get<std::string>();
    r.status = obj.at("status").get<std::string>();
    return r;
}

}  // namespace

void AuditLog::append(const Record& record) {
    std::lock_guard lock(mutex_);
    if (path_) append_line(*path_, record_to_json(record).dump());
    records_.push_back(record);
}

std::vector<AuditLog::Record> AuditLog::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<AuditLog::Record> AuditLog::read(const fs::path& path) {
    std::vector<Record> out;
    for (const auto& line : read_nonempty_lines(path)) {
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
        }
    }
    return out;
}

Client::Client(std::shared_ptr<Backend> backend, std::shared_ptr<AuditLog> audit)
    : backend_(std::move(backend)), audit_(std::move(audit)) {
    if (!backend_) throw Error(ErrorCode::kValidation, "mllm client: no backend");
    if (!audit_) audit_ = std::make_shared<AuditLog>();
}

MllmReply Client::query(const MllmRequest& request) {
    AuditLog::Record record;
    record.fingerprint = fingerprint(request);
    record.conversation_id = request.conversation_id();
    record.labels = request.labels();
    for (const auto& image : request.images()) record.image_bytes += image.pixels.rgb.size();
    record.prompt_bytes = request.prompt().size();
    record.history_turns = request.history().size();
    record.backend = backend_->tag();
    try {
        MllmReply reply = backend_->query(request);
        record.latency_ms = reply.latency_ms;
        record.status = "ok";
        audit_->append(record);
        return reply;
    } catch (const Error& e) {
        record.status = std::string(to_string(e.code()));
        audit_->append(record);
        throw;
    }
}

}  // namespace aor::mllm
