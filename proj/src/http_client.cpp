// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include "aor/error.hpp"
#include "aor/http_endpoint.hpp"

namespace aor {

HttpResult http_post(const HttpEndpoint& endpoint, const std::string& body,
                     const std::string& content_type,
                     const std::map<std::string, std::string>& headers,
                     std::chrono::milliseconds timeout) {
    httplib::Client client(endpoint.scheme_host_port);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers hdrs;
    for (const auto& [key, value] : headers) hdrs.emplace(key, value);
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(endpoint.path, hdrs, body, content_type);
    if (!res) {
        const auto err = res.error();
        const std::string what = endpoint.scheme_host_port + endpoint.path + ": " + httplib::to_string(err);
        const auto elapsed = std::chrono::steady_clock::now() - started;
        if (err == httplib::Error::ConnectionTimeout ||
            ((err == httplib::Error::Read || err == httplib::Error::Write) && elapsed >= timeout)) {
            throw Error(ErrorCode::kTimeout, what);
        }
        throw Error(ErrorCode::kBackendUnavailable, what);
    }
    return {res->status, res->body};
}

}  // namespace aor
