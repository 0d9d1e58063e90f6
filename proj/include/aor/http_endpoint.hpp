// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <string>

namespace aor {

/// "http://host:port/path" split into what cpp-httplib wants.
struct HttpEndpoint {
    std::string scheme_host_port;  // "http://host:port"
    std::string path;              // "/path", never empty
};

/// Throws kValidation for anything but an absolute http(s) URL.
HttpEndpoint parse_http_url(const std::string& url);

}  // namespace aor

#include <map>
#include <optional>

namespace aor {

struct HttpResult {
    int status{0};
    std::string body;
};

/// Blocking POST. Throws kTimeout when the read/connect deadline passes and
/// kBackendUnavailable for any other transport failure.
HttpResult http_post(const HttpEndpoint& endpoint, const std::string& body,
                     const std::string& content_type,
                     const std::map<std::string, std::string>& headers,
                     std::chrono::milliseconds timeout);

}  // namespace aor
