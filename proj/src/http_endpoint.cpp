// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/http_endpoint.hpp"

#include "aor/error.hpp"

namespace aor {

HttpEndpoint parse_http_url(const std::string& url) {
    std::string rest;
    std::string scheme;
    for (const char* candidate : {"http://", "https://"}) {
        const std::string prefix = candidate;
        if (url.rfind(prefix, 0) == 0) {
            scheme = prefix;
            rest = url.substr(prefix.size());
        }
    }
    if (scheme.empty() || rest.empty()) {
        throw Error(ErrorCode::kValidation, "expected an http:// or https:// URL, got '" + url + "'");
    }
    const auto slash = rest.find('/');
    HttpEndpoint endpoint;
    endpoint.scheme_host_port = scheme + rest.substr(0, slash);
    endpoint.path = slash == std::string::npos ? "/" : rest.substr(slash);
    if (endpoint.scheme_host_port.size() == scheme.size()) {
        throw Error(ErrorCode::kValidation, "missing host in '" + url + "'");
    }
    return endpoint;
}

}  // namespace aor
