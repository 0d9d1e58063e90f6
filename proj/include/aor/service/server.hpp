// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Viewer endpoint on one port: a WebSocket at /ws carrying protocol messages
// and plain HTTP GET for /frames/<i>.png, /crops/<proxy>.png and /snapshot.

#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "aor/service/host.hpp"

namespace aor::service {

/// "host:port"; port 0 picks a free port. Throws kValidation.
std::pair<std::string, std::uint16_t> parse_listen_address(const std::string& address);

class ViewerServer {
public:
    ViewerServer(SessionHost& host, const std::string& address);
    ~ViewerServer();
    ViewerServer(const ViewerServer&) = delete;
    ViewerServer& operator=(const ViewerServer&) = delete;

    /// Binds and starts serving. Throws Error(kStartup) when binding fails.
    void start();
    void stop();
    std::uint16_t port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace aor::service
