// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/service/server.hpp"

#include <charconv>
#include <deque>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include "aor/error.hpp"

namespace aor::service {
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

std::pair<std::string, std::uint16_t> parse_listen_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kValidation, "serve address must be host:port");
    std::string host = address.substr(0, colon);
    const std::string port_text = address.substr(colon + 1);
    unsigned port = 0;
    const auto [end, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || end != port_text.data() + port_text.size() || port > 65535) {
        throw Error(ErrorCode::kValidation, "bad port in serve address '" + address + "'");
    }
    if (host.empty()) host = "0.0.0.0";
    if (host == "localhost") host = "127.0.0.1";
    return {host, static_cast<std::uint16_t>(port)};
}

namespace {

// Handlers and posted sends run on the socket's strand (see accept).
class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, SessionHost& host)
        : ws_(std::move(socket)), host_(host) {}

    ~WsSession() {
        if (subscription_) host_.unsubscribe(*subscription_);
    }

    void run(http::request<http::string_body> request) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(request, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            std::weak_ptr<WsSession> weak = self;
            try {
                self->subscription_ = self->host_.subscribe([weak](std::string message) {
                    if (auto s = weak.lock()) s->send(std::move(message));
                });
            } catch (const Error& e) {
                self->send(error_message(std::string(to_string(e.code())), e.what()));
            }
            self->read();
        });
    }

    void send(std::string message) {
        asio::post(ws_.get_executor(), [self = shared_from_this(), message = std::move(message)]() mutable {
            self->queue_.push_back(std::move(message));
            if (self->queue_.size() == 1) self->write_next();
        });
    }

private:
    void write_next() {
        ws_.text(true);
        ws_.async_write(asio::buffer(queue_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) {
                            if (ec) {
                                self->queue_.clear();
                                return;
                            }
                            self->queue_.pop_front();
                            if (!self->queue_.empty()) self->write_next();
                        });
    }

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->on_message(text);
            self->read();
        });
    }

    void on_message(const std::string& text) {
        json message;
        try {
            message = json::parse(text);
        } catch (const json::exception& e) {
            send(error_message("protocol", std::string("malformed JSON: ") + e.what()));
            return;
        }
        const std::string type = message.is_object() && message.contains("type") && message["type"].is_string()
                                     ? message["type"].get<std::string>()
                                     : std::string();
        try {
            if (type == "command") {
                if (!message.contains("payload")) {
                    send(error_message("protocol", "command message needs a payload"));
                    return;
                }
                host_.post_command(message.at("payload"), subscription_);
            } else if (type == "snapshot") {
                if (subscription_) host_.request_snapshot(*subscription_);
            } else {
                send(error_message("protocol", "unsupported message type '" + type + "'"));
            }
        } catch (const Error& e) {
            send(error_message(std::string(to_string(e.code())), e.what()));
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    SessionHost& host_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    std::optional<std::uint64_t> subscription_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, SessionHost& host) : stream_(std::move(socket)), host_(host) {}

    void run() { read(); }

private:
    void read() {
        request_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, request_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) {
                             if (ec) return;
                             self->on_request();
                         });
    }

    void on_request() {
        if (websocket::is_upgrade(request_)) {
            if (request_.target() != "/ws") {
                respond(http::status::not_found, "text/plain", "no websocket at this path\n");
                return;
            }
            stream_.expires_never();
            std::make_shared<WsSession>(stream_.release_socket(), host_)->run(std::move(request_));
            return;
        }
        if (request_.method() != http::verb::get) {
            respond(http::status::method_not_allowed, "text/plain", "GET only\n");
            return;
        }
        const std::string target(request_.target());
        try {
            if (target == "/snapshot") {
                respond(http::status::ok, "application/json", host_.snapshot().dump());
            } else if (target.rfind("/frames/", 0) == 0 && ends_with_png(target)) {
                const std::string stem = target.substr(8, target.size() - 12);
                std::size_t index = 0;
                const auto [end, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), index);
                if (stem.empty() || ec != std::errc() || end != stem.data() + stem.size()) {
                    respond(http::status::not_found, "text/plain", "bad frame index\n");
                    return;
                }
                respond_png(host_.frame_png(index));
            } else if (target.rfind("/crops/", 0) == 0 && ends_with_png(target)) {
                respond_png(host_.crop_png(target.substr(7, target.size() - 11)));
            } else {
                respond(http::status::not_found, "text/plain", "not found\n");
            }
        } catch (const Error& e) {
            const auto status =
                e.code() == ErrorCode::kNotFound ? http::status::not_found : http::status::service_unavailable;
            respond(status, "text/plain", std::string(e.what()) + "\n");
        }
    }

    static bool ends_with_png(const std::string& s) {
        return s.size() > 4 && s.compare(s.size() - 4, 4, ".png") == 0;
    }

    void respond_png(const std::vector<std::uint8_t>& bytes) {
        respond(http::status::ok, "image/png", std::string(bytes.begin(), bytes.end()));
    }

    void respond(http::status status, const char* content_type, std::string body) {
        auto response = std::make_shared<http::response<http::string_body>>(status, request_.version());
        response->set(http::field::server, "aor");
        response->set(http::field::content_type, content_type);
        response->keep_alive(request_.keep_alive());
        response->body() = std::move(body);
        response->prepare_payload();
        http::async_write(stream_, *response,
                          [self = shared_from_this(), response](beast::error_code ec, std::size_t) {
                              if (ec) return;
                              if (!response->keep_alive()) {
                                  beast::error_code ignored;
                                  self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                                  return;
                              }
                              self->read();
                          });
    }

    beast::tcp_stream stream_;
    SessionHost& host_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
};

}  // namespace

struct ViewerServer::Impl {
    Impl(SessionHost& h, const std::string& address) : host(h), acceptor(io) {
        std::tie(bind_host, bind_port) = parse_listen_address(address);
    }

    void accept() {
        acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec == asio::error::operation_aborted) return;
            } else {
                std::make_shared<HttpSession>(std::move(socket), host)->run();
            }
            accept();
        });
    }

    SessionHost& host;
    std::string bind_host;
    std::uint16_t bind_port{0};
    asio::io_context io;
    tcp::acceptor acceptor;
    std::vector<std::thread> threads;
    std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
};

ViewerServer::ViewerServer(SessionHost& host, const std::string& address)
    : impl_(std::make_unique<Impl>(host, address)) {}

ViewerServer::~ViewerServer() { stop(); }

void ViewerServer::start() {
    try {
        const tcp::endpoint endpoint(asio::ip::make_address(impl_->bind_host), impl_->bind_port);
        impl_->acceptor.open(endpoint.protocol());
        impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
        impl_->acceptor.bind(endpoint);
        impl_->acceptor.listen(asio::socket_base::max_listen_connections);
    } catch (const boost::system::system_error& e) {
        throw Error(ErrorCode::kStartup, "cannot listen on " + impl_->bind_host + ":" +
                                             std::to_string(impl_->bind_port) + ": " + e.what());
    }
    impl_->work.emplace(impl_->io.get_executor());
    impl_->accept();
    for (int i = 0; i < 2; ++i) impl_->threads.emplace_back([this] { impl_->io.run(); });
}

void ViewerServer::stop() {
    if (!impl_ || impl_->threads.empty()) return;
    asio::post(impl_->io, [this] {
        beast::error_code ignored;
        impl_->acceptor.close(ignored);
    });
    impl_->work.reset();
    impl_->io.stop();
    for (auto& t : impl_->threads) t.join();
    impl_->threads.clear();
}

std::uint16_t ViewerServer::port() const {
    beast::error_code ec;
    const auto endpoint = impl_->acceptor.local_endpoint(ec);
    return ec ? impl_->bind_port : endpoint.port();
}

}  // namespace aor::service
