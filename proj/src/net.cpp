#include "fedsilo/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include "json.hpp"

#include "fedsilo/errors.hpp"

namespace fedsilo {

namespace {

constexpr std::size_t kMaxHeaderLen = 16u << 20;
constexpr std::size_t kMaxPayloadLen = 1u << 30;

} // namespace

std::pair<std::string, std::uint16_t> split_host_port(const std::string& host_port) {
    const auto colon = host_port.rfind(':');
    if (colon == std::string::npos)
        fail(Err::BadConfig, "address '" + host_port + "' is not host:port");
    const std::string host = host_port.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(host_port.substr(colon + 1));
    } catch (const std::exception&) {
        fail(Err::BadConfig, "bad port in '" + host_port + "'");
    }
    if (port < 0 || port > 65535) fail(Err::BadConfig, "port out of range in '" + host_port + "'");
    return {host, static_cast<std::uint16_t>(port)};
}

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Socket::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::set_recv_timeout(int seconds) {
    timeval tv{};
    tv.tv_sec = seconds;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

Socket Socket::connect(const std::string& host_port) {
    const auto [host, port] = split_host_port(host_port);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail(Err::EndpointUnreachable, "socket(): " + std::string(strerror(errno)));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        fail(Err::EndpointUnreachable, "bad IPv4 address '" + host + "'");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        const std::string err = strerror(errno);
        ::close(fd);
        fail(Err::EndpointUnreachable, "connect " + host_port + ": " + err);
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

void Socket::send_all(const std::uint8_t* data, std::size_t len) {
    std::size_t sent = 0;
    while (sent < len) {
        const ssize_t n = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            fail(Err::EndpointUnreachable, "send: " + std::string(strerror(errno)));
        }
        sent += static_cast<std::size_t>(n);
    }
}

bool Socket::recv_exact(std::uint8_t* data, std::size_t len, bool eof_ok) {
    std::size_t got = 0;
    while (got < len) {
        const ssize_t n = ::recv(fd_, data + got, len - got, 0);
        if (n == 0) {
            if (got == 0 && eof_ok) return false;
            fail(Err::Truncated, "connection closed mid-frame");
        }
        if (n < 0) {
            if (errno == EINTR) continue;
            if (got == 0 && eof_ok) return false;
            fail(Err::EndpointUnreachable, "recv: " + std::string(strerror(errno)));
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

void Socket::send_frame(const std::vector<std::uint8_t>& frame) {
    if (fd_ < 0) fail(Err::EndpointUnreachable, "socket closed");
    send_all(frame.data(), frame.size());
}

bool Socket::recv_frame(std::vector<std::uint8_t>& frame) {
    if (fd_ < 0) fail(Err::EndpointUnreachable, "socket closed");
    std::uint8_t prefix[4];
    if (!recv_exact(prefix, 4, true)) return false;
    std::size_t header_len = 0;
    for (int i = 0; i < 4; ++i) header_len |= std::size_t(prefix[i]) << (8 * i);
    if (header_len > kMaxHeaderLen) fail(Err::MalformedHeader, "header length over limit");

    frame.resize(4 + header_len);
    std::memcpy(frame.data(), prefix, 4);
    recv_exact(frame.data() + 4, header_len, false);

    // the header carries the payload section length
    std::size_t payload_len = 0;
    try {
        const auto h = nlohmann::json::parse(frame.begin() + 4, frame.end());
        payload_len = h.at("payload_len").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(Err::MalformedHeader, e.what());
    }
    if (payload_len > kMaxPayloadLen) fail(Err::MalformedHeader, "payload length over limit");
    frame.resize(4 + header_len + payload_len);
    if (payload_len > 0) recv_exact(frame.data() + 4 + header_len, payload_len, false);
    return true;
}

Listener::~Listener() { close(); }

Listener::Listener(Listener&& other) noexcept
    : fd_(other.fd_), address_(std::move(other.address_)) {
    other.fd_ = -1;
}

Listener& Listener::operator=(Listener&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        address_ = std::move(other.address_);
        other.fd_ = -1;
    }
    return *this;
}

void Listener::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

Listener Listener::bind(const std::string& host_port) {
    const auto [host, port] = split_host_port(host_port);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail(Err::EndpointUnreachable, "socket(): " + std::string(strerror(errno)));
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        fail(Err::EndpointUnreachable, "bad IPv4 address '" + host + "'");
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(fd, 16) != 0) {
        const std::string err = strerror(errno);
        ::close(fd);
        fail(Err::EndpointUnreachable, "bind/listen " + host_port + ": " + err);
    }

    sockaddr_in bound{};
    socklen_t blen = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &blen);
    char buf[INET_ADDRSTRLEN] = {0};
    ::inet_ntop(AF_INET, &bound.sin_addr, buf, sizeof(buf));

    Listener l;
    l.fd_ = fd;
    l.address_ = std::string(buf) + ":" + std::to_string(ntohs(bound.sin_port));
    return l;
}

Socket Listener::accept() {
    if (fd_ < 0) fail(Err::EndpointUnreachable, "listener closed");
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) fail(Err::EndpointUnreachable, "accept: " + std::string(strerror(errno)));
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

} // namespace fedsilo
