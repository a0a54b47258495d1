#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedsilo {

// Minimal blocking TCP socket carrying the communicator's wire frames.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& other) noexcept;
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    static Socket connect(const std::string& host_port);

    bool valid() const { return fd_ >= 0; }
    void close();

    // 0 clears the timeout; reads then block indefinitely
    void set_recv_timeout(int seconds);

    // Sends a complete encoded frame. Throws EndpointUnreachable on failure.
    void send_frame(const std::vector<std::uint8_t>& frame);

    // Reads one frame (header length prefix, JSON header, payload section).
    // Returns false on clean EOF at a frame boundary; throws on a torn frame.
    bool recv_frame(std::vector<std::uint8_t>& frame);

private:
    void send_all(const std::uint8_t* data, std::size_t len);
    // 0 = clean EOF before any byte, 1 = got everything
    bool recv_exact(std::uint8_t* data, std::size_t len, bool eof_ok);

    int fd_ = -1;
};

class Listener {
public:
    Listener() = default;
    ~Listener();
    Listener(Listener&& other) noexcept;
    Listener& operator=(Listener&& other) noexcept;
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    // host:port; port 0 picks a free port
    static Listener bind(const std::string& host_port);

    const std::string& address() const { return address_; }
    Socket accept();
    void close();
    bool valid() const { return fd_ >= 0; }

private:
    int fd_ = -1;
    std::string address_;
};

std::pair<std::string, std::uint16_t> split_host_port(const std::string& host_port);

} // namespace fedsilo
