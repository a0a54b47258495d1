#pragma once

#include <memory>

#include "fedsilo/comm.hpp"

namespace fedsilo {

// Server side of the TCP transport. Endpoints usually dial in and identify
// themselves with a hello frame; the server can also dial out to endpoints
// that are listening. One connection per endpoint, FIFO per connection.
class TcpServerTransport final : public Transport {
public:
    TcpServerTransport();
    ~TcpServerTransport() override;

    // Binds and starts accepting; returns the actual host:port.
    std::string listen(const std::string& bind_address);

    // Connects out to a listening endpoint and waits for its hello.
    void dial_endpoint(const std::string& address);

    // Blocks until all ids are connected or the deadline passes.
    bool wait_for_endpoints(const std::set<std::string>& ids,
                            std::chrono::milliseconds timeout);

    PendingResult dispatch(const std::string& endpoint_id,
                           const TaskEnvelope& envelope) override;
    std::set<std::string> connected_endpoints() override;

    void shutdown();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace fedsilo
