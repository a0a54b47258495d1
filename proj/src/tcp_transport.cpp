#include "fedsilo/tcp_transport.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>

#include "fedsilo/net.hpp"

namespace fedsilo {

struct TcpServerTransport::Impl {
    struct Conn {
        Socket socket;
        std::mutex write_mu;
        std::thread reader;
        std::set<std::string> seen_task_ids;
        bool alive = true;
    };

    std::mutex mu;
    std::condition_variable cv;
    std::map<std::string, std::unique_ptr<Conn>> conns;
    std::map<std::string, std::pair<std::string, std::shared_ptr<std::promise<ResultEnvelope>>>>
        pending; // task_id -> (endpoint_id, promise)

    Listener listener;
    std::thread accept_thread;
    std::vector<std::thread> handshake_threads;
    bool down = false;

    void reader_loop(const std::string& endpoint_id, Conn* conn) {
        for (;;) {
            std::vector<std::uint8_t> frame;
            try {
                if (!conn->socket.recv_frame(frame)) break;
            } catch (const Error&) {
                break;
            }
            WireMessage msg;
            try {
                msg = decode_frame(frame);
            } catch (const Error&) {
                continue; // drop undecodable frames, keep the session
            }
            if (auto* result = std::get_if<ResultEnvelope>(&msg)) {
                std::shared_ptr<std::promise<ResultEnvelope>> promise;
                {
                    std::lock_guard lock(mu);
                    auto it = pending.find(result->task_id);
                    if (it != pending.end()) {
                        promise = it->second.second;
                        pending.erase(it);
                    }
                }
                if (promise) promise->set_value(std::move(*result));
            }
        }
        // connection gone: fail whatever is still pending on this endpoint
        std::vector<std::shared_ptr<std::promise<ResultEnvelope>>> orphans;
        {
            std::lock_guard lock(mu);
            conn->alive = false;
            for (auto it = pending.begin(); it != pending.end();) {
                if (it->second.first == endpoint_id) {
                    orphans.push_back(it->second.second);
                    it = pending.erase(it);
                } else {
                    ++it;
                }
            }
        }
        for (auto& p : orphans)
            p->set_exception(std::make_exception_ptr(
                Error(Err::EndpointUnreachable, "'" + endpoint_id + "' disconnected")));
        cv.notify_all();
    }

    // Reads the hello frame and registers the connection. A peer that never
    // identifies itself is dropped after the handshake timeout.
    void adopt(Socket socket) {
        socket.set_recv_timeout(10);
        std::vector<std::uint8_t> frame;
        try {
            if (!socket.recv_frame(frame)) return;
        } catch (const Error&) {
            return;
        }
        socket.set_recv_timeout(0);
        std::string endpoint_id;
        try {
            const WireMessage msg = decode_frame(frame);
            const auto* hello = std::get_if<HelloFrame>(&msg);
            if (!hello) return;
            endpoint_id = hello->endpoint_id;
        } catch (const Error&) {
            return;
        }

        Conn* raw = nullptr;
        {
            std::lock_guard lock(mu);
            if (down || conns.count(endpoint_id)) return; // duplicate hello: drop
            auto conn = std::make_unique<Conn>();
            conn->socket = std::move(socket);
            raw = conn.get();
            conns.emplace(endpoint_id, std::move(conn));
        }
        raw->reader = std::thread([this, endpoint_id, raw] { reader_loop(endpoint_id, raw); });
        cv.notify_all();
    }
};

TcpServerTransport::TcpServerTransport() : impl_(std::make_unique<Impl>()) {}

TcpServerTransport::~TcpServerTransport() { shutdown(); }

std::string TcpServerTransport::listen(const std::string& bind_address) {
    impl_->listener = Listener::bind(bind_address);
    const std::string addr = impl_->listener.address();
    impl_->accept_thread = std::thread([this] {
        for (;;) {
            Socket s;
            try {
                s = impl_->listener.accept();
            } catch (const Error&) {
                return; // listener closed
            }
            std::lock_guard lock(impl_->mu);
            if (impl_->down) return;
            impl_->handshake_threads.emplace_back(
                [this](Socket sock) { impl_->adopt(std::move(sock)); }, std::move(s));
        }
    });
    return addr;
}

void TcpServerTransport::dial_endpoint(const std::string& address) {
    impl_->adopt(Socket::connect(address));
}

bool TcpServerTransport::wait_for_endpoints(const std::set<std::string>& ids,
                                            std::chrono::milliseconds timeout) {
    std::unique_lock lock(impl_->mu);
    return impl_->cv.wait_for(lock, timeout, [&] {
        for (const auto& id : ids) {
            auto it = impl_->conns.find(id);
            if (it == impl_->conns.end() || !it->second->alive) return false;
        }
        return true;
    });
}

PendingResult TcpServerTransport::dispatch(const std::string& endpoint_id,
                                           const TaskEnvelope& envelope) {
    Impl::Conn* conn = nullptr;
    auto promise = std::make_shared<std::promise<ResultEnvelope>>();
    PendingResult handle(promise->get_future().share());
    {
        std::lock_guard lock(impl_->mu);
        auto it = impl_->conns.find(endpoint_id);
        if (it == impl_->conns.end()) fail(Err::EndpointUnknown, "'" + endpoint_id + "'");
        if (!it->second->alive)
            fail(Err::EndpointUnreachable, "'" + endpoint_id + "' disconnected");
        conn = it->second.get();
        if (!conn->seen_task_ids.insert(envelope.task_id).second)
            fail(Err::DuplicateTask,
                 "task '" + envelope.task_id + "' already dispatched to '" + endpoint_id + "'");
        impl_->pending.emplace(envelope.task_id, std::make_pair(endpoint_id, promise));
    }
    try {
        std::lock_guard wlock(conn->write_mu);
        conn->socket.send_frame(encode_frame(envelope));
    } catch (const Error&) {
        std::lock_guard lock(impl_->mu);
        impl_->pending.erase(envelope.task_id);
        throw;
    }
    return handle;
}

std::set<std::string> TcpServerTransport::connected_endpoints() {
    std::lock_guard lock(impl_->mu);
    std::set<std::string> out;
    for (const auto& [id, conn] : impl_->conns)
        if (conn->alive) out.insert(id);
    return out;
}

void TcpServerTransport::shutdown() {
    {
        std::lock_guard lock(impl_->mu);
        if (impl_->down) return;
        impl_->down = true;
    }
    impl_->listener.close();
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();

    std::vector<std::thread> joiners;
    {
        std::lock_guard lock(impl_->mu);
        for (auto& [id, conn] : impl_->conns) conn->socket.close();
        joiners.swap(impl_->handshake_threads);
    }
    for (auto& t : joiners)
        if (t.joinable()) t.join();
    for (auto& [id, conn] : impl_->conns)
        if (conn->reader.joinable()) conn->reader.join();

    std::vector<std::shared_ptr<std::promise<ResultEnvelope>>> orphans;
    {
        std::lock_guard lock(impl_->mu);
        for (auto& [task_id, entry] : impl_->pending) orphans.push_back(entry.second);
        impl_->pending.clear();
    }
    for (auto& p : orphans)
        p->set_exception(
            std::make_exception_ptr(Error(Err::EndpointUnreachable, "transport shut down")));
}

} // namespace fedsilo
