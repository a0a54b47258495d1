#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fedsilo/object_store.hpp"

namespace fedsilo {

// Payload carried by an envelope: small payloads ride inline, large ones are
// stored content-addressed and referenced by key + size + CRC.
struct PayloadRef {
    enum class Kind { Inline, Object };
    Kind kind = Kind::Inline;
    std::vector<std::uint8_t> bytes; // Inline
    std::string key;                 // Object
    std::uint64_t size = 0;
    std::uint32_t crc = 0;

    bool is_inline() const { return kind == Kind::Inline; }
    bool operator==(const PayloadRef&) const = default;

    static PayloadRef inline_bytes(std::vector<std::uint8_t> b) {
        PayloadRef p;
        p.bytes = std::move(b);
        return p;
    }
};

// len(bytes) <= threshold rides inline; larger payloads are stored under
// payload/<sha256> so identical content dedupes to one object.
PayloadRef make_payload(std::span<const std::uint8_t> bytes, ObjectStore& store,
                        std::size_t inline_threshold);

// Inline returns the bytes; Object fetches and verifies size and CRC.
std::vector<std::uint8_t> resolve_payload(const PayloadRef& ref, ObjectStore* store);

struct TaskEnvelope {
    std::string task_id;
    std::string function;
    std::int64_t round = 0;
    nlohmann::json config;
    PayloadRef payload;
    std::string auth_token;
    std::string sender;

    bool operator==(const TaskEnvelope&) const = default;
};

struct ResultEnvelope {
    std::string task_id;
    std::string client_id;
    bool ok = true;
    std::string fail_reason; // set when !ok
    PayloadRef payload;
    nlohmann::json metrics;

    bool operator==(const ResultEnvelope&) const = default;

    static ResultEnvelope failed(const std::string& task_id, const std::string& client_id,
                                 const std::string& reason) {
        ResultEnvelope r;
        r.task_id = task_id;
        r.client_id = client_id;
        r.ok = false;
        r.fail_reason = reason;
        return r;
    }
};

// Connection handshake frame: endpoints always identify themselves first.
struct HelloFrame {
    std::string endpoint_id;
    bool operator==(const HelloFrame&) const = default;
};

using WireMessage = std::variant<TaskEnvelope, ResultEnvelope, HelloFrame>;

// Wire frame: u32le header length, UTF-8 JSON header, then `payload_len`
// bytes of binary payload (inline payloads only; object refs stay in the
// header).
std::vector<std::uint8_t> encode_frame(const WireMessage& msg);
WireMessage decode_frame(std::span<const std::uint8_t> bytes);

nlohmann::json payload_ref_to_json(const PayloadRef& ref);
PayloadRef payload_ref_from_json(const nlohmann::json& j, std::size_t inline_len);

std::string new_uuid();

// UUID-shaped id derived from a seed; simulation-mode federations use these
// so reruns of the same config reproduce the same roster ordering.
std::string uuid_from_seed(std::uint64_t seed);

// Handle to a dispatched task's eventual result.
class PendingResult {
public:
    PendingResult() = default;
    explicit PendingResult(std::shared_future<ResultEnvelope> fut) : fut_(std::move(fut)) {}

    // Throws Error(Timeout) when the deadline passes, Error(EndpointUnreachable)
    // when the endpoint went away before replying.
    ResultEnvelope wait(std::chrono::milliseconds timeout) const;

private:
    std::shared_future<ResultEnvelope> fut_;
};

class Transport {
public:
    virtual ~Transport() = default;

    // Delivers the envelope exactly once to the endpoint; per-endpoint
    // delivery is FIFO. Throws EndpointUnknown for unregistered ids and
    // DuplicateTask when a task_id is reused against the same endpoint.
    virtual PendingResult dispatch(const std::string& endpoint_id,
                                   const TaskEnvelope& envelope) = 0;

    virtual std::set<std::string> connected_endpoints() = 0;
};

// Blocks until every handle resolves or the deadline passes; the failed list
// carries (endpoint_id, error) pairs for timeouts and transport errors.
struct WaitAllOutcome {
    std::vector<ResultEnvelope> results;
    std::vector<std::pair<std::string, std::string>> failed;
};

WaitAllOutcome wait_all(const std::vector<std::pair<std::string, PendingResult>>& handles,
                        std::chrono::milliseconds timeout);

using TaskHandler = std::function<ResultEnvelope(const TaskEnvelope&)>;

// Transport hosting each endpoint on its own worker thread; used by
// simulation mode and by the transport-level tests.
class InProcessTransport final : public Transport {
public:
    InProcessTransport();
    ~InProcessTransport() override;

    void register_endpoint(const std::string& endpoint_id, TaskHandler handler);

    PendingResult dispatch(const std::string& endpoint_id,
                           const TaskEnvelope& envelope) override;
    std::set<std::string> connected_endpoints() override;

    void shutdown();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace fedsilo
