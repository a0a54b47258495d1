#include "fedsilo/comm.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <random>
#include <thread>

#include "fedsilo/crypto.hpp"

namespace fedsilo {

PayloadRef make_payload(std::span<const std::uint8_t> bytes, ObjectStore& store,
                        std::size_t inline_threshold) {
    if (bytes.size() <= inline_threshold)
        return PayloadRef::inline_bytes({bytes.begin(), bytes.end()});
    PayloadRef ref;
    ref.kind = PayloadRef::Kind::Object;
    ref.key = "payload/" + sha256_hex(bytes);
    ref.size = bytes.size();
    ref.crc = crc32(bytes);
    // content-addressed: rewriting an existing key would store identical bytes
    if (!store.exists(ref.key)) store.put(ref.key, bytes);
    return ref;
}

std::vector<std::uint8_t> resolve_payload(const PayloadRef& ref, ObjectStore* store) {
    if (ref.is_inline()) return ref.bytes;
    if (!store) fail(Err::StoreUnavailable, "object payload but no store configured");
    std::vector<std::uint8_t> bytes = store->get(ref.key);
    if (bytes.size() != ref.size)
        fail(Err::IntegrityFailure, "object '" + ref.key + "' size " +
                                        std::to_string(bytes.size()) + " != declared " +
                                        std::to_string(ref.size));
    if (crc32(bytes) != ref.crc)
        fail(Err::IntegrityFailure, "object '" + ref.key + "' CRC mismatch");
    return bytes;
}

nlohmann::json payload_ref_to_json(const PayloadRef& ref) {
    if (ref.is_inline()) return {{"type", "inline"}};
    return {{"type", "object"}, {"key", ref.key}, {"size", ref.size}, {"crc32", ref.crc}};
}

PayloadRef payload_ref_from_json(const nlohmann::json& j, std::size_t inline_len) {
    PayloadRef ref;
    const std::string type = j.at("type").get<std::string>();
    if (type == "inline") {
        ref.kind = PayloadRef::Kind::Inline;
        ref.bytes.resize(inline_len);
    } else if (type == "object") {
        ref.kind = PayloadRef::Kind::Object;
        ref.key = j.at("key").get<std::string>();
        ref.size = j.at("size").get<std::uint64_t>();
        ref.crc = j.at("crc32").get<std::uint32_t>();
    } else {
        fail(Err::MalformedHeader, "unknown payload type '" + type + "'");
    }
    return ref;
}

namespace {

std::string format_uuid(std::mt19937_64& mix) {
    std::uint8_t b[16];
    for (int i = 0; i < 16; i += 8) {
        const std::uint64_t r = mix();
        for (int k = 0; k < 8; ++k) b[i + k] = std::uint8_t(r >> (8 * k));
    }
    b[6] = (b[6] & 0x0F) | 0x40; // version 4
    b[8] = (b[8] & 0x3F) | 0x80; // variant
    const std::string hex = to_hex(b);
    return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" +
           hex.substr(16, 4) + "-" + hex.substr(20, 12);
}

} // namespace

std::string new_uuid() {
    static std::atomic<std::uint64_t> counter{0};
    static const std::uint64_t boot = []() {
        std::random_device rd;
        return (std::uint64_t(rd()) << 32) ^ rd();
    }();
    std::mt19937_64 mix(boot ^ (counter.fetch_add(1) * 0x9e3779b97f4a7c15ULL) ^
                        std::uint64_t(std::chrono::steady_clock::now().time_since_epoch().count()));
    return format_uuid(mix);
}

std::string uuid_from_seed(std::uint64_t seed) {
    std::mt19937_64 mix(seed);
    return format_uuid(mix);
}

namespace {

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::vector<std::uint8_t> build_frame(nlohmann::json header,
                                      const std::vector<std::uint8_t>* payload) {
    header["payload_len"] = payload ? payload->size() : 0;
    const std::string text = header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(4 + text.size() + (payload ? payload->size() : 0));
    put_u32le(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    if (payload) out.insert(out.end(), payload->begin(), payload->end());
    return out;
}

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) fail(Err::MalformedHeader, std::string("header missing '") + key + "'");
    return j.at(key);
}

} // namespace

std::vector<std::uint8_t> encode_frame(const WireMessage& msg) {
    if (const auto* task = std::get_if<TaskEnvelope>(&msg)) {
        nlohmann::json h = {{"kind", "task"},
                            {"task_id", task->task_id},
                            {"function", task->function},
                            {"round", task->round},
                            {"config", task->config},
                            {"auth_token", task->auth_token},
                            {"sender", task->sender},
                            {"payload", payload_ref_to_json(task->payload)}};
        return build_frame(std::move(h),
                           task->payload.is_inline() ? &task->payload.bytes : nullptr);
    }
    if (const auto* res = std::get_if<ResultEnvelope>(&msg)) {
        nlohmann::json h = {{"kind", "result"},
                            {"task_id", res->task_id},
                            {"client_id", res->client_id},
                            {"ok", res->ok},
                            {"metrics", res->metrics},
                            {"payload", payload_ref_to_json(res->payload)}};
        if (!res->ok) h["reason"] = res->fail_reason;
        return build_frame(std::move(h),
                           res->payload.is_inline() ? &res->payload.bytes : nullptr);
    }
    const auto& hello = std::get<HelloFrame>(msg);
    nlohmann::json h = {{"kind", "hello"}, {"endpoint_id", hello.endpoint_id}};
    return build_frame(std::move(h), nullptr);
}

WireMessage decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) fail(Err::Truncated, "frame shorter than length prefix");
    std::uint32_t header_len = 0;
    for (int i = 0; i < 4; ++i) header_len |= std::uint32_t(bytes[i]) << (8 * i);
    if (bytes.size() < 4 + std::size_t(header_len))
        fail(Err::Truncated, "declared header length exceeds frame");

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.begin() + 4, bytes.begin() + 4 + header_len);
    } catch (const nlohmann::json::exception& e) {
        fail(Err::MalformedHeader, e.what());
    }
    if (!h.is_object()) fail(Err::MalformedHeader, "header is not a JSON object");

    std::size_t payload_len = 0;
    try {
        const std::string kind = require(h, "kind").get<std::string>();
        payload_len = require(h, "payload_len").get<std::size_t>();
        if (bytes.size() < 4 + header_len + payload_len)
            fail(Err::Truncated, "declared payload length exceeds frame");
        if (bytes.size() != 4 + header_len + payload_len)
            fail(Err::LengthMismatch, "frame has trailing bytes");
        const std::uint8_t* pstart = bytes.data() + 4 + header_len;

        if (kind == "hello") {
            HelloFrame hello;
            hello.endpoint_id = require(h, "endpoint_id").get<std::string>();
            return hello;
        }
        if (kind == "task") {
            TaskEnvelope t;
            t.task_id = require(h, "task_id").get<std::string>();
            t.function = require(h, "function").get<std::string>();
            t.round = require(h, "round").get<std::int64_t>();
            t.config = require(h, "config");
            t.auth_token = require(h, "auth_token").get<std::string>();
            t.sender = require(h, "sender").get<std::string>();
            t.payload = payload_ref_from_json(require(h, "payload"), payload_len);
            if (t.payload.is_inline())
                std::copy(pstart, pstart + payload_len, t.payload.bytes.begin());
            return t;
        }
        if (kind == "result") {
            ResultEnvelope r;
            r.task_id = require(h, "task_id").get<std::string>();
            r.client_id = require(h, "client_id").get<std::string>();
            r.ok = require(h, "ok").get<bool>();
            if (!r.ok) r.fail_reason = require(h, "reason").get<std::string>();
            r.metrics = require(h, "metrics");
            r.payload = payload_ref_from_json(require(h, "payload"), payload_len);
            if (r.payload.is_inline())
                std::copy(pstart, pstart + payload_len, r.payload.bytes.begin());
            return r;
        }
        fail(Err::MalformedHeader, "unknown frame kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        fail(Err::MalformedHeader, e.what());
    }
}

ResultEnvelope PendingResult::wait(std::chrono::milliseconds timeout) const {
    if (!fut_.valid()) fail(Err::EndpointUnreachable, "no pending result");
    if (fut_.wait_for(timeout) != std::future_status::ready)
        fail(Err::Timeout, "no result within " + std::to_string(timeout.count()) + " ms");
    return fut_.get(); // may rethrow EndpointUnreachable
}

WaitAllOutcome wait_all(const std::vector<std::pair<std::string, PendingResult>>& handles,
                        std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    WaitAllOutcome out;
    for (const auto& [endpoint_id, handle] : handles) {
        const auto now = std::chrono::steady_clock::now();
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - (now < deadline ? now : deadline));
        try {
            out.results.push_back(handle.wait(left));
        } catch (const Error& e) {
            out.failed.emplace_back(endpoint_id, e.what());
        }
    }
    return out;
}

struct InProcessTransport::Impl {
    struct Endpoint {
        TaskHandler handler;
        std::thread worker;
        std::deque<std::pair<TaskEnvelope, std::shared_ptr<std::promise<ResultEnvelope>>>> queue;
        std::set<std::string> seen_task_ids;
        std::mutex mu;
        std::condition_variable cv;
        bool stopping = false;
    };

    std::mutex mu;
    std::map<std::string, std::unique_ptr<Endpoint>> endpoints;
    bool down = false;
};

InProcessTransport::InProcessTransport() : impl_(std::make_unique<Impl>()) {}

InProcessTransport::~InProcessTransport() { shutdown(); }

void InProcessTransport::register_endpoint(const std::string& endpoint_id, TaskHandler handler) {
    std::lock_guard lock(impl_->mu);
    if (impl_->endpoints.count(endpoint_id))
        fail(Err::DuplicateName, "endpoint '" + endpoint_id + "' already registered");
    auto ep = std::make_unique<Impl::Endpoint>();
    ep->handler = std::move(handler);
    Impl::Endpoint* raw = ep.get();
    ep->worker = std::thread([raw]() {
        for (;;) {
            std::pair<TaskEnvelope, std::shared_ptr<std::promise<ResultEnvelope>>> item;
            {
                std::unique_lock lk(raw->mu);
                raw->cv.wait(lk, [raw] { return raw->stopping || !raw->queue.empty(); });
                if (raw->stopping) {
                    while (!raw->queue.empty()) {
                        raw->queue.front().second->set_exception(std::make_exception_ptr(
                            Error(Err::EndpointUnreachable, "endpoint shut down")));
                        raw->queue.pop_front();
                    }
                    return;
                }
                item = std::move(raw->queue.front());
                raw->queue.pop_front();
            }
            try {
                item.second->set_value(raw->handler(item.first));
            } catch (...) {
                item.second->set_exception(std::current_exception());
            }
        }
    });
    impl_->endpoints.emplace(endpoint_id, std::move(ep));
}

PendingResult InProcessTransport::dispatch(const std::string& endpoint_id,
                                           const TaskEnvelope& envelope) {
    Impl::Endpoint* ep = nullptr;
    {
        std::lock_guard lock(impl_->mu);
        auto it = impl_->endpoints.find(endpoint_id);
        if (it == impl_->endpoints.end())
            fail(Err::EndpointUnknown, "'" + endpoint_id + "'");
        ep = it->second.get();
    }
    auto promise = std::make_shared<std::promise<ResultEnvelope>>();
    PendingResult handle(promise->get_future().share());
    {
        std::lock_guard lk(ep->mu);
        if (ep->stopping) fail(Err::EndpointUnreachable, "'" + endpoint_id + "' shut down");
        if (!ep->seen_task_ids.insert(envelope.task_id).second)
            fail(Err::DuplicateTask,
                 "task '" + envelope.task_id + "' already dispatched to '" + endpoint_id + "'");
        ep->queue.emplace_back(envelope, promise);
    }
    ep->cv.notify_one();
    return handle;
}

std::set<std::string> InProcessTransport::connected_endpoints() {
    std::lock_guard lock(impl_->mu);
    std::set<std::string> out;
    for (const auto& [id, ep] : impl_->endpoints) out.insert(id);
    return out;
}

void InProcessTransport::shutdown() {
    std::lock_guard lock(impl_->mu);
    if (impl_->down) return;
    impl_->down = true;
    for (auto& [id, ep] : impl_->endpoints) {
        {
            std::lock_guard lk(ep->mu);
            ep->stopping = true;
        }
        ep->cv.notify_all();
    }
    for (auto& [id, ep] : impl_->endpoints)
        if (ep->worker.joinable()) ep->worker.join();
}

} // namespace fedsilo
