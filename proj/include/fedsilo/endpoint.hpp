#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "fedsilo/comm.hpp"
#include "fedsilo/federation.hpp"
#include "fedsilo/taskdata.hpp"
#include "fedsilo/tensor.hpp"

namespace fedsilo {

// Named dataloaders registered at the endpoint. Registration eagerly loads
// the source so unreadable specs fail up front; fetches during task
// execution are counted, which is how the auth tests prove local data was
// never touched on a rejected task.
class DataloaderRegistry {
public:
    void register_loader(const std::string& name, const std::string& spec);
    const Dataset& fetch(const std::string& name);
    bool has(const std::string& name) const;
    std::uint64_t fetch_count() const { return fetch_count_.load(); }

private:
    std::map<std::string, Dataset> loaded_;
    std::map<std::string, std::string> specs_;
    std::atomic<std::uint64_t> fetch_count_{0};
};

// Everything one endpoint needs to execute tasks. One task runs at a time;
// the runtime owns no threads of its own (the transport or the TCP loop
// provides the single consumer).
class EndpointRuntime {
public:
    EndpointRuntime(std::string endpoint_id, const FederationManifest& manifest,
                    std::shared_ptr<ObjectStore> store, std::size_t inline_threshold);

    DataloaderRegistry& loaders() { return loaders_; }

    // Verify, execute, reply. Auth rejections never touch the dataloader.
    ResultEnvelope handle(const TaskEnvelope& task);

    // the model delivered by the final "receive_final" task, if any
    std::optional<ModelState> final_model();

    const std::string& endpoint_id() const { return endpoint_id_; }

    // registered functions: local_train, evaluate, receive_final
    static bool knows_function(const std::string& name);

private:
    ResultEnvelope run_local_train(const TaskEnvelope& task);
    ResultEnvelope run_evaluate(const TaskEnvelope& task);
    ResultEnvelope run_receive_final(const TaskEnvelope& task);
    const Dataset& shard_for(const TaskEnvelope& task);

    std::string endpoint_id_;
    FederationManifest manifest_;
    std::shared_ptr<ObjectStore> store_;
    std::size_t inline_threshold_;
    DataloaderRegistry loaders_;
    std::mutex final_mu_;
    std::optional<ModelState> final_model_;
    std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();
};

// Dial out to the server and serve tasks until it disconnects. Returns the
// number of tasks executed.
std::size_t endpoint_serve_connect(const std::string& address, EndpointRuntime& runtime);

// Bind, report the bound host:port, accept the server's single connection,
// and serve until it disconnects.
std::size_t endpoint_serve_listen(const std::string& bind_address, EndpointRuntime& runtime,
                                  const std::function<void(const std::string&)>& on_bound);

} // namespace fedsilo
