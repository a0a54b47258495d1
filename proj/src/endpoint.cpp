#include "fedsilo/endpoint.hpp"

#include <chrono>

#include "fedsilo/config_json.hpp"
#include "fedsilo/net.hpp"
#include "fedsilo/trainer.hpp"

namespace fedsilo {

void DataloaderRegistry::register_loader(const std::string& name, const std::string& spec) {
    if (name.empty()) fail(Err::BadConfig, "dataloader name must be nonempty");
    if (specs_.count(name)) fail(Err::DuplicateName, "dataloader '" + name + "' already registered");
    // eager load: a spec that cannot be read fails registration, not training
    Dataset d = load_dataset(spec);
    specs_.emplace(name, spec);
    loaded_.emplace(name, std::move(d));
}

const Dataset& DataloaderRegistry::fetch(const std::string& name) {
    auto it = loaded_.find(name);
    if (it == loaded_.end())
        fail(Err::SourceUnreadable, "no dataloader registered under '" + name + "'");
    fetch_count_.fetch_add(1);
    return it->second;
}

bool DataloaderRegistry::has(const std::string& name) const { return specs_.count(name) > 0; }

EndpointRuntime::EndpointRuntime(std::string endpoint_id, const FederationManifest& manifest,
                                 std::shared_ptr<ObjectStore> store,
                                 std::size_t inline_threshold)
    : endpoint_id_(std::move(endpoint_id)),
      manifest_(manifest),
      store_(std::move(store)),
      inline_threshold_(inline_threshold) {}

bool EndpointRuntime::knows_function(const std::string& name) {
    return name == "local_train" || name == "evaluate" || name == "receive_final";
}

const Dataset& EndpointRuntime::shard_for(const TaskEnvelope& task) {
    const std::string name = task.config.value("dataloader", std::string());
    if (name.empty()) fail(Err::SourceUnreadable, "task config names no dataloader");
    return loaders_.fetch(name);
}

ResultEnvelope EndpointRuntime::handle(const TaskEnvelope& task) {
    const auto verdict = verify_token(manifest_, task.auth_token, task.task_id);
    if (!verdict.accepted) {
        ResultEnvelope r = ResultEnvelope::failed(task.task_id, endpoint_id_, "AuthRejected");
        r.metrics = {{"reject_reason", verdict.reject_reason}};
        return r;
    }
    if (!knows_function(task.function))
        return ResultEnvelope::failed(task.task_id, endpoint_id_, "UnknownFunction");

    const auto start = std::chrono::steady_clock::now();
    ResultEnvelope r;
    try {
        if (task.function == "local_train") {
            r = run_local_train(task);
        } else if (task.function == "evaluate") {
            r = run_evaluate(task);
        } else {
            r = run_receive_final(task);
        }
    } catch (const Error& e) {
        const bool loader_error = e.code() == Err::SourceUnreadable ||
                                  e.code() == Err::SchemaMismatch ||
                                  e.code() == Err::BadGeneratorParams;
        r = ResultEnvelope::failed(task.task_id, endpoint_id_,
                                   loader_error ? "DataloaderError" : "ExecutionError");
        r.metrics = {{"detail", e.what()}};
    } catch (const std::exception& e) {
        r = ResultEnvelope::failed(task.task_id, endpoint_id_, "ExecutionError");
        r.metrics = {{"detail", e.what()}};
    }
    const auto end = std::chrono::steady_clock::now();
    auto since = [this](std::chrono::steady_clock::time_point t) {
        return std::chrono::duration_cast<std::chrono::microseconds>(t - started_).count();
    };
    r.metrics["exec_start_us"] = since(start);
    r.metrics["exec_end_us"] = since(end);
    return r;
}

ResultEnvelope EndpointRuntime::run_local_train(const TaskEnvelope& task) {
    const ModelSpec spec = model_spec_from_json(task.config.at("model"));
    const TrainerConfig config = trainer_config_from_json(task.config.at("trainer"));
    const Dataset& shard = shard_for(task);

    ToyModel model = build_model(spec);
    const auto bytes = resolve_payload(task.payload, store_.get());
    set_trainable_state(model, decode_state(bytes));

    TrainOutput out = local_train(model, DatasetView::whole(shard), config, task.round);

    ResultEnvelope r;
    r.task_id = task.task_id;
    r.client_id = endpoint_id_;
    r.metrics = metrics_to_json(out.metrics);
    const auto encoded = encode_state(out.trainable);
    r.payload = make_payload(encoded, *store_, inline_threshold_);
    return r;
}

ResultEnvelope EndpointRuntime::run_evaluate(const TaskEnvelope& task) {
    const ModelSpec spec = model_spec_from_json(task.config.at("model"));
    const Dataset& shard = shard_for(task);

    ToyModel model = build_model(spec);
    const auto bytes = resolve_payload(task.payload, store_.get());
    set_trainable_state(model, decode_state(bytes));

    const double acc = evaluate(model, DatasetView::whole(shard));
    ResultEnvelope r;
    r.task_id = task.task_id;
    r.client_id = endpoint_id_;
    r.metrics = {{"accuracy", acc}, {"n_samples", shard.size()}};
    return r;
}

ResultEnvelope EndpointRuntime::run_receive_final(const TaskEnvelope& task) {
    const auto bytes = resolve_payload(task.payload, store_.get());
    ModelState state = decode_state(bytes);
    {
        std::lock_guard lock(final_mu_);
        final_model_ = std::move(state);
    }
    ResultEnvelope r;
    r.task_id = task.task_id;
    r.client_id = endpoint_id_;
    r.metrics = {{"received_bytes", bytes.size()}};
    return r;
}

std::optional<ModelState> EndpointRuntime::final_model() {
    std::lock_guard lock(final_mu_);
    return final_model_;
}

namespace {

// Shared serve loop: hello first, then task->result until EOF.
std::size_t serve_connection(Socket& sock, EndpointRuntime& runtime) {
    sock.send_frame(encode_frame(HelloFrame{runtime.endpoint_id()}));
    std::size_t executed = 0;
    for (;;) {
        std::vector<std::uint8_t> frame;
        if (!sock.recv_frame(frame)) return executed; // server closed the session
        const WireMessage msg = decode_frame(frame);
        const auto* task = std::get_if<TaskEnvelope>(&msg);
        if (!task) continue; // only the server sends, and it only sends tasks
        ResultEnvelope result = runtime.handle(*task);
        sock.send_frame(encode_frame(result));
        ++executed;
    }
}

} // namespace

std::size_t endpoint_serve_connect(const std::string& address, EndpointRuntime& runtime) {
    Socket sock = Socket::connect(address);
    return serve_connection(sock, runtime);
}

std::size_t endpoint_serve_listen(const std::string& bind_address, EndpointRuntime& runtime,
                                  const std::function<void(const std::string&)>& on_bound) {
    Listener listener = Listener::bind(bind_address);
    if (on_bound) on_bound(listener.address());
    Socket sock = listener.accept();
    return serve_connection(sock, runtime);
}

} // namespace fedsilo
