#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedsilo/aggregate.hpp"
#include "fedsilo/comm.hpp"
#include "fedsilo/endpoint.hpp"
#include "fedsilo/federation.hpp"
#include "fedsilo/partition.hpp"
#include "fedsilo/trainer.hpp"

namespace fedsilo {

struct ExperimentConfig {
    std::string name = "experiment";
    std::string manifest_path; // required for TCP runs; simulation synthesizes one if empty
    std::vector<std::string> roster;
    std::int64_t global_rounds = 5;
    std::string aggregation = "fedavg";
    ModelSpec model;
    TrainerConfig trainer;
    std::string train_loader;
    std::string validation_loader;
    std::optional<PartitionConfig> partition;  // per-client shards derived from train_loader
    std::vector<std::string> client_loaders;   // or spelled out explicitly
    std::size_t inline_threshold = 1u << 20;
    std::string store_spec = "mem:";
    std::string run_log_path;
    std::int64_t task_timeout_ms = 300000;
    std::int64_t connect_timeout_ms = 60000;
    std::int64_t token_ttl_secs = 300;
    std::string server_identity; // defaults to the manifest owner
    bool with_baselines = false;

    std::size_t n_clients() const;
    void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// Loader spec for client slot `index`: the explicit per-client spec when
// given, otherwise the train loader plus dual-Dirichlet shard parameters.
// Endpoints launched with --config/--client-index derive the same spec, so
// in-process and TCP runs see identical shards.
std::string client_loader_spec(const ExperimentConfig& config, std::size_t index);

// Append-only JSON-lines event log: {ts, kind, payload} per line.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(std::string path);
    void event(const std::string& kind, nlohmann::json payload);
    const std::vector<nlohmann::json>& events() const { return events_; }

    static std::vector<nlohmann::json> read_file(const std::string& path);

private:
    std::string path_;
    std::vector<nlohmann::json> events_;
};

struct RunReport {
    std::vector<RoundRecord> rounds;
    std::string final_model_key;
    std::string final_model_sha256;
    std::vector<std::pair<std::string, double>> per_client_accuracy;
    double validation_accuracy = -1.0;
    bool aborted = false;
    std::string abort_reason;
    std::vector<std::string> missing;
};

// The synchronous FL loop: dispatch local_train to every roster endpoint,
// wait on the round barrier, aggregate, and after the last round distribute
// the final model and collect evaluations. Round timeouts abort the run.
RunReport run_federated(const ExperimentConfig& config, Transport& transport,
                        const FederationManifest& manifest, ObjectStore& store, RunLog& log);

struct BaselineReport {
    double global_accuracy = 0.0;
    std::vector<double> per_client_local;
    double local_average = 0.0;
};

// Equal-budget baselines: Global trains on the pooled dataset, Local trains
// per client shard, both for global_rounds of the same per-round batch
// schedule, all evaluated on the shared validation split.
BaselineReport run_baselines(const ExperimentConfig& config);

// In-process experiment: every roster endpoint runs on its own thread behind
// an in-process transport, sharing one object store with the server.
class Simulation {
public:
    explicit Simulation(const ExperimentConfig& config);
    ~Simulation();

    RunReport run(RunLog& log);

    const ExperimentConfig& config() const { return config_; }
    const FederationManifest& manifest() const { return manifest_; }
    ObjectStore& store() { return *store_; }
    std::size_t endpoint_count() const { return endpoints_.size(); }
    EndpointRuntime& endpoint(std::size_t i) { return *endpoints_.at(i); }

private:
    ExperimentConfig config_;
    FederationManifest manifest_;
    std::shared_ptr<ObjectStore> store_;
    std::vector<std::unique_ptr<EndpointRuntime>> endpoints_;
    InProcessTransport transport_;
};

// Text report over a run log, shaped like the FL/Global/Local comparison
// table when baseline events are present.
std::string render_report(const std::vector<nlohmann::json>& events);

} // namespace fedsilo
