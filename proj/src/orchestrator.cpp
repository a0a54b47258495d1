#include "fedsilo/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fedsilo/config_json.hpp"
#include "fedsilo/crypto.hpp"

namespace fedsilo {

std::size_t ExperimentConfig::n_clients() const {
    if (!client_loaders.empty()) return client_loaders.size();
    if (partition) return partition->n_clients;
    return roster.size();
}

void ExperimentConfig::validate() const {
    if (global_rounds < 1) fail(Err::BadConfig, "global_rounds must be >= 1");
    if (aggregation != "fedavg")
        fail(Err::BadConfig, "aggregation '" + aggregation + "' not available");
    if (train_loader.empty() && client_loaders.empty())
        fail(Err::BadConfig, "dataset.train or dataset.client_loaders required");
    if (n_clients() == 0) fail(Err::BadConfig, "no clients configured");
    trainer.validate();
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.name = j.value("name", c.name);
        c.manifest_path = j.value("manifest", std::string());
        c.roster = j.value("roster", std::vector<std::string>());
        c.global_rounds = j.value("global_rounds", c.global_rounds);
        c.aggregation = j.value("aggregation", c.aggregation);
        c.model = model_spec_from_json(j.at("model"));
        c.trainer = trainer_config_from_json(j.value("trainer", nlohmann::json::object()));
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            c.train_loader = d.value("train", std::string());
            c.validation_loader = d.value("validation", std::string());
            if (d.contains("partition")) {
                const auto& p = d.at("partition");
                PartitionConfig pc;
                pc.n_clients = p.at("clients").get<std::size_t>();
                pc.alpha1 = p.at("alpha1").get<double>();
                pc.alpha2 = p.at("alpha2").get<double>();
                pc.seed = p.value("seed", std::uint64_t(0));
                c.partition = pc;
            }
            c.client_loaders = d.value("client_loaders", std::vector<std::string>());
        }
        c.inline_threshold = j.value("inline_threshold", c.inline_threshold);
        c.store_spec = j.value("store", c.store_spec);
        c.run_log_path = j.value("run_log", std::string());
        c.task_timeout_ms = j.value("task_timeout_ms", c.task_timeout_ms);
        c.connect_timeout_ms = j.value("connect_timeout_ms", c.connect_timeout_ms);
        c.token_ttl_secs = j.value("token_ttl_secs", c.token_ttl_secs);
        c.server_identity = j.value("server_identity", std::string());
        c.with_baselines = j.value("baselines", false);
    } catch (const Error&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        fail(Err::BadConfig, std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::SourceUnreadable, "cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(Err::BadConfig, "config '" + path + "': " + e.what());
    }
    return experiment_config_from_json(j);
}

namespace {

std::string format_double_param(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

} // namespace

std::string client_loader_spec(const ExperimentConfig& config, std::size_t index) {
    if (index < config.client_loaders.size()) return config.client_loaders[index];
    if (!config.partition)
        fail(Err::BadConfig, "no loader for client " + std::to_string(index) +
                                 " (no partition config and no explicit loader)");
    if (index >= config.partition->n_clients)
        fail(Err::BadConfig, "client index " + std::to_string(index) + " out of range");
    const PartitionConfig& p = *config.partition;
    std::string spec = config.train_loader;
    spec += spec.find('?') == std::string::npos ? '?' : '&';
    spec += "clients=" + std::to_string(p.n_clients);
    spec += "&alpha1=" + format_double_param(p.alpha1);
    spec += "&alpha2=" + format_double_param(p.alpha2);
    spec += "&pseed=" + std::to_string(p.seed);
    spec += "&client=" + std::to_string(index);
    return spec;
}

RunLog::RunLog(std::string path) : path_(std::move(path)) {
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::trunc);
        if (!out) fail(Err::SourceUnreadable, "cannot open run log '" + path_ + "'");
    }
}

void RunLog::event(const std::string& kind, nlohmann::json payload) {
    nlohmann::json line = {{"ts", std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::system_clock::now().time_since_epoch())
                                      .count()},
                           {"kind", kind},
                           {"payload", std::move(payload)}};
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        out << line.dump() << "\n";
    }
    events_.push_back(std::move(line));
}

std::vector<nlohmann::json> RunLog::read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::SourceUnreadable, "cannot open run log '" + path + "'");
    std::vector<nlohmann::json> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            events.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            fail(Err::BadConfig,
                 "run log line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return events;
}

namespace {

nlohmann::json payload_log_fields(const PayloadRef& p) {
    if (p.is_inline()) return {{"payload", "inline"}, {"bytes", p.bytes.size()}};
    return {{"payload", "object"}, {"key", p.key}, {"bytes", p.size}};
}

struct Abort {
    std::string reason;
    std::vector<std::string> missing;
};

} // namespace

RunReport run_federated(const ExperimentConfig& config, Transport& transport,
                        const FederationManifest& manifest, ObjectStore& store, RunLog& log) {
    config.validate();
    RunReport report;

    std::vector<std::string> roster = config.roster;
    if (roster.empty())
        for (const auto& e : manifest.endpoints) roster.push_back(e.endpoint_id);
    if (roster.empty()) fail(Err::BadConfig, "empty roster");
    for (const auto& id : roster)
        if (!manifest.find_endpoint(id))
            fail(Err::BadConfig, "roster endpoint '" + id + "' not in manifest");

    const std::string sender = config.server_identity.empty()
                                   ? (manifest.owner() ? manifest.owner()->identity : "")
                                   : config.server_identity;
    if (!manifest.is_member(sender)) fail(Err::NotAMember, "server identity '" + sender + "'");

    const auto timeout = std::chrono::milliseconds(config.task_timeout_ms);
    const std::set<std::string> roster_set(roster.begin(), roster.end());

    ToyModel model = build_model(config.model);
    ModelState trainable = trainable_state(model);

    log.event("run_start", {{"name", config.name},
                            {"global_rounds", config.global_rounds},
                            {"roster", roster},
                            {"aggregation", config.aggregation},
                            {"group_id", manifest.group_id}});

    auto dispatch_round =
        [&](const std::string& function, std::int64_t round, const PayloadRef& payload,
            const nlohmann::json& extra_config)
        -> std::vector<std::pair<std::string, PendingResult>> {
        std::vector<std::pair<std::string, PendingResult>> handles;
        for (const auto& endpoint_id : roster) {
            TaskEnvelope env;
            env.task_id = new_uuid();
            env.function = function;
            env.round = round;
            env.config = extra_config;
            env.config["dataloader"] = manifest.find_endpoint(endpoint_id)->dataloader_name;
            env.payload = payload;
            env.sender = sender;
            env.auth_token =
                issue_token(manifest, sender, env.task_id, round, config.token_ttl_secs);
            nlohmann::json fields = payload_log_fields(payload);
            fields["task_id"] = env.task_id;
            fields["endpoint"] = endpoint_id;
            fields["function"] = function;
            fields["round"] = round;
            log.event("dispatch", fields);
            handles.emplace_back(endpoint_id, transport.dispatch(endpoint_id, env));
        }
        return handles;
    };

    auto collect = [&](std::vector<std::pair<std::string, PendingResult>>& handles)
        -> std::variant<std::vector<ResultEnvelope>, Abort> {
        WaitAllOutcome outcome = wait_all(handles, timeout);
        for (const auto& r : outcome.results) {
            nlohmann::json fields = payload_log_fields(r.payload);
            fields["task_id"] = r.task_id;
            fields["client_id"] = r.client_id;
            fields["ok"] = r.ok;
            if (!r.ok) fields["reason"] = r.fail_reason;
            log.event("result", fields);
        }
        if (!outcome.failed.empty()) {
            Abort abort;
            abort.reason = "RoundTimeout: " + outcome.failed.front().second;
            for (const auto& [id, err] : outcome.failed) abort.missing.push_back(id);
            return abort;
        }
        for (const auto& r : outcome.results) {
            if (!r.ok)
                return Abort{"client " + r.client_id + " failed: " + r.fail_reason, {}};
        }
        return outcome.results;
    };

    auto abort_run = [&](const Abort& abort) {
        report.aborted = true;
        report.abort_reason = abort.reason;
        report.missing = abort.missing;
        log.event("run_end",
                  {{"status", "aborted"}, {"reason", abort.reason}, {"missing", abort.missing}});
        return report;
    };

    // every roster endpoint must be reachable before the first dispatch
    {
        const std::set<std::string> connected = transport.connected_endpoints();
        for (const auto& id : roster)
            if (!connected.count(id))
                return abort_run({"EndpointUnreachable: " + id, {id}});
    }

    const nlohmann::json train_config = {{"model", model_spec_to_json(config.model)},
                                         {"trainer", trainer_config_to_json(config.trainer)}};

    for (std::int64_t round = 0; round < config.global_rounds; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto encoded = encode_state(trainable);
        PayloadRef payload = make_payload(encoded, store, config.inline_threshold);

        std::vector<std::pair<std::string, PendingResult>> handles;
        try {
            handles = dispatch_round("local_train", round, payload, train_config);
        } catch (const Error& e) {
            return abort_run({e.what(), {}});
        }
        auto collected = collect(handles);
        if (const auto* abort = std::get_if<Abort>(&collected)) return abort_run(*abort);

        std::vector<ClientUpdate> updates;
        try {
            for (const auto& r : std::get<std::vector<ResultEnvelope>>(collected)) {
                ClientUpdate u;
                u.client_id = r.client_id;
                u.round = round;
                u.state = decode_state(resolve_payload(r.payload, &store));
                u.metrics = metrics_from_json(r.metrics);
                u.n_samples = u.metrics.n_samples;
                updates.push_back(std::move(u));
            }
            if (!barrier_complete(check_barrier(roster_set, updates, round)))
                return abort_run({"round barrier incomplete", {}});
            trainable = fedavg(updates);
        } catch (const Error& e) {
            return abort_run({std::string("AggregationError: ") + e.what(), {}});
        }

        RoundRecord record;
        record.round = round;
        for (const auto& u : updates) record.contributors.push_back(u.client_id);
        std::sort(record.contributors.begin(), record.contributors.end());
        double loss_acc = 0.0;
        for (const auto& u : updates) {
            record.total_samples += u.n_samples;
            loss_acc += u.metrics.loss * double(u.n_samples);
        }
        record.mean_loss = loss_acc / double(record.total_samples);
        const auto agg_encoded = encode_state(trainable);
        record.state_sha256 = sha256_hex(agg_encoded);
        record.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
        report.rounds.push_back(record);
        log.event("round", {{"round", record.round},
                            {"contributors", record.contributors},
                            {"total_samples", record.total_samples},
                            {"mean_loss", record.mean_loss},
                            {"wall_ms", record.wall_ms},
                            {"state_sha256", record.state_sha256}});
    }

    // final model goes to the store unconditionally so the report can name it
    const auto final_bytes = encode_state(trainable);
    report.final_model_sha256 = sha256_hex(final_bytes);
    report.final_model_key = "payload/" + report.final_model_sha256;
    if (!store.exists(report.final_model_key)) store.put(report.final_model_key, final_bytes);
    log.event("final_model",
              {{"key", report.final_model_key}, {"bytes", final_bytes.size()}});

    // every data owner receives the final parameters
    PayloadRef final_payload = make_payload(final_bytes, store, config.inline_threshold);
    {
        std::vector<std::pair<std::string, PendingResult>> handles;
        try {
            handles = dispatch_round("receive_final", config.global_rounds, final_payload,
                                     nlohmann::json::object());
        } catch (const Error& e) {
            return abort_run({e.what(), {}});
        }
        auto collected = collect(handles);
        if (const auto* abort = std::get_if<Abort>(&collected)) return abort_run(*abort);
    }

    // per-client accuracy of the final model on each client's local shard
    {
        const nlohmann::json eval_config = {{"model", model_spec_to_json(config.model)}};
        std::vector<std::pair<std::string, PendingResult>> handles;
        try {
            handles = dispatch_round("evaluate", config.global_rounds, final_payload,
                                     eval_config);
        } catch (const Error& e) {
            return abort_run({e.what(), {}});
        }
        auto collected = collect(handles);
        if (const auto* abort = std::get_if<Abort>(&collected)) return abort_run(*abort);
        for (const auto& r : std::get<std::vector<ResultEnvelope>>(collected)) {
            const double acc = r.metrics.value("accuracy", -1.0);
            report.per_client_accuracy.emplace_back(r.client_id, acc);
            log.event("eval", {{"scope", r.client_id}, {"accuracy", acc}});
        }
        std::sort(report.per_client_accuracy.begin(), report.per_client_accuracy.end());
    }

    // shared validation split, evaluated server-side
    if (!config.validation_loader.empty()) {
        const Dataset val = load_dataset(config.validation_loader);
        ToyModel final_model = build_model(config.model);
        set_trainable_state(final_model, trainable);
        report.validation_accuracy = evaluate(final_model, DatasetView::whole(val));
        log.event("eval", {{"scope", "validation"}, {"accuracy", report.validation_accuracy}});
    }

    log.event("run_end", {{"status", "ok"}});
    return report;
}

BaselineReport run_baselines(const ExperimentConfig& config) {
    config.validate();
    if (config.validation_loader.empty())
        fail(Err::BadConfig, "baselines need dataset.validation");
    const Dataset val = load_dataset(config.validation_loader);
    const DatasetView val_view = DatasetView::whole(val);

    BaselineReport report;
    {
        const Dataset pooled = load_dataset(config.train_loader);
        ToyModel model = build_model(config.model);
        for (std::int64_t round = 0; round < config.global_rounds; ++round)
            local_train(model, DatasetView::whole(pooled), config.trainer, round);
        report.global_accuracy = evaluate(model, val_view);
    }
    for (std::size_t i = 0; i < config.n_clients(); ++i) {
        const Dataset shard = load_dataset(client_loader_spec(config, i));
        ToyModel model = build_model(config.model);
        for (std::int64_t round = 0; round < config.global_rounds; ++round)
            local_train(model, DatasetView::whole(shard), config.trainer, round);
        report.per_client_local.push_back(evaluate(model, val_view));
    }
    double sum = 0.0;
    for (double a : report.per_client_local) sum += a;
    report.local_average = sum / double(report.per_client_local.size());
    return report;
}

Simulation::Simulation(const ExperimentConfig& config) : config_(config) {
    config_.validate();
    store_ = open_store(config_.store_spec);

    if (!config_.manifest_path.empty()) {
        manifest_ = load_manifest(config_.manifest_path);
        if (config_.roster.empty())
            for (const auto& e : manifest_.endpoints) config_.roster.push_back(e.endpoint_id);
    } else {
        // ephemeral federation with roster ids derived from the config seed,
        // so rerunning the same config reproduces the same aggregation order
        manifest_ = create_federation("server@local", "server@local");
        config_.roster.clear();
        for (std::size_t i = 0; i < config_.n_clients(); ++i) {
            EndpointRecord record = register_endpoint(manifest_, "server@local",
                                                      "shard" + std::to_string(i), "");
            manifest_.endpoints.back().endpoint_id =
                uuid_from_seed(mix_seed(config_.trainer.seed, 0xE9D0 + i));
            config_.roster.push_back(manifest_.endpoints.back().endpoint_id);
        }
    }
    if (config_.roster.size() != config_.n_clients())
        fail(Err::BadConfig, "roster size != client count");

    for (std::size_t i = 0; i < config_.roster.size(); ++i) {
        const std::string& id = config_.roster[i];
        const EndpointRecord* record = manifest_.find_endpoint(id);
        if (!record) fail(Err::BadConfig, "roster endpoint '" + id + "' not in manifest");
        auto runtime =
            std::make_unique<EndpointRuntime>(id, manifest_, store_, config_.inline_threshold);
        runtime->loaders().register_loader(record->dataloader_name,
                                           client_loader_spec(config_, i));
        EndpointRuntime* raw = runtime.get();
        transport_.register_endpoint(
            id, [raw](const TaskEnvelope& task) { return raw->handle(task); });
        endpoints_.push_back(std::move(runtime));
    }
}

Simulation::~Simulation() { transport_.shutdown(); }

RunReport Simulation::run(RunLog& log) {
    return run_federated(config_, transport_, manifest_, *store_, log);
}

namespace {

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

} // namespace

std::string render_report(const std::vector<nlohmann::json>& events) {
    std::ostringstream out;
    std::string name = "run";
    std::string status = "incomplete";
    std::string reason;
    std::vector<std::string> missing;
    std::size_t rounds_seen = 0;
    double fl_acc = -1.0;
    std::optional<BaselineReport> baselines;
    std::vector<std::pair<std::string, double>> client_accs;
    std::string final_key;

    out << "round  contributors  samples  mean_loss\n";
    for (const auto& e : events) {
        const std::string kind = e.value("kind", "");
        const auto& p = e.value("payload", nlohmann::json::object());
        if (kind == "run_start") {
            name = p.value("name", name);
        } else if (kind == "round") {
            ++rounds_seen;
            out << "  " << p.value("round", -1) << "      "
                << p.value("contributors", std::vector<std::string>{}).size() << "         "
                << p.value("total_samples", 0) << "     " << fixed3(p.value("mean_loss", 0.0))
                << "\n";
        } else if (kind == "eval") {
            const std::string scope = p.value("scope", "");
            if (scope == "validation") {
                fl_acc = p.value("accuracy", -1.0);
            } else {
                client_accs.emplace_back(scope, p.value("accuracy", -1.0));
            }
        } else if (kind == "baselines") {
            BaselineReport b;
            b.global_accuracy = p.value("global_accuracy", 0.0);
            b.per_client_local = p.value("per_client_local", std::vector<double>{});
            b.local_average = p.value("local_average", 0.0);
            baselines = b;
        } else if (kind == "final_model") {
            final_key = p.value("key", "");
        } else if (kind == "run_end") {
            status = p.value("status", "unknown");
            reason = p.value("reason", "");
            missing = p.value("missing", std::vector<std::string>{});
        }
    }

    std::ostringstream head;
    head << "run: " << name << "\n";
    head << "status: " << status;
    if (status == "aborted") {
        head << " (" << reason << ")";
        if (!missing.empty()) {
            head << " missing:";
            for (const auto& id : missing) head << " " << id;
        }
    }
    head << "\n";
    head << "rounds: " << rounds_seen << "\n";
    if (!final_key.empty()) head << "final model: " << final_key << "\n";

    std::string result = head.str() + out.str();

    if (!client_accs.empty()) {
        result += "final-model accuracy on client shards:\n";
        for (const auto& [id, acc] : client_accs)
            result += "  " + id + "  " + fixed3(acc) + "\n";
    }

    if (fl_acc >= 0.0) {
        result += "\nDataset";
        const std::string pad(name.size() > 7 ? name.size() - 7 : 0, ' ');
        result += pad + "  FL     Global  LocalAvg  Local\n";
        result += name + "  " + fixed3(fl_acc) + "  ";
        if (baselines) {
            result += fixed3(baselines->global_accuracy) + "   " +
                      fixed3(baselines->local_average) + "     [";
            for (std::size_t i = 0; i < baselines->per_client_local.size(); ++i) {
                if (i) result += ", ";
                result += fixed3(baselines->per_client_local[i]);
            }
            result += "]\n";
        } else {
            result += "-       -         -\n";
        }
    }
    return result;
}

} // namespace fedsilo
