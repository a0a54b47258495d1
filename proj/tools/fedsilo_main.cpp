#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedsilo/config_json.hpp"
#include "fedsilo/endpoint.hpp"
#include "fedsilo/net.hpp"
#include "fedsilo/orchestrator.hpp"
#include "fedsilo/tcp_transport.hpp"

namespace {

using namespace fedsilo;

std::vector<int> read_labels_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::SourceUnreadable, "cannot open labels file '" + path + "'");
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        try {
            labels.push_back(std::stoi(line));
        } catch (const std::exception&) {
            fail(Err::SchemaMismatch, "labels file line '" + line + "' is not an integer");
        }
    }
    if (labels.empty()) fail(Err::EmptyLabels, "labels file '" + path + "' has no labels");
    return labels;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Err::SourceUnreadable, "cannot write '" + path + "'");
    out << text;
}

int cmd_partition(const std::string& labels_path, std::size_t clients, double alpha1,
                  double alpha2, std::uint64_t seed, const std::string& out_path,
                  const std::string& report_path) {
    const std::vector<int> labels = read_labels_file(labels_path);
    PartitionConfig config{clients, alpha1, alpha2, seed};
    const PartitionPlan plan = dual_dirichlet_partition(labels, config);
    const std::string plan_json = partition_plan_to_json(plan);
    if (out_path.empty()) {
        std::cout << plan_json << "\n";
    } else {
        write_text(out_path, plan_json + "\n");
    }
    const std::string csv = partition_report_csv(partition_report(plan, labels));
    if (report_path.empty()) {
        std::cerr << csv;
    } else {
        write_text(report_path, csv);
    }
    return 0;
}

int cmd_run(const std::string& config_path, bool simulate, const std::string& listen,
            const std::string& ready_file, const std::string& final_model_path) {
    ExperimentConfig config = load_experiment_config(config_path);
    RunLog log(config.run_log_path);

    auto export_final = [&](ObjectStore& store, const RunReport& report) {
        if (final_model_path.empty() || report.aborted) return;
        const auto bytes = store.get(report.final_model_key);
        std::ofstream out(final_model_path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  std::streamsize(bytes.size()));
    };

    RunReport report;
    if (simulate) {
        Simulation sim(config);
        report = sim.run(log);
        export_final(sim.store(), report);
    } else {
        if (config.manifest_path.empty())
            fail(Err::BadConfig, "TCP runs need a manifest in the config");
        const FederationManifest manifest = load_manifest(config.manifest_path);
        auto store = open_store(config.store_spec);

        if (config.roster.empty())
            for (const auto& e : manifest.endpoints) config.roster.push_back(e.endpoint_id);

        TcpServerTransport transport;
        const std::string addr = transport.listen(listen.empty() ? "127.0.0.1:0" : listen);
        std::cerr << "listening on " << addr << "\n";
        if (!ready_file.empty()) write_text(ready_file, addr + "\n");

        // endpoints that published a listen address get dialed; the rest dial in
        for (const auto& id : config.roster) {
            const EndpointRecord* record = manifest.find_endpoint(id);
            if (record && !record->address.empty()) {
                try {
                    transport.dial_endpoint(record->address);
                } catch (const Error& e) {
                    std::cerr << "dial " << record->address << ": " << e.what() << "\n";
                }
            }
        }

        const std::set<std::string> roster(config.roster.begin(), config.roster.end());
        if (!transport.wait_for_endpoints(
                roster, std::chrono::milliseconds(config.connect_timeout_ms))) {
            std::set<std::string> connected = transport.connected_endpoints();
            std::string missing;
            for (const auto& id : roster)
                if (!connected.count(id)) missing += " " + id;
            fail(Err::EndpointUnreachable, "roster endpoints not connected:" + missing);
        }
        report = run_federated(config, transport, manifest, *store, log);
        transport.shutdown();
        export_final(*store, report);
    }

    if (config.with_baselines && !report.aborted) {
        const BaselineReport base = run_baselines(config);
        log.event("baselines", {{"global_accuracy", base.global_accuracy},
                                {"per_client_local", base.per_client_local},
                                {"local_average", base.local_average}});
    }

    std::cout << render_report(log.events());
    return report.aborted ? 2 : 0;
}

int cmd_endpoint(const std::string& manifest_path, const std::string& secret_path,
                 const std::string& endpoint_id, const std::string& connect,
                 const std::string& listen, const std::string& dataloader,
                 const std::string& config_path, std::int64_t client_index,
                 std::string store_spec, std::uint64_t inline_threshold,
                 const std::string& ready_file) {
    const FederationManifest manifest = load_manifest(manifest_path, secret_path);
    const EndpointRecord* record = manifest.find_endpoint(endpoint_id);
    if (!record) fail(Err::EndpointUnknown, "'" + endpoint_id + "' not in manifest");

    std::string loader_spec = dataloader;
    if (!config_path.empty()) {
        const ExperimentConfig config = load_experiment_config(config_path);
        if (loader_spec.empty()) {
            if (client_index < 0)
                fail(Err::BadConfig, "--client-index required with --config");
            loader_spec = client_loader_spec(config, std::size_t(client_index));
        }
        if (store_spec.empty()) store_spec = config.store_spec;
        if (inline_threshold == 0) inline_threshold = config.inline_threshold;
    }
    if (loader_spec.empty())
        fail(Err::BadConfig, "a dataloader spec is required (--dataloader or --config)");
    if (store_spec.empty()) store_spec = "mem:";
    if (inline_threshold == 0) inline_threshold = 1u << 20;

    EndpointRuntime runtime(endpoint_id, manifest, open_store(store_spec), inline_threshold);
    runtime.loaders().register_loader(record->dataloader_name, loader_spec);

    std::size_t executed = 0;
    if (!connect.empty()) {
        std::cerr << "endpoint " << endpoint_id << " connecting to " << connect << "\n";
        executed = endpoint_serve_connect(connect, runtime);
    } else {
        executed = endpoint_serve_listen(listen, runtime, [&](const std::string& bound) {
            std::cerr << "endpoint " << endpoint_id << " listening on " << bound << "\n";
            if (!ready_file.empty()) write_text(ready_file, bound + "\n");
        });
    }
    std::cerr << "endpoint " << endpoint_id << " served " << executed << " tasks\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedsilo: cross-silo federated learning at desk scale"};
    app.require_subcommand(1);

    // federation management
    auto* fed = app.add_subcommand("federation", "manage federation manifests");
    fed->require_subcommand(1);

    std::string owner, email, manifest_path, identity, dataloader_name, address, out_path;
    auto* fed_create = fed->add_subcommand("create", "create a federation");
    fed_create->add_option("--owner", owner, "owner identity")->required();
    fed_create->add_option("--email", email, "owner email");
    fed_create->add_option("--out", out_path, "manifest output path")->required();

    auto* fed_add = fed->add_subcommand("add-member", "invite a member");
    fed_add->add_option("--manifest", manifest_path, "manifest path")->required();
    fed_add->add_option("--identity", identity, "member identity")->required();
    fed_add->add_option("--email", email, "member email");

    auto* fed_reg = fed->add_subcommand("register-endpoint", "register a client endpoint");
    fed_reg->add_option("--manifest", manifest_path, "manifest path")->required();
    fed_reg->add_option("--owner", owner, "endpoint owner identity")->required();
    fed_reg->add_option("--dataloader-name", dataloader_name, "registered dataloader name")
        ->required();
    fed_reg->add_option("--address", address, "optional listen address (host:port)");

    // partitioner
    std::string labels_path, report_path;
    std::size_t clients = 4;
    double alpha1 = 2.0, alpha2 = 8.0;
    std::uint64_t seed = 0;
    auto* part = app.add_subcommand("partition", "dual-Dirichlet dataset partitioning");
    part->add_option("--labels", labels_path, "file with one integer label per line")
        ->required();
    part->add_option("--clients", clients, "number of clients")
        ->check(CLI::PositiveNumber);
    part->add_option("--alpha1", alpha1, "class concentration within a client")
        ->check(CLI::PositiveNumber);
    part->add_option("--alpha2", alpha2, "size concentration across clients")
        ->check(CLI::PositiveNumber);
    part->add_option("--seed", seed, "rng seed");
    part->add_option("--out", out_path, "plan JSON output (default: stdout)");
    part->add_option("--report", report_path, "histogram CSV output (default: stderr)");

    // endpoint service
    std::string secret_path, endpoint_id, connect_addr, listen_addr, dataloader_spec;
    std::string config_path, ready_file, store_spec;
    std::int64_t client_index = -1;
    std::uint64_t inline_threshold = 0;
    auto* ep = app.add_subcommand("endpoint", "run a client endpoint");
    ep->add_option("--manifest", manifest_path, "manifest path")->required();
    ep->add_option("--secret", secret_path, "secret path (default: <group_id>.secret)");
    ep->add_option("--endpoint-id", endpoint_id, "this endpoint's id")->required();
    auto* opt_connect = ep->add_option("--connect", connect_addr, "server address to dial");
    ep->add_option("--listen", listen_addr, "address to listen on for the server")
        ->excludes(opt_connect);
    ep->add_option("--dataloader", dataloader_spec, "dataloader spec");
    ep->add_option("--config", config_path, "experiment config (derives loader/store)");
    ep->add_option("--client-index", client_index, "roster slot for loader derivation");
    ep->add_option("--store", store_spec, "object store spec");
    ep->add_option("--inline-threshold", inline_threshold, "payload inline threshold bytes");
    ep->add_option("--ready-file", ready_file, "write the bound address here");

    // server runs
    bool simulate = false;
    std::string final_model_path;
    auto* run = app.add_subcommand("run", "run a federated experiment");
    run->add_option("--config", config_path, "experiment config JSON")->required();
    run->add_flag("--simulate", simulate, "host all clients in-process");
    run->add_option("--listen", listen_addr, "bind address for TCP mode");
    run->add_option("--ready-file", ready_file, "write the bound address here");
    run->add_option("--final-model", final_model_path,
                    "write the final model state here (.apfl)");

    auto* base = app.add_subcommand("baselines", "global/local baseline comparison");
    base->add_option("--config", config_path, "experiment config JSON")->required();

    std::string runlog_path;
    auto* rep = app.add_subcommand("report", "summarize a run log");
    rep->add_option("runlog", runlog_path, "run log path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (fed_create->parsed()) {
            FederationManifest m = create_federation(owner, email);
            save_manifest(m, out_path);
            std::cout << m.group_id << "\n";
            return 0;
        }
        if (fed_add->parsed()) {
            FederationManifest m = load_manifest(manifest_path, secret_path);
            add_member(m, identity, email);
            save_manifest(m, manifest_path);
            return 0;
        }
        if (fed_reg->parsed()) {
            FederationManifest m = load_manifest(manifest_path, secret_path);
            const EndpointRecord& record =
                register_endpoint(m, owner, dataloader_name, address);
            save_manifest(m, manifest_path);
            std::cout << record.endpoint_id << "\n";
            return 0;
        }
        if (part->parsed())
            return cmd_partition(labels_path, clients, alpha1, alpha2, seed, out_path,
                                 report_path);
        if (ep->parsed()) {
            if (connect_addr.empty() && listen_addr.empty()) {
                std::cerr << "endpoint needs --connect or --listen\n";
                return 1;
            }
            return cmd_endpoint(manifest_path, secret_path, endpoint_id, connect_addr,
                                listen_addr, dataloader_spec, config_path, client_index,
                                store_spec, inline_threshold, ready_file);
        }
        if (run->parsed())
            return cmd_run(config_path, simulate, listen_addr, ready_file,
                           final_model_path);
        if (base->parsed()) {
            const ExperimentConfig config = load_experiment_config(config_path);
            const BaselineReport b = run_baselines(config);
            nlohmann::json j = {{"global_accuracy", b.global_accuracy},
                                {"per_client_local", b.per_client_local},
                                {"local_average", b.local_average}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (rep->parsed()) {
            std::cout << render_report(RunLog::read_file(runlog_path));
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
