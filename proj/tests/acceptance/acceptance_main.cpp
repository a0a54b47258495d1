// Acceptance suite: runs every criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <signal.h>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "fedsilo/config_json.hpp"
#include "fedsilo/crypto.hpp"
#include "fedsilo/orchestrator.hpp"
#include "fedsilo/tcp_transport.hpp"

using namespace fedsilo;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int number;
    std::string name;
    std::function<bool(std::string&)> run;
};

// ---------- 1: LoRA accounting ----------

bool c1_lora_accounting(std::string& detail) {
    AdapterSpec spec;
    spec.rank = 8;
    spec.scaling = 32.0;
    spec.target_names = {"q_proj", "v_proj"};
    const std::uint64_t bytes = trainable_bytes(spec, llama2_7b_profile());
    char mib[32];
    std::snprintf(mib, sizeof(mib), "%.1f MiB", double(bytes) / (1024.0 * 1024.0));
    detail = std::to_string(bytes) + " bytes = " + mib;
    return bytes == 16777216ULL && std::string(mib) == "16.0 MiB";
}

// ---------- 2: FedAvg oracle equivalence ----------

ModelState fedavg_oracle(const std::vector<ClientUpdate>& updates) {
    double total = 0.0;
    for (const auto& u : updates) total += double(u.n_samples);
    ModelState out;
    for (std::size_t e = 0; e < updates.front().state.entries().size(); ++e) {
        const auto& [name, proto] = updates.front().state.entries()[e];
        Tensor acc(proto.dims(), proto.dtype());
        for (std::size_t i = 0; i < acc.size(); ++i) {
            double sum = 0.0;
            for (const auto& u : updates)
                sum += double(u.n_samples) * u.state.entries()[e].second.get(i);
            acc.set(i, sum / total);
        }
        out.add(name, std::move(acc));
    }
    return out;
}

bool c2_fedavg_oracle(std::string& detail) {
    Rng rng(0xFEDA);
    double worst = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t n_clients = 1 + rng.below(5);
        const std::size_t n_tensors = 1 + rng.below(4);
        std::vector<std::vector<std::size_t>> shapes;
        for (std::size_t t = 0; t < n_tensors; ++t) {
            const std::size_t rows = 1 + rng.below(8);
            shapes.push_back({rows, 1 + rng.below(64 / rows)});
        }
        std::vector<ClientUpdate> updates;
        for (std::size_t c = 0; c < n_clients; ++c) {
            ClientUpdate u;
            u.client_id = "client" + std::to_string(c);
            u.n_samples = 1 + rng.below(5000);
            for (std::size_t t = 0; t < n_tensors; ++t) {
                Tensor tensor(shapes[t]);
                for (std::size_t i = 0; i < tensor.size(); ++i)
                    tensor.set(i, rng.normal(0.0, 3.0));
                u.state.add("p" + std::to_string(t), std::move(tensor));
            }
            updates.push_back(std::move(u));
        }

        const ModelState got = fedavg(updates);
        const ModelState want = fedavg_oracle(updates);
        for (std::size_t e = 0; e < got.entries().size(); ++e)
            for (std::size_t i = 0; i < got.entries()[e].second.size(); ++i)
                worst = std::max(worst, std::abs(got.entries()[e].second.get(i) -
                                                 want.entries()[e].second.get(i)));
        if (worst >= 1e-12) {
            detail = "oracle deviation " + std::to_string(worst);
            return false;
        }

        auto shuffled = updates;
        rng.shuffle(shuffled);
        if (!(fedavg(shuffled) == got)) {
            detail = "permutation changed the result";
            return false;
        }
        auto scaled = updates;
        for (auto& u : scaled) u.n_samples *= 3;
        if (!(fedavg(scaled) == got)) {
            detail = "scaling n_samples changed the result";
            return false;
        }
        for (std::size_t e = 0; e < got.entries().size(); ++e) {
            for (std::size_t i = 0; i < got.entries()[e].second.size(); ++i) {
                double lo = updates.front().state.entries()[e].second.get(i), hi = lo;
                for (const auto& u : updates) {
                    lo = std::min(lo, u.state.entries()[e].second.get(i));
                    hi = std::max(hi, u.state.entries()[e].second.get(i));
                }
                const double v = got.entries()[e].second.get(i);
                if (v < lo || v > hi) {
                    detail = "element left the contribution hull";
                    return false;
                }
            }
        }
    }
    std::ostringstream out;
    out << "200 update sets, max |fedavg - oracle| = " << worst;
    detail = out.str();
    return true;
}

// ---------- 3: dual-Dirichlet statistics ----------

bool c3_partition_stats(std::string& detail) {
    std::vector<int> labels(10000);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(i % 10);

    std::vector<double> fractions;
    fractions.reserve(4000);
    for (int seed = 0; seed < 1000; ++seed) {
        PartitionConfig config{4, 2.0, 8.0, std::uint64_t(seed)};
        const PartitionPlan plan = dual_dirichlet_partition(labels, config);

        std::vector<char> seen(labels.size(), 0);
        std::size_t total = 0;
        for (const auto& shard : plan.assignments) {
            if (shard.empty()) {
                detail = "empty client shard";
                return false;
            }
            for (std::size_t idx : shard) {
                if (idx >= labels.size() || seen[idx]) {
                    detail = "not a disjoint cover";
                    return false;
                }
                seen[idx] = 1;
                ++total;
            }
            fractions.push_back(double(shard.size()) / double(labels.size()));
        }
        if (total != labels.size()) {
            detail = "samples dropped";
            return false;
        }
    }

    double mean = std::accumulate(fractions.begin(), fractions.end(), 0.0) /
                  double(fractions.size());
    double var = 0.0;
    for (double f : fractions) var += (f - mean) * (f - mean);
    var /= double(fractions.size());
    const double expected_var = (3.0 / 16.0) / 33.0;

    if (std::abs(mean - 0.25) > 0.02) {
        detail = "size mean " + std::to_string(mean);
        return false;
    }
    if (var < 0.8 * expected_var || var > 1.2 * expected_var) {
        detail = "size variance " + std::to_string(var) + " vs closed form " +
                 std::to_string(expected_var);
        return false;
    }

    auto mean_max_share = [&](double alpha1) {
        double acc = 0.0;
        int count = 0;
        for (int seed = 0; seed < 120; ++seed) {
            PartitionConfig config{4, alpha1, 8.0, std::uint64_t(40000 + seed)};
            const PartitionPlan plan = dual_dirichlet_partition(labels, config);
            for (const auto& shard : plan.assignments) {
                std::vector<std::size_t> counts(10, 0);
                for (std::size_t i : shard) counts[labels[i]]++;
                acc += double(*std::max_element(counts.begin(), counts.end())) /
                       double(shard.size());
                ++count;
            }
        }
        return acc / double(count);
    };
    const double s01 = mean_max_share(0.1);
    const double s2 = mean_max_share(2.0);
    const double s100 = mean_max_share(100.0);
    std::ostringstream out;
    out << "size mean " << mean << ", var " << var << " (closed form " << expected_var
        << "); max-class share " << s01 << " > " << s2 << " > " << s100;
    detail = out.str();
    return s01 > s2 && s2 > s100;
}

// ---------- 4: Table-3 directional pattern at toy scale ----------

ExperimentConfig pattern_config(std::uint64_t exp_seed) {
    ExperimentConfig c;
    c.name = "blobs10";
    c.global_rounds = 5;
    c.model.kind = ModelKind::LinearSoftmax;
    c.model.input_dim = 16;
    c.model.class_count = 10;
    c.model.seed = mix_seed(exp_seed, 1);
    AdapterSpec aspec;
    aspec.rank = 2;
    aspec.scaling = 32.0;
    aspec.target_names = {"w"};
    c.model.adapter = aspec;
    c.model.adapter_seed = mix_seed(exp_seed, 2);
    c.trainer.learning_rate = 5e-4;
    c.trainer.decay = 0.85;
    c.trainer.batch_size = 4;
    c.trainer.batches_per_round = std::nullopt; // full local pass per round
    c.trainer.seed = mix_seed(exp_seed, 3);
    c.train_loader = "synthetic:blobs?classes=10&dim=16&n=4000&spread=1&seed=" +
                     std::to_string(mix_seed(exp_seed, 4));
    c.validation_loader = "synthetic:blobs?classes=10&dim=16&n=2000&spread=1&seed=" +
                          std::to_string(mix_seed(exp_seed, 5));
    c.partition = PartitionConfig{4, 2.0, 8.0, mix_seed(exp_seed, 6)};
    c.store_spec = "mem:";
    return c;
}

bool c4_table3_pattern(std::string& detail) {
    int fl_beats_local = 0;
    int global_near_fl = 0;
    double mean_fl = 0, mean_global = 0, mean_local = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ExperimentConfig config = pattern_config(seed);
        Simulation sim(config);
        RunLog log;
        const RunReport report = sim.run(log);
        if (report.aborted) {
            detail = "run aborted: " + report.abort_reason;
            return false;
        }
        const BaselineReport base = run_baselines(config);
        if (report.validation_accuracy >= base.local_average) ++fl_beats_local;
        if (base.global_accuracy >= report.validation_accuracy - 0.05) ++global_near_fl;
        mean_fl += report.validation_accuracy;
        mean_global += base.global_accuracy;
        mean_local += base.local_average;
    }
    std::ostringstream out;
    out << "FL>=LocalAvg in " << fl_beats_local << "/20, Global>=FL-0.05 in "
        << global_near_fl << "/20 (mean FL " << mean_fl / 20 << ", Global "
        << mean_global / 20 << ", LocalAvg " << mean_local / 20 << ")";
    detail = out.str();
    return fl_beats_local >= 18 && global_near_fl >= 18;
}

// ---------- 5: transport equivalence via real processes ----------

std::string fedsilo_binary() {
    if (const char* env = std::getenv("FEDSILO_BIN")) return env;
    return "fedsilo";
}

pid_t spawn(const std::vector<std::string>& args, const std::string& log_path) {
    const pid_t pid = ::fork();
    if (pid != 0) return pid;
    const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
        ::dup2(fd, 1);
        ::dup2(fd, 2);
        ::close(fd);
    }
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    ::execv(argv[0], argv.data());
    ::_exit(127);
}

int wait_exit(pid_t pid, int timeout_secs) {
    for (int waited_ms = 0; waited_ms < timeout_secs * 1000; waited_ms += 50) {
        int status = 0;
        const pid_t got = ::waitpid(pid, &status, WNOHANG);
        if (got == pid) return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
        ::usleep(50 * 1000);
    }
    ::kill(pid, SIGKILL);
    ::waitpid(pid, nullptr, 0);
    return -1;
}

std::string final_sha_from_log(const std::string& path) {
    for (const auto& e : RunLog::read_file(path)) {
        if (e.value("kind", "") == "final_model") {
            const std::string key = e["payload"].value("key", "");
            const auto slash = key.rfind('/');
            return slash == std::string::npos ? key : key.substr(slash + 1);
        }
    }
    return "";
}

bool c5_transport_equivalence(std::string& detail) {
    const std::string bin = fedsilo_binary();
    if (!fs::exists(bin)) {
        detail = "fedsilo binary not found at '" + bin + "' (set FEDSILO_BIN)";
        return false;
    }
    const fs::path dir =
        fs::temp_directory_path() / ("fedsilo_acc5_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    // one shared federation for both runs
    FederationManifest manifest = create_federation("server@local", "server@local");
    std::vector<std::string> roster;
    for (int i = 0; i < 4; ++i)
        roster.push_back(
            register_endpoint(manifest, "server@local", "shard" + std::to_string(i), "")
                .endpoint_id);
    const std::string manifest_path = (dir / "manifest.json").string();
    save_manifest(manifest, manifest_path);

    auto config_json = [&](const std::string& run_log) {
        nlohmann::json j = {
            {"name", "equivalence"},
            {"manifest", manifest_path},
            {"roster", roster},
            {"global_rounds", 2},
            {"model",
             {{"kind", "linear_softmax"},
              {"input_dim", 6},
              {"classes", 5},
              {"seed", 21},
              {"adapter",
               {{"rank", 2}, {"scaling", 32}, {"targets", {"w"}}, {"seed", 22}}}}},
            {"trainer",
             {{"learning_rate", 0.01},
              {"batch_size", 4},
              {"batches_per_round", 6},
              {"seed", 23}}},
            {"dataset",
             {{"train", "synthetic:blobs?classes=5&dim=6&n=400&spread=1.1&seed=31"},
              {"validation", "synthetic:blobs?classes=5&dim=6&n=200&spread=1.1&seed=32"},
              {"partition",
               {{"clients", 4}, {"alpha1", 2.0}, {"alpha2", 8.0}, {"seed", 33}}}}},
            {"store", "fs:" + (dir / "store").string()},
            {"run_log", run_log},
            {"task_timeout_ms", 60000},
            {"connect_timeout_ms", 30000}};
        return j;
    };

    const std::string cfg_sim = (dir / "cfg_sim.json").string();
    const std::string cfg_tcp = (dir / "cfg_tcp.json").string();
    {
        std::ofstream out(cfg_sim);
        out << config_json((dir / "sim.jsonl").string()).dump(2);
    }
    {
        std::ofstream out(cfg_tcp);
        out << config_json((dir / "tcp.jsonl").string()).dump(2);
    }

    // run 1: all clients in-process
    const pid_t sim_pid = spawn({bin, "run", "--config", cfg_sim, "--simulate"},
                                (dir / "sim.out").string());
    if (wait_exit(sim_pid, 60) != 0) {
        detail = "--simulate run failed (see " + (dir / "sim.out").string() + ")";
        return false;
    }

    // run 2: server + 4 endpoint processes over TCP
    const std::string ready = (dir / "ready").string();
    const pid_t server_pid = spawn({bin, "run", "--config", cfg_tcp, "--listen",
                                    "127.0.0.1:0", "--ready-file", ready},
                                   (dir / "server.out").string());
    std::string addr;
    for (int i = 0; i < 200 && addr.empty(); ++i) {
        ::usleep(50 * 1000);
        std::ifstream in(ready);
        std::getline(in, addr);
    }
    if (addr.empty()) {
        ::kill(server_pid, SIGKILL);
        ::waitpid(server_pid, nullptr, 0);
        detail = "server never published its address";
        return false;
    }
    std::vector<pid_t> endpoint_pids;
    for (int i = 0; i < 4; ++i) {
        endpoint_pids.push_back(
            spawn({bin, "endpoint", "--manifest", manifest_path, "--endpoint-id", roster[i],
                   "--connect", addr, "--config", cfg_tcp, "--client-index",
                   std::to_string(i)},
                  (dir / ("ep" + std::to_string(i) + ".out")).string()));
    }
    const int server_exit = wait_exit(server_pid, 120);
    for (pid_t pid : endpoint_pids) wait_exit(pid, 30);
    if (server_exit != 0) {
        detail = "tcp server run exited " + std::to_string(server_exit) + " (see " +
                 (dir / "server.out").string() + ")";
        return false;
    }

    const std::string sha_sim = final_sha_from_log((dir / "sim.jsonl").string());
    const std::string sha_tcp = final_sha_from_log((dir / "tcp.jsonl").string());
    detail = "simulate " + sha_sim.substr(0, 12) + ".. vs tcp " + sha_tcp.substr(0, 12) +
             "..";
    if (sha_sim.empty() || sha_sim != sha_tcp) return false;

    // both runs resolve to the same stored object, byte for byte
    FsObjectStore store((dir / "store").string());
    const auto bytes = store.get("payload/" + sha_sim);
    return sha256_hex(bytes) == sha_sim;
}

// ---------- 6: payload path coverage ----------

bool c6_payload_paths(std::string& detail) {
    // adapter state: A 16x8192 + B 64x16 = 132,096 F64 params > 1 MiB encoded
    auto config_for = [&](std::size_t threshold) {
        ExperimentConfig c;
        c.name = "bigadapter";
        c.global_rounds = 2;
        c.model.kind = ModelKind::LinearSoftmax;
        c.model.input_dim = 8192;
        c.model.class_count = 64;
        c.model.seed = 4;
        AdapterSpec aspec;
        aspec.rank = 16;
        aspec.scaling = 32.0;
        aspec.target_names = {"w"};
        c.model.adapter = aspec;
        c.model.adapter_seed = 5;
        c.trainer.learning_rate = 1e-3;
        c.trainer.batch_size = 4;
        c.trainer.batches_per_round = 2;
        c.trainer.seed = 6;
        c.train_loader = "synthetic:blobs?classes=64&dim=8192&n=256&spread=2&seed=41";
        c.partition = PartitionConfig{2, 2.0, 8.0, 42};
        c.inline_threshold = threshold;
        c.store_spec = "mem:";
        c.task_timeout_ms = 120000;
        return c;
    };

    // parameter payloads are the nonempty ones; zero-byte inline payloads are
    // metric/ack results and may stay inline at any threshold
    auto run_once = [&](std::size_t threshold, std::size_t& object_events,
                        std::size_t& inline_param_events, std::string& sha) {
        const ExperimentConfig config = config_for(threshold);
        Simulation sim(config);
        RunLog log;
        const RunReport report = sim.run(log);
        if (report.aborted) return false;
        object_events = inline_param_events = 0;
        for (const auto& e : log.events()) {
            const std::string kind = e.value("kind", "");
            if (kind != "dispatch" && kind != "result") continue;
            const std::string p = e["payload"].value("payload", "");
            const std::uint64_t bytes = e["payload"].value("bytes", std::uint64_t(0));
            if (p == "object") ++object_events;
            if (p == "inline" && bytes > 0) ++inline_param_events;
        }
        sha = report.final_model_sha256;
        return true;
    };

    std::size_t obj1 = 0, inl1 = 0, obj2 = 0, inl2 = 0;
    std::string sha1, sha2;
    if (!run_once(1u << 20, obj1, inl1, sha1)) {
        detail = "default-threshold run aborted";
        return false;
    }
    if (!run_once(16u << 20, obj2, inl2, sha2)) {
        detail = "raised-threshold run aborted";
        return false;
    }
    std::ostringstream out;
    out << "1 MiB threshold: " << obj1 << " object / " << inl1
        << " inline parameter payloads; 16 MiB threshold: " << obj2 << " object / " << inl2
        << " inline; identical final model: " << (sha1 == sha2 ? "yes" : "no");
    detail = out.str();
    return obj1 > 0 && inl1 == 0 && obj2 == 0 && inl2 > 0 && sha1 == sha2;
}

// ---------- 7: auth soundness ----------

bool c7_auth_soundness(std::string& detail) {
    FederationManifest m = create_federation("alice@lab-a", "alice");
    add_member(m, "bob@lab-b", "bob");
    const FederationManifest other = create_federation("alice@lab-a", "alice");

    auto store = std::make_shared<MemoryObjectStore>();
    EndpointRuntime runtime("ep0", m, store, 1u << 20);
    runtime.loaders().register_loader("shard0",
                                      "synthetic:blobs?classes=2&dim=4&n=40&seed=3");

    ModelSpec spec;
    spec.kind = ModelKind::LinearSoftmax;
    spec.input_dim = 4;
    spec.class_count = 2;
    spec.seed = 1;
    TrainerConfig trainer;
    trainer.batches_per_round = 1;

    auto base_task = [&]() {
        TaskEnvelope t;
        t.task_id = new_uuid();
        t.function = "local_train";
        t.round = 0;
        t.config = {{"model", model_spec_to_json(spec)},
                    {"trainer", trainer_config_to_json(trainer)},
                    {"dataloader", "shard0"}};
        t.sender = "alice@lab-a";
        const ToyModel model = build_model(spec);
        t.payload = PayloadRef::inline_bytes(encode_state(trainable_state(model)));
        return t;
    };

    auto forged = [&](const TokenClaims& claims, const FederationManifest& signer) {
        nlohmann::json token = {{"claims",
                                 {{"expiry", claims.expiry},
                                  {"group_id", claims.group_id},
                                  {"round", claims.round},
                                  {"sender", claims.sender},
                                  {"task_id", claims.task_id}}},
                                {"sig", sign_claims(signer, claims)}};
        return token.dump();
    };

    const std::int64_t now = unix_now();
    std::vector<std::pair<std::string, std::function<void(TaskEnvelope&)>>> defects = {
        {"bad signature",
         [&](TaskEnvelope& t) {
             t.auth_token = issue_token(m, "alice@lab-a", t.task_id, 0, 300);
             t.auth_token[t.auth_token.size() - 3] ^= 0x01;
         }},
        {"wrong group",
         [&](TaskEnvelope& t) {
             t.auth_token =
                 forged({other.group_id, "alice@lab-a", t.task_id, 0, now + 300}, m);
         }},
        {"unknown sender",
         [&](TaskEnvelope& t) {
             t.auth_token = forged({m.group_id, "mallory@evil", t.task_id, 0, now + 300}, m);
         }},
        {"task mismatch",
         [&](TaskEnvelope& t) {
             t.auth_token = issue_token(m, "bob@lab-b", new_uuid(), 0, 300);
         }},
        {"expired",
         [&](TaskEnvelope& t) {
             t.auth_token = forged({m.group_id, "alice@lab-a", t.task_id, 0, now - 60}, m);
         }},
    };

    for (const auto& [name, corrupt] : defects) {
        TaskEnvelope t = base_task();
        corrupt(t);
        const ResultEnvelope r = runtime.handle(t);
        if (r.ok || r.fail_reason != "AuthRejected") {
            detail = "defect '" + name + "' was not rejected as AuthRejected";
            return false;
        }
    }
    if (runtime.loaders().fetch_count() != 0) {
        detail = "dataloader was invoked on a rejected task";
        return false;
    }

    // control: a well-formed token executes and touches the dataloader once
    TaskEnvelope good = base_task();
    good.auth_token = issue_token(m, "alice@lab-a", good.task_id, 0, 300);
    const ResultEnvelope r = runtime.handle(good);
    if (!r.ok || runtime.loaders().fetch_count() != 1) {
        detail = "control task did not execute cleanly";
        return false;
    }
    detail = "5 defect classes rejected, dataloader untouched; control task executed";
    return true;
}

// ---------- 8: codec and frame fuzzing ----------

bool c8_codec_fuzz(std::string& detail) {
    Rng rng(0xC0DEC);
    auto random_state = [&]() {
        ModelState s;
        const std::size_t n_entries = rng.below(4);
        for (std::size_t e = 0; e < n_entries; ++e) {
            const Dtype dtype = rng.below(2) == 0 ? Dtype::F32 : Dtype::F64;
            const std::size_t rank = 1 + rng.below(3);
            std::vector<std::size_t> dims;
            for (std::size_t r = 0; r < rank; ++r) dims.push_back(1 + rng.below(5));
            Tensor t(dims, dtype);
            for (std::size_t i = 0; i < t.size(); ++i) t.set(i, rng.normal(0.0, 100.0));
            s.add("tensor_" + std::to_string(e), std::move(t));
        }
        return s;
    };

    for (int iter = 0; iter < 10000; ++iter) {
        const ModelState s = random_state();
        const auto bytes = encode_state(s);
        if (!(decode_state(bytes) == s)) {
            detail = "round-trip drifted at iteration " + std::to_string(iter);
            return false;
        }
    }

    int rejected = 0;
    for (int iter = 0; iter < 10000; ++iter) {
        const ModelState s = random_state();
        auto bytes = encode_state(s);
        const std::size_t bit = rng.below(bytes.size() * 8);
        bytes[bit / 8] ^= std::uint8_t(1u << (bit % 8));
        try {
            (void)decode_state(bytes);
        } catch (const Error&) {
            ++rejected;
        }
    }
    if (rejected != 10000) {
        detail = std::to_string(10000 - rejected) + " corruptions slipped through";
        return false;
    }

    for (int iter = 0; iter < 2000; ++iter) {
        TaskEnvelope t;
        t.task_id = new_uuid();
        t.function = "local_train";
        t.round = std::int64_t(rng.below(100));
        t.config = {{"dataloader", "shard" + std::to_string(rng.below(4))}};
        t.sender = "server@local";
        t.auth_token = std::string(rng.below(200), 'x');
        std::vector<std::uint8_t> payload(rng.below(512));
        for (auto& b : payload) b = std::uint8_t(rng.below(256));
        t.payload = PayloadRef::inline_bytes(std::move(payload));
        const WireMessage back = decode_frame(encode_frame(t));
        if (!(std::get<TaskEnvelope>(back) == t)) {
            detail = "frame round-trip drifted";
            return false;
        }
    }
    detail = "10000 round-trips exact, 10000/10000 corruptions rejected, 2000 frames exact";
    return true;
}

// ---------- 9: prompt goldens and profile table ----------

bool c9_prompt_goldens(std::string& detail) {
    const std::string dir = std::string(FEDSILO_TESTDATA_DIR) + "/prompts/";
    const std::vector<std::pair<DatasetKind, std::map<std::string, std::string>>> cases = {
        {DatasetKind::BoolQ,
         {{"question", "is the sky blue"},
          {"passage", "The sky appears blue due to Rayleigh scattering."}}},
        {DatasetKind::CB, {{"hypothesis", "it rained"}, {"premise", "The ground is wet."}}},
        {DatasetKind::COPA,
         {{"choice1", "the sun rose"},
          {"choice2", "the moon fell"},
          {"question", "cause"},
          {"premise", "The rooster crowed."}}},
        {DatasetKind::MultiRC,
         {{"answer", "Paris"},
          {"question", "What is the capital of France?"},
          {"paragraph", "France is a country in Europe. Its capital is Paris."}}},
        {DatasetKind::RTE, {{"premise", "A"}, {"hypothesis", "B"}}},
        {DatasetKind::WiC,
         {{"word", "bank"},
          {"sentence1", "He sat on the river bank."},
          {"sentence2", "She deposited money at the bank."}}},
        {DatasetKind::WSC,
         {{"text", "The trophy doesn't fit in the suitcase because it is too big"},
          {"span2_text", "it"},
          {"span1_text", "trophy"}}},
    };
    for (const auto& [kind, sample] : cases) {
        std::ifstream in(dir + dataset_kind_name(kind) + ".txt", std::ios::binary);
        if (!in) {
            detail = std::string("golden file missing for ") + dataset_kind_name(kind);
            return false;
        }
        std::ostringstream golden;
        golden << in.rdbuf();
        const std::string rendered = render_alpaca(format_prompt(kind, sample));
        if (rendered != golden.str()) {
            detail = std::string("rendered prompt differs for ") + dataset_kind_name(kind);
            return false;
        }
    }

    const std::vector<std::tuple<DatasetKind, std::optional<int>, int>> table = {
        {DatasetKind::BoolQ, 200, 350},      {DatasetKind::CB, std::nullopt, 350},
        {DatasetKind::COPA, std::nullopt, 300}, {DatasetKind::MultiRC, 200, 600},
        {DatasetKind::RTE, 200, 200},        {DatasetKind::WiC, 200, 200},
        {DatasetKind::WSC, std::nullopt, 220},
    };
    for (const auto& [kind, batches, tokens] : table) {
        const DatasetProfile p = profile_for(kind);
        if (p.batches_per_round != batches || p.max_token_length != tokens) {
            detail = std::string("profile row differs for ") + dataset_kind_name(kind);
            return false;
        }
    }
    detail = "7 golden prompts byte-exact, 7 profile rows exact";
    return true;
}

// ---------- 10: gradient checks ----------

bool c10_gradients(std::string& detail) {
    Rng rng(0x6AD);
    double worst_rel = 0.0;
    const double h = 1e-5;
    int configs = 0;

    auto loss_at = [](ToyModel model, const ModelState& trainable,
                      const std::vector<const std::vector<double>*>& batch,
                      const std::vector<int>& labels) {
        set_trainable_state(model, trainable);
        return cross_entropy(forward(model, batch), labels).loss;
    };

    auto check_model = [&](ToyModel model) -> bool {
        const std::size_t dim = model.input_dim;
        const std::size_t batch = 1 + rng.below(4);
        std::vector<std::vector<double>> xs(batch, std::vector<double>(dim));
        for (auto& x : xs)
            for (auto& v : x) v = rng.normal();
        std::vector<int> ys(batch);
        for (auto& y : ys) y = int(rng.below(model.class_count));
        std::vector<const std::vector<double>*> bp;
        for (const auto& x : xs) bp.push_back(&x);

        const LossAndGrads lg = loss_and_gradients(model, bp, ys);
        const ModelState trainable = trainable_state(model);
        for (const auto& [name, grad] : lg.grads) {
            for (std::size_t i = 0; i < grad.size(); ++i) {
                ModelState up = trainable, down = trainable;
                up.at(name).set(i, up.at(name).get(i) + h);
                down.at(name).set(i, down.at(name).get(i) - h);
                const double fd =
                    (loss_at(model, up, bp, ys) - loss_at(model, down, bp, ys)) / (2 * h);
                const double denom = std::max({std::abs(fd), std::abs(grad.get(i)), 1e-6});
                worst_rel = std::max(worst_rel, std::abs(fd - grad.get(i)) / denom);
                if (worst_rel >= 1e-4) return false;
            }
        }
        ++configs;
        return true;
    };

    for (int iter = 0; iter < 34 && worst_rel < 1e-4; ++iter) {
        const std::size_t dim = 2 + rng.below(5);
        const std::size_t classes = 2 + rng.below(5);
        if (!check_model(
                make_model(ModelKind::LinearSoftmax, dim, classes, 0, rng.next_u64())))
            break;
    }
    for (int iter = 0; iter < 33 && worst_rel < 1e-4; ++iter) {
        const std::size_t dim = 2 + rng.below(4);
        const std::size_t classes = 2 + rng.below(4);
        const std::size_t hidden = 2 + rng.below(5);
        if (!check_model(
                make_model(ModelKind::MLP1Hidden, dim, classes, hidden, rng.next_u64())))
            break;
    }
    for (int iter = 0; iter < 33 && worst_rel < 1e-4; ++iter) {
        const std::size_t dim = 2 + rng.below(4);
        const std::size_t classes = 2 + rng.below(4);
        ToyModel model =
            make_model(ModelKind::LinearSoftmax, dim, classes, 0, rng.next_u64());
        AdapterSpec spec;
        spec.rank = 1 + rng.below(3);
        spec.scaling = 32.0;
        spec.target_names = {"w"};
        attach_adapter(model, spec, rng.next_u64());
        ModelState ts = trainable_state(model);
        Tensor& b = ts.at("w.lora_B");
        for (std::size_t i = 0; i < b.size(); ++i) b.set(i, rng.normal(0.0, 0.4));
        set_trainable_state(model, ts);
        if (!check_model(std::move(model))) break;
    }

    std::ostringstream out;
    out << configs << " configs, worst relative error " << worst_rel;
    detail = out.str();
    return configs == 100 && worst_rel < 1e-4;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "LoRA trainable-parameter accounting", c1_lora_accounting},
        {2, "FedAvg oracle equivalence and invariants", c2_fedavg_oracle},
        {3, "dual-Dirichlet partition statistics", c3_partition_stats},
        {4, "FL/Global/Local directional pattern", c4_table3_pattern},
        {5, "simulate vs TCP transport equivalence", c5_transport_equivalence},
        {6, "payload path coverage (inline vs object store)", c6_payload_paths},
        {7, "auth soundness across all token defects", c7_auth_soundness},
        {8, "codec and frame fuzzing", c8_codec_fuzz},
        {9, "prompt goldens and profile table", c9_prompt_goldens},
        {10, "gradient checks vs central differences", c10_gradients},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = criterion.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        std::printf("[%2d] %s  %s (%lld ms)%s%s\n", criterion.number,
                    ok ? "PASS" : "FAIL", criterion.name.c_str(),
                    static_cast<long long>(ms), detail.empty() ? "" : " -- ",
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
