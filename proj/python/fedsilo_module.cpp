#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedsilo/config_json.hpp"
#include "fedsilo/crypto.hpp"
#include "fedsilo/orchestrator.hpp"

namespace py = pybind11;
using namespace fedsilo;

namespace {

Tensor tensor_from_py(const std::vector<std::size_t>& dims, const std::vector<double>& values,
                      const std::string& dtype) {
    const Dtype d = dtype == "f32" ? Dtype::F32 : Dtype::F64;
    return Tensor::from_values(dims, values, d);
}

py::bytes encode_state_py(const ModelState& state) {
    const auto bytes = encode_state(state);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

ModelState decode_state_py(const py::bytes& data) {
    std::string_view view = data;
    return decode_state(
        {reinterpret_cast<const std::uint8_t*>(view.data()), view.size()});
}

AdapterSpec adapter_spec_from_py(std::size_t rank, double scaling,
                                 const std::vector<std::string>& targets) {
    AdapterSpec spec;
    spec.rank = rank;
    spec.scaling = scaling;
    spec.target_names = targets;
    spec.validate();
    return spec;
}

std::string run_simulated_py(const std::string& config_json) {
    const ExperimentConfig config =
        experiment_config_from_json(nlohmann::json::parse(config_json));
    Simulation sim(config);
    RunLog log(config.run_log_path);
    const RunReport report = sim.run(log);

    nlohmann::json out;
    out["aborted"] = report.aborted;
    out["rounds"] = report.rounds.size();
    out["final_model_key"] = report.final_model_key;
    out["final_model_sha256"] = report.final_model_sha256;
    out["validation_accuracy"] = report.validation_accuracy;
    nlohmann::json accs = nlohmann::json::object();
    for (const auto& [id, acc] : report.per_client_accuracy) accs[id] = acc;
    out["per_client_accuracy"] = accs;
    return out.dump();
}

std::string run_baselines_py(const std::string& config_json) {
    const ExperimentConfig config =
        experiment_config_from_json(nlohmann::json::parse(config_json));
    const BaselineReport b = run_baselines(config);
    nlohmann::json out = {{"global_accuracy", b.global_accuracy},
                          {"per_client_local", b.per_client_local},
                          {"local_average", b.local_average}};
    return out.dump();
}

} // namespace

PYBIND11_MODULE(_fedsilo, m) {
    m.doc() = "cross-silo federated learning toolkit";

    py::register_exception<Error>(m, "FedsiloError");

    py::class_<Tensor>(m, "Tensor")
        .def(py::init(&tensor_from_py), py::arg("dims"), py::arg("values"),
             py::arg("dtype") = "f64")
        .def_property_readonly("dims", &Tensor::dims)
        .def_property_readonly("values", [](const Tensor& t) { return t.values(); })
        .def("__eq__", [](const Tensor& a, const Tensor& b) { return a == b; });

    py::class_<ModelState>(m, "ModelState")
        .def(py::init<>())
        .def("add", &ModelState::add, py::arg("name"), py::arg("tensor"))
        .def("get", [](const ModelState& s, const std::string& name) { return s.at(name); })
        .def("names", &ModelState::names)
        .def("byte_size", &ModelState::byte_size)
        .def("__len__", &ModelState::size)
        .def("__eq__", [](const ModelState& a, const ModelState& b) { return a == b; });

    m.def("encode_state", &encode_state_py, "canonical .apfl bytes for a model state");
    m.def("decode_state", &decode_state_py, "model state from .apfl bytes");

    py::class_<AdapterSpec>(m, "AdapterSpec")
        .def(py::init(&adapter_spec_from_py), py::arg("rank"), py::arg("scaling"),
             py::arg("targets"))
        .def_readonly("rank", &AdapterSpec::rank)
        .def_readonly("scaling", &AdapterSpec::scaling)
        .def_readonly("targets", &AdapterSpec::target_names);

    m.def(
        "effective_weight",
        [](const Tensor& base, const Tensor& a, const Tensor& b, const AdapterSpec& spec) {
            return effective_weight(base, a, b, spec);
        },
        "base + (scaling/rank) * B . A");

    m.def("llama2_7b_trainable_bytes", [](std::size_t rank) {
        AdapterSpec spec;
        spec.rank = rank;
        spec.target_names = {"q_proj", "v_proj"};
        return trainable_bytes(spec, llama2_7b_profile());
    });

    m.def(
        "fedavg",
        [](const std::vector<std::tuple<std::string, ModelState, std::uint64_t>>& updates,
           std::int64_t round) {
            std::vector<ClientUpdate> us;
            for (const auto& [id, state, n] : updates) {
                ClientUpdate u;
                u.client_id = id;
                u.state = state;
                u.n_samples = n;
                u.round = round;
                us.push_back(std::move(u));
            }
            return fedavg(us);
        },
        py::arg("updates"), py::arg("round") = 0,
        "sample-count weighted mean of (client_id, state, n_samples) updates");

    m.def(
        "sample_dirichlet",
        [](const std::vector<double>& alphas, std::uint64_t seed) {
            Rng rng(seed);
            return sample_dirichlet(alphas, rng);
        },
        py::arg("alphas"), py::arg("seed"));

    m.def(
        "dual_dirichlet_partition",
        [](const std::vector<int>& labels, std::size_t clients, double alpha1, double alpha2,
           std::uint64_t seed) {
            PartitionConfig config{clients, alpha1, alpha2, seed};
            return dual_dirichlet_partition(labels, config).assignments;
        },
        py::arg("labels"), py::arg("clients"), py::arg("alpha1") = 2.0,
        py::arg("alpha2") = 8.0, py::arg("seed") = 0);

    m.def(
        "format_prompt",
        [](const std::string& kind, const std::map<std::string, std::string>& sample) {
            const Prompt p = format_prompt(dataset_kind_from(kind), sample);
            return std::make_pair(p.instruction, p.input);
        },
        "Alpaca (instruction, input) for a SuperGLUE sample");

    m.def("render_alpaca", [](const std::string& instruction, const std::string& input) {
        return render_alpaca(Prompt{instruction, input});
    });

    m.def("profile_for", [](const std::string& kind) {
        const DatasetProfile p = profile_for(dataset_kind_from(kind));
        return std::make_pair(p.batches_per_round ? py::cast(*p.batches_per_round)
                                                  : py::cast("all"),
                              py::cast(p.max_token_length));
    });

    m.def(
        "synth_blobs",
        [](std::size_t classes, std::size_t dim, std::size_t n, double spread, double radius,
           std::uint64_t seed) {
            const Dataset d = synth_blobs(classes, dim, n, spread, radius, seed);
            return std::make_pair(d.features, d.labels);
        },
        py::arg("classes"), py::arg("dim"), py::arg("n"), py::arg("spread") = 1.0,
        py::arg("radius") = 4.0, py::arg("seed") = 0);

    m.def(
        "cross_entropy",
        [](const std::vector<std::vector<double>>& logits, const std::vector<int>& labels) {
            const CrossEntropy ce = cross_entropy(logits, labels);
            return std::make_pair(ce.loss, ce.dlogits);
        },
        "mean NLL and its gradient w.r.t. the logits");

    m.def("run_simulated", &run_simulated_py, py::arg("config_json"),
          "run a federated experiment in-process; returns a JSON report");
    m.def("run_baselines", &run_baselines_py, py::arg("config_json"),
          "equal-budget global/local baselines; returns a JSON report");

    m.def("sha256_hex",
          [](const py::bytes& b) {
              std::string_view view = b;
              return sha256_hex(
                  {reinterpret_cast<const std::uint8_t*>(view.data()), view.size()});
          });

    m.attr("__version__") = "0.1.0";
}
