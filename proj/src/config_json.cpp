#include "fedsilo/config_json.hpp"

namespace fedsilo {

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
    nlohmann::json j = {{"kind", model_kind_name(spec.kind)},
                        {"input_dim", spec.input_dim},
                        {"classes", spec.class_count},
                        {"seed", spec.seed}};
    if (spec.hidden_dim > 0) j["hidden_dim"] = spec.hidden_dim;
    if (spec.adapter) {
        j["adapter"] = {{"rank", spec.adapter->rank},
                        {"scaling", spec.adapter->scaling},
                        {"targets", spec.adapter->target_names},
                        {"seed", spec.adapter_seed}};
    }
    return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    try {
        spec.kind = model_kind_from(j.at("kind").get<std::string>());
        spec.input_dim = j.at("input_dim").get<std::size_t>();
        spec.class_count = j.at("classes").get<std::size_t>();
        spec.hidden_dim = j.value("hidden_dim", std::size_t(0));
        spec.seed = j.value("seed", std::uint64_t(0));
        if (j.contains("adapter")) {
            const auto& a = j.at("adapter");
            AdapterSpec aspec;
            aspec.rank = a.at("rank").get<std::size_t>();
            aspec.scaling = a.at("scaling").get<double>();
            aspec.target_names = a.at("targets").get<std::vector<std::string>>();
            spec.adapter = std::move(aspec);
            spec.adapter_seed = a.value("seed", std::uint64_t(0));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Err::BadConfig, std::string("model spec: ") + e.what());
    }
    return spec;
}

nlohmann::json trainer_config_to_json(const TrainerConfig& c) {
    nlohmann::json j = {{"learning_rate", c.learning_rate},
                        {"decay", c.decay},
                        {"batch_size", c.batch_size},
                        {"beta1", c.beta1},
                        {"beta2", c.beta2},
                        {"eps", c.eps},
                        {"weight_decay", c.weight_decay},
                        {"seed", c.seed}};
    if (c.batches_per_round) {
        j["batches_per_round"] = *c.batches_per_round;
    } else {
        j["batches_per_round"] = "all";
    }
    if (c.max_token_length > 0) j["max_token_length"] = c.max_token_length;
    return j;
}

TrainerConfig trainer_config_from_json(const nlohmann::json& j) {
    TrainerConfig c;
    try {
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.decay = j.value("decay", c.decay);
        c.batch_size = j.value("batch_size", c.batch_size);
        if (j.contains("batches_per_round")) {
            const auto& b = j.at("batches_per_round");
            if (b.is_string()) {
                std::string s = b.get<std::string>();
                for (char& ch : s) ch = char(::tolower(ch));
                if (s != "all") fail(Err::BadConfig, "batches_per_round must be int or \"all\"");
                c.batches_per_round = std::nullopt;
            } else {
                c.batches_per_round = b.get<std::size_t>();
            }
        }
        c.max_token_length = j.value("max_token_length", std::size_t(0));
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.eps = j.value("eps", c.eps);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.seed = j.value("seed", c.seed);
    } catch (const Error&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        fail(Err::BadConfig, std::string("trainer config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json metrics_to_json(const TrainMetrics& m) {
    return {{"loss", m.loss}, {"n_samples", m.n_samples}, {"wall_ms", m.wall_ms}};
}

TrainMetrics metrics_from_json(const nlohmann::json& j) {
    TrainMetrics m;
    m.loss = j.value("loss", 0.0);
    m.n_samples = j.value("n_samples", std::uint64_t(0));
    m.wall_ms = j.value("wall_ms", std::uint64_t(0));
    return m;
}

} // namespace fedsilo
