#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedsilo/aggregate.hpp"
#include "fedsilo/lora.hpp"
#include "fedsilo/taskdata.hpp"
#include "fedsilo/tensor.hpp"

namespace fedsilo {

enum class ModelKind { LinearSoftmax, MLP1Hidden };

ModelKind model_kind_from(std::string_view name);
const char* model_kind_name(ModelKind kind);

struct TrainerConfig {
    double learning_rate = 1e-4;
    double decay = 0.85;
    std::size_t batch_size = 4;
    std::optional<std::size_t> batches_per_round; // nullopt = one pass over the shard
    std::size_t max_token_length = 0;             // 0 = no truncation (text pipelines only)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

// effective lr at global round k: learning_rate * decay^k
double effective_lr(const TrainerConfig& config, std::int64_t global_round);

struct AdamWState {
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    std::int64_t step = 0;
};

// Toy differentiable classifiers standing in for the fine-tuned LLM. Base
// parameter names: LinearSoftmax {w, b}; MLP1Hidden {w1, b1, w2, b2}.
struct ToyModel {
    ModelKind kind = ModelKind::LinearSoftmax;
    std::size_t input_dim = 0;
    std::size_t class_count = 0;
    std::size_t hidden_dim = 0;
    ModelState params;
    std::optional<AdapterSpec> adapter_spec;
    std::optional<AdapterState> adapter;

    bool has_adapter() const { return adapter.has_value(); }
};

ToyModel make_model(ModelKind kind, std::size_t input_dim, std::size_t class_count,
                    std::size_t hidden_dim, std::uint64_t seed);

void attach_adapter(ToyModel& model, const AdapterSpec& spec, std::uint64_t seed);

// Declarative model description; the same spec built anywhere yields the
// same initial model, which is what lets endpoints rebuild the server's
// model from task config alone.
struct ModelSpec {
    ModelKind kind = ModelKind::LinearSoftmax;
    std::size_t input_dim = 0;
    std::size_t class_count = 0;
    std::size_t hidden_dim = 0;
    std::uint64_t seed = 0;
    std::optional<AdapterSpec> adapter;
    std::uint64_t adapter_seed = 0;
};

ToyModel build_model(const ModelSpec& spec);

// The parameters exchanged with the server: adapter A/B matrices when an
// adapter is attached, the full parameter set otherwise.
ModelState trainable_state(const ToyModel& model);
void set_trainable_state(ToyModel& model, const ModelState& state);

// logits for a batch of feature rows, shape batch x class_count
std::vector<std::vector<double>> forward(const ToyModel& model,
                                         const std::vector<const std::vector<double>*>& batch);

struct CrossEntropy {
    double loss = 0.0;
    std::vector<std::vector<double>> dlogits; // (softmax - onehot) / batch
};

// Mean negative log-softmax of the true class, max-subtraction stabilized.
CrossEntropy cross_entropy(const std::vector<std::vector<double>>& logits,
                           const std::vector<int>& labels);

struct LossAndGrads {
    double loss = 0.0;
    std::map<std::string, Tensor> grads; // keyed by trainable-state names
};

// Mean batch loss and its gradient w.r.t. every trainable parameter
// (adapter matrices when attached, full parameters otherwise).
LossAndGrads loss_and_gradients(const ToyModel& model,
                                const std::vector<const std::vector<double>*>& batch,
                                const std::vector<int>& labels);

// Decoupled weight decay, then bias-corrected moment update, applied to every
// entry of `grads`; parameters are matched by name.
void adamw_step(ModelState& params, const std::map<std::string, Tensor>& grads,
                AdamWState& opt, double lr_effective, const TrainerConfig& config);

struct TrainOutput {
    ModelState trainable;
    TrainMetrics metrics;
};

// Runs the configured number of mini-batches against the shard with a
// per-round seeded shuffle; trains adapter parameters only when an adapter
// is attached. Deterministic given (model, shard, config, global_round).
TrainOutput local_train(ToyModel& model, const DatasetView& shard, const TrainerConfig& config,
                        std::int64_t global_round);

// argmax accuracy; ties break toward the lowest class index
double evaluate(const ToyModel& model, const DatasetView& data);

} // namespace fedsilo
