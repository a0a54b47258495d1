#include "fedsilo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "fedsilo/rng.hpp"

namespace fedsilo {

ModelKind model_kind_from(std::string_view name) {
    if (name == "linear_softmax") return ModelKind::LinearSoftmax;
    if (name == "mlp1") return ModelKind::MLP1Hidden;
    fail(Err::BadConfig, "unknown model kind '" + std::string(name) + "'");
}

const char* model_kind_name(ModelKind kind) {
    return kind == ModelKind::LinearSoftmax ? "linear_softmax" : "mlp1";
}

void TrainerConfig::validate() const {
    if (!(learning_rate > 0.0)) fail(Err::BadConfig, "learning_rate must be positive");
    if (!(decay > 0.0 && decay <= 1.0)) fail(Err::BadConfig, "decay must be in (0, 1]");
    if (batch_size < 1) fail(Err::BadConfig, "batch_size must be >= 1");
    if (batches_per_round && *batches_per_round < 1)
        fail(Err::BadConfig, "batches_per_round must be >= 1 or ALL");
}

double effective_lr(const TrainerConfig& config, std::int64_t global_round) {
    return config.learning_rate * std::pow(config.decay, double(global_round));
}

ToyModel make_model(ModelKind kind, std::size_t input_dim, std::size_t class_count,
                    std::size_t hidden_dim, std::uint64_t seed) {
    if (input_dim < 1 || class_count < 2) fail(Err::BadConfig, "model needs dim >= 1, classes >= 2");
    ToyModel m;
    m.kind = kind;
    m.input_dim = input_dim;
    m.class_count = class_count;

    auto gaussian_matrix = [&](std::size_t rows, std::size_t cols, std::uint64_t stream) {
        Rng rng(mix_seed(seed, stream));
        Tensor t = Tensor::matrix(rows, cols);
        for (std::size_t i = 0; i < t.size(); ++i) t.set(i, rng.normal(0.0, 0.1));
        return t;
    };

    if (kind == ModelKind::LinearSoftmax) {
        m.params.add("w", gaussian_matrix(class_count, input_dim, 0));
        m.params.add("b", Tensor({class_count}));
    } else {
        if (hidden_dim < 1) fail(Err::BadConfig, "mlp1 needs hidden_dim >= 1");
        m.hidden_dim = hidden_dim;
        m.params.add("w1", gaussian_matrix(hidden_dim, input_dim, 0));
        m.params.add("b1", Tensor({hidden_dim}));
        m.params.add("w2", gaussian_matrix(class_count, hidden_dim, 1));
        m.params.add("b2", Tensor({class_count}));
    }
    return m;
}

void attach_adapter(ToyModel& model, const AdapterSpec& spec, std::uint64_t seed) {
    model.adapter_spec = spec;
    model.adapter = init_adapter(spec, model.params, seed);
}

ToyModel build_model(const ModelSpec& spec) {
    ToyModel m = make_model(spec.kind, spec.input_dim, spec.class_count, spec.hidden_dim,
                            spec.seed);
    if (spec.adapter) attach_adapter(m, *spec.adapter, spec.adapter_seed);
    return m;
}

ModelState trainable_state(const ToyModel& model) {
    if (model.has_adapter()) return extract_trainable(*model.adapter);
    ModelState out;
    for (const auto& [name, t] : model.params) out.add(name, t);
    return out;
}

void set_trainable_state(ToyModel& model, const ModelState& state) {
    if (model.has_adapter()) {
        model.adapter = merge_trainable(*model.adapter, state);
        return;
    }
    for (const auto& [name, t] : state) {
        Tensor& dst = model.params.at(name);
        if (dst.dims() != t.dims())
            fail(Err::ShapeMismatch, "trainable entry '" + name + "' shape differs");
        dst = t;
    }
}

namespace {

// y += M x
void matvec_acc(const Tensor& m, const double* x, double* y) {
    const std::size_t rows = m.rows(), cols = m.cols();
    const double* w = m.values().data();
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

// One dense layer application z = W x (+ adapter low-rank term).
void apply_linear(const Tensor& w, const Tensor* bias, const AdapterPair* ad, double scale,
                  const double* x, double* z) {
    const std::size_t rows = w.rows(), cols = w.cols();
    for (std::size_t r = 0; r < rows; ++r) z[r] = bias ? bias->get(r) : 0.0;
    matvec_acc(w, x, z);
    if (ad) {
        const std::size_t rank = ad->a.rows();
        std::vector<double> u(rank, 0.0);
        matvec_acc(ad->a, x, u.data());
        const double* b = ad->b.values().data();
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (std::size_t k = 0; k < rank; ++k) acc += b[r * rank + k] * u[k];
            z[r] += scale * acc;
        }
    }
    (void)cols;
}

struct LayerGrads {
    // keyed by trainable-state names so adamw and the aggregator line up
    std::map<std::string, Tensor>* sink = nullptr;

    Tensor& at(const std::string& name, const Tensor& like) {
        auto it = sink->find(name);
        if (it == sink->end())
            it = sink->emplace(name, Tensor(like.dims(), like.dtype())).first;
        return it->second;
    }
};

// Backward through one dense layer for a single sample. dz has length rows.
// Accumulates parameter gradients and, when dx is nonnull, the input grad.
void backward_linear(const Tensor& w, const AdapterPair* ad, double scale,
                     const std::string& wname, const std::string& bname, bool adapter_only,
                     const double* x, const double* dz, double* dx, LayerGrads& grads) {
    const std::size_t rows = w.rows(), cols = w.cols();
    if (!adapter_only) {
        Tensor& dw = grads.at(wname, w);
        double* dwp = dw.values_mut().data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) dwp[r * cols + c] += dz[r] * x[c];
        Tensor b_like({rows});
        Tensor& db = grads.at(bname, b_like);
        double* dbp = db.values_mut().data();
        for (std::size_t r = 0; r < rows; ++r) dbp[r] += dz[r];
    }
    if (ad) {
        const std::size_t rank = ad->a.rows();
        // u = A x ; z += scale * B u
        std::vector<double> u(rank, 0.0);
        matvec_acc(ad->a, x, u.data());
        std::vector<double> du(rank, 0.0); // scale * B^T dz
        const double* bp = ad->b.values().data();
        for (std::size_t k = 0; k < rank; ++k) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) acc += bp[r * rank + k] * dz[r];
            du[k] = scale * acc;
        }
        Tensor& da = grads.at(lora_a_name(wname), ad->a);
        double* dap = da.values_mut().data();
        for (std::size_t k = 0; k < rank; ++k)
            for (std::size_t c = 0; c < cols; ++c) dap[k * cols + c] += du[k] * x[c];
        Tensor& db = grads.at(lora_b_name(wname), ad->b);
        double* dbp = db.values_mut().data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < rank; ++k) dbp[r * rank + k] += scale * dz[r] * u[k];
    }
    if (dx) {
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) acc += w.get2(r, c) * dz[r];
            dx[c] = acc;
        }
        if (ad) {
            const std::size_t rank = ad->a.rows();
            std::vector<double> bt_dz(rank, 0.0);
            const double* bp = ad->b.values().data();
            for (std::size_t k = 0; k < rank; ++k) {
                double acc = 0.0;
                for (std::size_t r = 0; r < rows; ++r) acc += bp[r * rank + k] * dz[r];
                bt_dz[k] = acc;
            }
            for (std::size_t c = 0; c < cols; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < rank; ++k) acc += ad->a.get2(k, c) * bt_dz[k];
                dx[c] += scale * acc;
            }
        }
    }
}

const AdapterPair* adapter_for(const ToyModel& model, const std::string& name) {
    if (!model.has_adapter()) return nullptr;
    auto it = model.adapter->targets.find(name);
    return it == model.adapter->targets.end() ? nullptr : &it->second;
}

} // namespace

std::vector<std::vector<double>> forward(const ToyModel& model,
                                         const std::vector<const std::vector<double>*>& batch) {
    const double scale = model.adapter_spec ? model.adapter_spec->scale_factor() : 0.0;
    std::vector<std::vector<double>> logits(batch.size(),
                                            std::vector<double>(model.class_count, 0.0));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double* x = batch[i]->data();
        if (model.kind == ModelKind::LinearSoftmax) {
            apply_linear(model.params.at("w"), &model.params.at("b"),
                         adapter_for(model, "w"), scale, x, logits[i].data());
        } else {
            std::vector<double> h(model.hidden_dim, 0.0);
            apply_linear(model.params.at("w1"), &model.params.at("b1"),
                         adapter_for(model, "w1"), scale, x, h.data());
            for (double& v : h) v = std::tanh(v);
            apply_linear(model.params.at("w2"), &model.params.at("b2"),
                         adapter_for(model, "w2"), scale, h.data(), logits[i].data());
        }
    }
    return logits;
}

CrossEntropy cross_entropy(const std::vector<std::vector<double>>& logits,
                           const std::vector<int>& labels) {
    if (logits.empty() || logits.size() != labels.size())
        fail(Err::ShapeMismatch, "logits/labels batch sizes differ");
    const std::size_t batch = logits.size();
    const std::size_t classes = logits[0].size();

    CrossEntropy out;
    out.dlogits.assign(batch, std::vector<double>(classes, 0.0));
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        if (labels[i] < 0 || std::size_t(labels[i]) >= classes)
            fail(Err::LabelOutOfRange,
                 "label " + std::to_string(labels[i]) + " for " + std::to_string(classes) +
                     " classes");
        const auto& z = logits[i];
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - zmax);
        const double log_denom = std::log(denom);
        total += log_denom - (z[labels[i]] - zmax);
        for (std::size_t c = 0; c < classes; ++c) {
            const double softmax = std::exp(z[c] - zmax) / denom;
            out.dlogits[i][c] = (softmax - (int(c) == labels[i] ? 1.0 : 0.0)) / double(batch);
        }
    }
    out.loss = total / double(batch);
    return out;
}

void adamw_step(ModelState& params, const std::map<std::string, Tensor>& grads,
                AdamWState& opt, double lr_effective, const TrainerConfig& config) {
    opt.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, double(opt.step));
    const double bc2 = 1.0 - std::pow(config.beta2, double(opt.step));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.at(name);
        if (p.dims() != g.dims())
            fail(Err::ShapeMismatch, "gradient shape differs for '" + name + "'");
        for (double v : g.values())
            if (!std::isfinite(v))
                fail(Err::NonFiniteGradient, "non-finite gradient in '" + name + "'");

        auto mit = opt.m.find(name);
        if (mit == opt.m.end()) {
            mit = opt.m.emplace(name, Tensor(p.dims(), p.dtype())).first;
            opt.v.emplace(name, Tensor(p.dims(), p.dtype()));
        }
        Tensor& m = mit->second;
        Tensor& v = opt.v.at(name);

        double* pp = p.values_mut().data();
        double* mp = m.values_mut().data();
        double* vp = v.values_mut().data();
        const double* gp = g.values().data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            pp[i] -= lr_effective * config.weight_decay * pp[i];
            mp[i] = config.beta1 * mp[i] + (1.0 - config.beta1) * gp[i];
            vp[i] = config.beta2 * vp[i] + (1.0 - config.beta2) * gp[i] * gp[i];
            const double mhat = mp[i] / bc1;
            const double vhat = vp[i] / bc2;
            pp[i] -= lr_effective * mhat / (std::sqrt(vhat) + config.eps);
        }
    }
}

namespace {

// Gradients of the mean batch loss w.r.t. the trainable parameters.
std::map<std::string, Tensor> backward(const ToyModel& model,
                                       const std::vector<const std::vector<double>*>& batch,
                                       const CrossEntropy& ce) {
    const bool adapter_only = model.has_adapter();
    const double scale = model.adapter_spec ? model.adapter_spec->scale_factor() : 0.0;
    std::map<std::string, Tensor> grads;
    LayerGrads sink{&grads};

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double* x = batch[i]->data();
        const double* dz = ce.dlogits[i].data();
        if (model.kind == ModelKind::LinearSoftmax) {
            backward_linear(model.params.at("w"), adapter_for(model, "w"), scale, "w", "b",
                            adapter_only, x, dz, nullptr, sink);
        } else {
            // recompute the hidden activations for this sample
            std::vector<double> h(model.hidden_dim, 0.0);
            apply_linear(model.params.at("w1"), &model.params.at("b1"),
                         adapter_for(model, "w1"), scale, x, h.data());
            for (double& v : h) v = std::tanh(v);

            std::vector<double> dh(model.hidden_dim, 0.0);
            backward_linear(model.params.at("w2"), adapter_for(model, "w2"), scale, "w2", "b2",
                            adapter_only, h.data(), dz, dh.data(), sink);
            for (std::size_t j = 0; j < model.hidden_dim; ++j) dh[j] *= 1.0 - h[j] * h[j];
            backward_linear(model.params.at("w1"), adapter_for(model, "w1"), scale, "w1", "b1",
                            adapter_only, x, dh.data(), nullptr, sink);
        }
    }
    return grads;
}

} // namespace

LossAndGrads loss_and_gradients(const ToyModel& model,
                                const std::vector<const std::vector<double>*>& batch,
                                const std::vector<int>& labels) {
    const auto logits = forward(model, batch);
    const CrossEntropy ce = cross_entropy(logits, labels);
    LossAndGrads out;
    out.loss = ce.loss;
    out.grads = backward(model, batch, ce);
    return out;
}

TrainOutput local_train(ToyModel& model, const DatasetView& shard, const TrainerConfig& config,
                        std::int64_t global_round) {
    config.validate();
    if (shard.size() == 0) fail(Err::EmptyShard, "cannot train on an empty shard");
    const auto t0 = std::chrono::steady_clock::now();

    const double lr = effective_lr(config, global_round);
    const std::size_t n = shard.size();
    const std::size_t n_batches =
        config.batches_per_round ? *config.batches_per_round
                                 : (n + config.batch_size - 1) / config.batch_size;

    // Parameters that receive updates; adapter params live in a scratch state
    // so adamw_step sees one uniform container.
    ModelState work = trainable_state(model);
    AdamWState opt;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(config.seed, std::uint64_t(global_round)));
    shuffle_rng.shuffle(order);
    std::size_t cursor = 0;

    double total_loss = 0.0;
    std::uint64_t total_samples = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        std::vector<const std::vector<double>*> xs;
        std::vector<int> ys;
        const std::size_t take = config.batches_per_round
                                     ? config.batch_size
                                     : std::min(config.batch_size, n - cursor);
        for (std::size_t i = 0; i < take; ++i) {
            if (cursor == n) {
                // fixed-batch-count mode cycles the shard, reshuffling per pass
                shuffle_rng.shuffle(order);
                cursor = 0;
            }
            xs.push_back(&shard.x(order[cursor]));
            ys.push_back(shard.y(order[cursor]));
            ++cursor;
        }

        set_trainable_state(model, work);
        const LossAndGrads lg = loss_and_gradients(model, xs, ys);
        adamw_step(work, lg.grads, opt, lr, config);

        total_loss += lg.loss * double(xs.size());
        total_samples += xs.size();
    }
    set_trainable_state(model, work);

    const auto t1 = std::chrono::steady_clock::now();
    TrainOutput out;
    out.trainable = std::move(work);
    out.metrics.loss = total_loss / double(total_samples);
    out.metrics.n_samples = total_samples;
    out.metrics.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    return out;
}

double evaluate(const ToyModel& model, const DatasetView& data) {
    if (data.size() == 0) fail(Err::EmptyDataset, "cannot evaluate on an empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<const std::vector<double>*> one{&data.x(i)};
        const auto logits = forward(model, one);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits[0].size(); ++c)
            if (logits[0][c] > logits[0][best]) best = c;
        if (int(best) == data.y(i)) ++correct;
    }
    return double(correct) / double(data.size());
}

} // namespace fedsilo
