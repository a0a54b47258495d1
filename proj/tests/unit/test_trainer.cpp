#include "doctest.h"

#include <cmath>

#include "fedsilo/rng.hpp"
#include "fedsilo/trainer.hpp"

using namespace fedsilo;

namespace {

std::vector<const std::vector<double>*> as_batch(const std::vector<std::vector<double>>& xs) {
    std::vector<const std::vector<double>*> out;
    for (const auto& x : xs) out.push_back(&x);
    return out;
}

double loss_with_perturbed(ToyModel model, const std::string& name, std::size_t flat,
                           double delta, const std::vector<const std::vector<double>*>& batch,
                           const std::vector<int>& labels) {
    ModelState state = trainable_state(model);
    Tensor& t = state.at(name);
    t.set(flat, t.get(flat) + delta);
    set_trainable_state(model, state);
    const auto logits = forward(model, batch);
    return cross_entropy(logits, labels).loss;
}

// central finite differences against the analytic gradients
void gradcheck(const ToyModel& model, const std::vector<std::vector<double>>& xs,
               const std::vector<int>& labels, double tolerance = 1e-4) {
    const auto batch = as_batch(xs);
    const LossAndGrads lg = loss_and_gradients(model, batch, labels);
    const double h = 1e-5;
    for (const auto& [name, grad] : lg.grads) {
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double up = loss_with_perturbed(model, name, i, h, batch, labels);
            const double down = loss_with_perturbed(model, name, i, -h, batch, labels);
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(grad.get(i)), 1e-6});
            CHECK(std::abs(fd - grad.get(i)) / denom < tolerance);
        }
    }
}

std::vector<std::vector<double>> random_inputs(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<std::vector<double>> xs(n, std::vector<double>(dim));
    for (auto& x : xs)
        for (auto& v : x) v = rng.normal();
    return xs;
}

std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
    std::vector<int> ys(n);
    for (auto& y : ys) y = int(rng.below(std::uint64_t(classes)));
    return ys;
}

Dataset two_blob_dataset(std::size_t n, double spread, std::uint64_t seed) {
    return synth_blobs(2, 4, n, spread, 4.0, seed);
}

} // namespace

TEST_CASE("cross entropy closed-form cases") {
    SUBCASE("uniform logits over 4 classes") {
        const std::vector<std::vector<double>> logits = {{0.5, 0.5, 0.5, 0.5}};
        const CrossEntropy ce = cross_entropy(logits, {2});
        CHECK(ce.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
    SUBCASE("saturated true class") {
        const std::vector<std::vector<double>> logits = {{1000.0, 0.0, 0.0}};
        const CrossEntropy ce = cross_entropy(logits, {0});
        CHECK(ce.loss == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("labels out of range") {
        try {
            cross_entropy({{0.0, 1.0}}, {2});
            FAIL_CHECK("expected LabelOutOfRange");
        } catch (const Error& e) {
            CHECK(e.code() == Err::LabelOutOfRange);
        }
        CHECK_THROWS_AS(cross_entropy({{0.0, 1.0}}, {-1}), Error);
    }
}

TEST_CASE("cross entropy gradient matches central differences") {
    Rng rng(17);
    const std::size_t batch = 3, classes = 5;
    std::vector<std::vector<double>> logits(batch, std::vector<double>(classes));
    for (auto& row : logits)
        for (auto& v : row) v = rng.normal(0.0, 2.0);
    const std::vector<int> labels = {1, 4, 0};

    const CrossEntropy ce = cross_entropy(logits, labels);
    const double h = 1e-6;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < classes; ++c) {
            auto up = logits, down = logits;
            up[b][c] += h;
            down[b][c] -= h;
            const double fd =
                (cross_entropy(up, labels).loss - cross_entropy(down, labels).loss) / (2 * h);
            CHECK(std::abs(fd - ce.dlogits[b][c]) < 1e-4);
        }
    }
}

TEST_CASE("adamw fixed point and first-step direction") {
    TrainerConfig config;
    config.learning_rate = 0.01;

    SUBCASE("zero gradients, zero weight decay: parameters unchanged") {
        TrainerConfig c = config;
        c.weight_decay = 0.0;
        ModelState params;
        params.add("w", Tensor::from_values({3}, {1.0, -2.0, 0.5}));
        const ModelState before = params;
        std::map<std::string, Tensor> grads;
        grads.emplace("w", Tensor({3}));
        AdamWState opt;
        adamw_step(params, grads, opt, 0.01, c);
        CHECK(params == before);
    }

    SUBCASE("first step from zero moments moves by about -lr * sign(g)") {
        TrainerConfig c = config;
        c.weight_decay = 0.0;
        ModelState params;
        params.add("w", Tensor::from_values({2}, {0.0, 0.0}));
        std::map<std::string, Tensor> grads;
        grads.emplace("w", Tensor::from_values({2}, {0.3, -1.7}));
        AdamWState opt;
        adamw_step(params, grads, opt, 0.01, c);
        // bias correction makes mhat/sqrt(vhat) = sign(g) up to eps
        CHECK(params.at("w").get(0) == doctest::Approx(-0.01).epsilon(1e-4));
        CHECK(params.at("w").get(1) == doctest::Approx(0.01).epsilon(1e-4));
    }

    SUBCASE("non-finite gradients are rejected") {
        ModelState params;
        params.add("w", Tensor::from_values({1}, {1.0}));
        std::map<std::string, Tensor> grads;
        grads.emplace("w", Tensor::from_values({1}, {std::nan("")}));
        AdamWState opt;
        try {
            adamw_step(params, grads, opt, 0.01, config);
            FAIL_CHECK("expected NonFiniteGradient");
        } catch (const Error& e) {
            CHECK(e.code() == Err::NonFiniteGradient);
        }
    }
}

TEST_CASE("effective lr follows the geometric schedule") {
    TrainerConfig config;
    config.learning_rate = 1e-4;
    config.decay = 0.85;
    CHECK(effective_lr(config, 0) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(effective_lr(config, 2) == doctest::Approx(0.7225e-4).epsilon(1e-12));
    CHECK(effective_lr(config, 1) == 1e-4 * 0.85);
}

TEST_CASE("gradients check out for every model kind over random configs") {
    Rng rng(23);
    for (int iter = 0; iter < 12; ++iter) {
        const std::size_t dim = 2 + rng.below(4);
        const std::size_t classes = 2 + rng.below(4);
        const std::size_t hidden = 2 + rng.below(4);
        const std::size_t batch = 1 + rng.below(4);
        const auto xs = random_inputs(rng, batch, dim);
        const auto ys = random_labels(rng, batch, int(classes));

        SUBCASE("") {} // keep doctest quiet about loops
        {
            const ToyModel linear =
                make_model(ModelKind::LinearSoftmax, dim, classes, 0, rng.next_u64());
            gradcheck(linear, xs, ys);
        }
        {
            const ToyModel mlp =
                make_model(ModelKind::MLP1Hidden, dim, classes, hidden, rng.next_u64());
            gradcheck(mlp, xs, ys);
        }
        {
            ToyModel adapted =
                make_model(ModelKind::LinearSoftmax, dim, classes, 0, rng.next_u64());
            AdapterSpec spec;
            spec.rank = 1 + rng.below(2);
            spec.scaling = 32.0;
            spec.target_names = {"w"};
            attach_adapter(adapted, spec, rng.next_u64());
            // nonzero B so the A-gradient is informative
            ModelState ts = trainable_state(adapted);
            Tensor& b = ts.at("w.lora_B");
            for (std::size_t i = 0; i < b.size(); ++i) b.set(i, rng.normal(0.0, 0.3));
            set_trainable_state(adapted, ts);
            gradcheck(adapted, xs, ys);
        }
        {
            ToyModel adapted_mlp =
                make_model(ModelKind::MLP1Hidden, dim, classes, hidden, rng.next_u64());
            AdapterSpec spec;
            spec.rank = 1;
            spec.scaling = 8.0;
            spec.target_names = {"w1", "w2"};
            attach_adapter(adapted_mlp, spec, rng.next_u64());
            ModelState ts = trainable_state(adapted_mlp);
            for (const auto& name : {"w1.lora_B", "w2.lora_B"}) {
                Tensor& b = ts.at(name);
                for (std::size_t i = 0; i < b.size(); ++i) b.set(i, rng.normal(0.0, 0.3));
            }
            set_trainable_state(adapted_mlp, ts);
            gradcheck(adapted_mlp, xs, ys);
        }
    }
}

TEST_CASE("local_train consumes the expected batch schedule") {
    const Dataset data = two_blob_dataset(17, 1.0, 5);
    ToyModel model = make_model(ModelKind::LinearSoftmax, data.feature_dim, 2, 0, 1);
    TrainerConfig config;
    config.learning_rate = 0.01;
    config.batch_size = 4;
    config.batches_per_round = std::nullopt; // one full pass: ceil(17/4) = 5 batches
    const TrainOutput out = local_train(model, DatasetView::whole(data), config, 0);
    CHECK(out.metrics.n_samples == 17);

    ToyModel model2 = make_model(ModelKind::LinearSoftmax, data.feature_dim, 2, 0, 1);
    TrainerConfig fixed = config;
    fixed.batches_per_round = 3;
    const TrainOutput out2 = local_train(model2, DatasetView::whole(data), fixed, 0);
    CHECK(out2.metrics.n_samples == 12); // 3 batches x 4
}

TEST_CASE("training a separable problem reduces the loss") {
    const Dataset data = two_blob_dataset(200, 0.5, 9);
    ToyModel model = make_model(ModelKind::LinearSoftmax, data.feature_dim, 2, 0, 2);
    TrainerConfig config;
    config.learning_rate = 0.05;
    config.batch_size = 4;
    config.batches_per_round = 50;

    const auto batch0 = as_batch(data.features);
    const double initial_loss =
        cross_entropy(forward(model, batch0), data.labels).loss;
    const TrainOutput out = local_train(model, DatasetView::whole(data), config, 0);
    const double final_loss = cross_entropy(forward(model, batch0), data.labels).loss;
    CHECK(final_loss < initial_loss);
    CHECK(out.metrics.loss > 0.0);
    CHECK(evaluate(model, DatasetView::whole(data)) > 0.9);
}

TEST_CASE("local_train is deterministic and freezes the base under adapters") {
    const Dataset data = two_blob_dataset(60, 1.0, 13);
    auto build = [&] {
        ToyModel m = make_model(ModelKind::LinearSoftmax, data.feature_dim, 2, 0, 4);
        AdapterSpec spec;
        spec.rank = 2;
        spec.scaling = 32.0;
        spec.target_names = {"w"};
        attach_adapter(m, spec, 5);
        return m;
    };
    TrainerConfig config;
    config.learning_rate = 0.02;
    config.batch_size = 4;
    config.batches_per_round = 10;
    config.seed = 77;

    ToyModel m1 = build();
    ToyModel m2 = build();
    const ModelState base_before = m1.params;
    const TrainOutput o1 = local_train(m1, DatasetView::whole(data), config, 3);
    const TrainOutput o2 = local_train(m2, DatasetView::whole(data), config, 3);
    CHECK(encode_state(o1.trainable) == encode_state(o2.trainable)); // bit-identical
    CHECK(m1.params == base_before);                                 // base frozen
    CHECK(o1.trainable.contains("w.lora_A"));
    CHECK_FALSE(o1.trainable.contains("w"));

    // a different round shuffles differently
    ToyModel m3 = build();
    const TrainOutput o3 = local_train(m3, DatasetView::whole(data), config, 4);
    CHECK_FALSE(encode_state(o3.trainable) == encode_state(o1.trainable));
}

TEST_CASE("empty shard is rejected") {
    const Dataset data = two_blob_dataset(10, 1.0, 1);
    ToyModel model = make_model(ModelKind::LinearSoftmax, data.feature_dim, 2, 0, 1);
    DatasetView empty;
    empty.data = &data;
    TrainerConfig config;
    try {
        local_train(model, empty, config, 0);
        FAIL_CHECK("expected EmptyShard");
    } catch (const Error& e) {
        CHECK(e.code() == Err::EmptyShard);
    }
    CHECK_THROWS_AS(evaluate(model, empty), Error);
}

TEST_CASE("evaluate counts argmax hits with ties to the lowest class") {
    Dataset data;
    data.feature_dim = 1;
    data.class_count = 4;
    data.features = {{1.0}, {1.0}, {1.0}, {1.0}};
    data.labels = {0, 0, 0, 0};

    // zero weights: all logits equal, tie resolves to class 0
    ToyModel model = make_model(ModelKind::LinearSoftmax, 1, 4, 0, 1);
    ModelState zeros = trainable_state(model);
    for (auto& [name, t] : zeros.entries()) {
        (void)name;
    }
    ModelState z;
    z.add("w", Tensor::matrix(4, 1));
    z.add("b", Tensor({4}));
    set_trainable_state(model, z);
    CHECK(evaluate(model, DatasetView::whole(data)) == 1.0);

    // uniform labels, constant class-0 predictor: accuracy ~ 1/4 exactly here
    Dataset uniform = data;
    uniform.labels = {0, 1, 2, 3};
    CHECK(evaluate(model, DatasetView::whole(uniform)) == doctest::Approx(0.25));

    // a perfect-logit model
    Dataset two;
    two.feature_dim = 1;
    two.class_count = 2;
    two.features = {{-1.0}, {1.0}};
    two.labels = {0, 1};
    ToyModel perfect = make_model(ModelKind::LinearSoftmax, 1, 2, 0, 1);
    ModelState w;
    w.add("w", Tensor::from_values({2, 1}, {-5.0, 5.0}));
    w.add("b", Tensor({2}));
    set_trainable_state(perfect, w);
    CHECK(evaluate(perfect, DatasetView::whole(two)) == 1.0);
}
