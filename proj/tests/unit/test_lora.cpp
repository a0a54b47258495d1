#include "doctest.h"

#include "fedsilo/lora.hpp"
#include "fedsilo/rng.hpp"

using namespace fedsilo;

namespace {

ModelState toy_base() {
    ModelState base;
    Rng rng(11);
    Tensor w = Tensor::matrix(3, 4);
    for (std::size_t i = 0; i < w.size(); ++i) w.set(i, rng.normal());
    base.add("w", std::move(w));
    base.add("b", Tensor({3}));
    return base;
}

AdapterSpec toy_spec(std::size_t rank = 2) {
    AdapterSpec spec;
    spec.rank = rank;
    spec.scaling = 32.0;
    spec.target_names = {"w"};
    return spec;
}

// plain dense oracle: W + (s/r) * B.A computed the naive way
Tensor dense_oracle(const Tensor& w, const Tensor& a, const Tensor& b, const AdapterSpec& spec) {
    Tensor out = w;
    const double s = spec.scaling / double(spec.rank);
    for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t c = 0; c < w.cols(); ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < spec.rank; ++k) acc += b.get2(r, k) * a.get2(k, c);
            out.set2(r, c, w.get2(r, c) + s * acc);
        }
    return out;
}

} // namespace

TEST_CASE("init gives effective weights equal to the base") {
    const ModelState base = toy_base();
    const AdapterState adapter = init_adapter(toy_spec(), base, 99);
    const auto& pair = adapter.targets.at("w");
    const Tensor eff = effective_weight(base.at("w"), pair.a, pair.b, toy_spec());
    CHECK(eff == base.at("w")); // B = 0 forces identity, element-exact

    for (double v : pair.b.values()) CHECK(v == 0.0);
    bool any_nonzero = false;
    for (double v : pair.a.values()) any_nonzero |= v != 0.0;
    CHECK(any_nonzero);
}

TEST_CASE("init is deterministic per seed") {
    const ModelState base = toy_base();
    const AdapterState a1 = init_adapter(toy_spec(), base, 42);
    const AdapterState a2 = init_adapter(toy_spec(), base, 42);
    const AdapterState a3 = init_adapter(toy_spec(), base, 43);
    CHECK(a1.targets.at("w").a == a2.targets.at("w").a);
    CHECK_FALSE(a1.targets.at("w").a == a3.targets.at("w").a);
}

TEST_CASE("init validates targets") {
    const ModelState base = toy_base();
    AdapterSpec missing = toy_spec();
    missing.target_names = {"q"};
    CHECK_THROWS_AS(init_adapter(missing, base, 1), Error);

    AdapterSpec not_matrix = toy_spec();
    not_matrix.target_names = {"b"};
    try {
        init_adapter(not_matrix, base, 1);
        FAIL_CHECK("expected TargetNotMatrix");
    } catch (const Error& e) {
        CHECK(e.code() == Err::TargetNotMatrix);
    }
}

TEST_CASE("effective_weight 1x1 hand case") {
    // rank 8, scaling 32: W + 32/8 * B.A = 0 + 4 * 1 * 1
    AdapterSpec spec;
    spec.rank = 8;
    spec.scaling = 32.0;
    spec.target_names = {"w"};
    const Tensor w = Tensor::from_values({1, 1}, {0.0});
    const Tensor a = Tensor::from_values({8, 1}, {1, 0, 0, 0, 0, 0, 0, 0});
    const Tensor b = Tensor::from_values({1, 8}, {1, 0, 0, 0, 0, 0, 0, 0});
    const Tensor eff = effective_weight(w, a, b, spec);
    CHECK(eff.get(0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("effective_weight matches the dense oracle") {
    Rng rng(5);
    for (int iter = 0; iter < 25; ++iter) {
        const std::size_t out_dim = 1 + rng.below(5);
        const std::size_t in_dim = 1 + rng.below(5);
        AdapterSpec spec;
        spec.rank = 1 + rng.below(3);
        spec.scaling = 32.0;
        spec.target_names = {"w"};
        Tensor w = Tensor::matrix(out_dim, in_dim);
        Tensor a = Tensor::matrix(spec.rank, in_dim);
        Tensor b = Tensor::matrix(out_dim, spec.rank);
        for (std::size_t i = 0; i < w.size(); ++i) w.set(i, rng.normal());
        for (std::size_t i = 0; i < a.size(); ++i) a.set(i, rng.normal());
        for (std::size_t i = 0; i < b.size(); ++i) b.set(i, rng.normal());
        const Tensor eff = effective_weight(w, a, b, spec);
        const Tensor oracle = dense_oracle(w, a, b, spec);
        for (std::size_t i = 0; i < eff.size(); ++i)
            CHECK(eff.get(i) == doctest::Approx(oracle.get(i)).epsilon(1e-6));
    }
}

TEST_CASE("effective_weight rejects nonconforming shapes") {
    const auto spec = toy_spec();
    const Tensor w = Tensor::matrix(3, 4);
    const Tensor a = Tensor::matrix(2, 5); // wrong in_dim
    const Tensor b = Tensor::matrix(3, 2);
    CHECK_THROWS_AS(effective_weight(w, a, b, spec), Error);
}

TEST_CASE("trainable_bytes reproduces the published adapter sizes") {
    SUBCASE("llama-2 7b shape: exactly 16 MiB") {
        AdapterSpec spec;
        spec.rank = 8;
        spec.scaling = 32.0;
        spec.target_names = {"q_proj", "v_proj"};
        const ArchitectureProfile arch = llama2_7b_profile();
        const std::uint64_t bytes = trainable_bytes(spec, arch);
        CHECK(bytes == 16777216ULL);
        CHECK(bytes == 32ULL * 2 * (8 * 4096 + 4096 * 8) * 4);
        CHECK(double(bytes) / (1024.0 * 1024.0) == doctest::Approx(16.0));
    }
    SUBCASE("single 2x2 target, rank 1") {
        AdapterSpec spec;
        spec.rank = 1;
        spec.scaling = 1.0;
        spec.target_names = {"w"};
        ArchitectureProfile arch;
        arch.layer_count = 1;
        arch.target_shapes = {{"w", 2, 2}};
        arch.bytes_per_param = 4;
        CHECK(trainable_bytes(spec, arch) == 16);
    }
    SUBCASE("doubling layer_count doubles the result") {
        AdapterSpec spec;
        spec.rank = 3;
        spec.scaling = 2.0;
        spec.target_names = {"w"};
        ArchitectureProfile arch;
        arch.layer_count = 5;
        arch.target_shapes = {{"w", 7, 11}};
        const auto once = trainable_bytes(spec, arch);
        arch.layer_count = 10;
        CHECK(trainable_bytes(spec, arch) == 2 * once);
    }
}

TEST_CASE("extract/merge round-trips and stays adapter-only") {
    const ModelState base = toy_base();
    AdapterState adapter = init_adapter(toy_spec(), base, 7);
    // make B nonzero so the round-trip carries information
    adapter.targets.at("w").b.set(0, 1.5);

    const ModelState extracted = extract_trainable(adapter);
    CHECK(extracted.size() == 2);
    CHECK(extracted.contains("w.lora_A"));
    CHECK(extracted.contains("w.lora_B"));
    CHECK_FALSE(extracted.contains("w"));
    CHECK_FALSE(extracted.contains("b"));

    const AdapterState merged = merge_trainable(adapter, extracted);
    CHECK(merged.targets.at("w").a == adapter.targets.at("w").a);
    CHECK(merged.targets.at("w").b == adapter.targets.at("w").b);

    // extracted byte size equals the accounting for this shape
    AdapterSpec spec = toy_spec();
    ArchitectureProfile arch;
    arch.layer_count = 1;
    arch.target_shapes = {{"w", 3, 4}};
    arch.bytes_per_param = 8; // F64 tensors here
    CHECK(extracted.byte_size() == trainable_bytes(spec, arch));
}

TEST_CASE("merge rejects names outside the convention") {
    const ModelState base = toy_base();
    const AdapterState adapter = init_adapter(toy_spec(), base, 7);
    ModelState bogus;
    bogus.add("w", Tensor::matrix(3, 4));
    try {
        merge_trainable(adapter, bogus);
        FAIL_CHECK("expected NameConventionViolation");
    } catch (const Error& e) {
        CHECK(e.code() == Err::NameConventionViolation);
    }
    ModelState unknown_target;
    unknown_target.add("zzz.lora_A", Tensor::matrix(2, 4));
    CHECK_THROWS_AS(merge_trainable(adapter, unknown_target), Error);
}

TEST_CASE("adapter payload is a sliver of the base model") {
    AdapterSpec spec;
    spec.rank = 8;
    spec.scaling = 32.0;
    spec.target_names = {"q_proj", "v_proj"};
    const ArchitectureProfile arch = llama2_7b_profile();
    const double trainable = double(trainable_bytes(spec, arch));
    const double dense = double(arch.base_param_count) * double(arch.bytes_per_param);
    CHECK(trainable / dense < 0.01);

    // and measurably smaller on the toy shape too
    const ModelState base = toy_base();
    const AdapterState adapter = init_adapter(toy_spec(1), base, 3);
    CHECK(extract_trainable(adapter).byte_size() < base.byte_size());
}
