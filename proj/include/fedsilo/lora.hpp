#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedsilo/tensor.hpp"

namespace fedsilo {

// Low-rank adapter configuration: W_eff = W + (scaling/rank) * B * A.
struct AdapterSpec {
    std::size_t rank = 8;
    double scaling = 32.0;
    std::vector<std::string> target_names;

    double scale_factor() const { return scaling / static_cast<double>(rank); }
    void validate() const;
};

// Per-target trainable pair: A is (rank x in_dim), B is (out_dim x rank).
struct AdapterPair {
    Tensor a;
    Tensor b;
};

struct AdapterState {
    std::map<std::string, AdapterPair> targets;
};

// Shape inputs for trainable-parameter accounting.
struct ArchitectureProfile {
    std::size_t layer_count = 1;
    // matrices adapted in every layer, as (name, out_dim, in_dim)
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> target_shapes;
    std::size_t bytes_per_param = 4;
    // dense parameter count of the full base model, for payload-reduction reporting
    std::uint64_t base_param_count = 0;
};

// The published LLaMA 2 7B shape: 32 layers, 4096x4096 query and value
// projections adapted, F32 accounting.
ArchitectureProfile llama2_7b_profile();

// A entries ~ Gaussian(0, 0.02^2), B zero, so effective weights equal the
// base at initialization. Deterministic per seed.
AdapterState init_adapter(const AdapterSpec& spec, const ModelState& base, std::uint64_t seed);

Tensor effective_weight(const Tensor& base_w, const Tensor& a, const Tensor& b,
                        const AdapterSpec& spec);

std::uint64_t trainable_bytes(const AdapterSpec& spec, const ArchitectureProfile& arch);

// Canonical wire names for the trainable parameters of `target`.
std::string lora_a_name(const std::string& target);
std::string lora_b_name(const std::string& target);

// extract/merge move adapter parameters to and from the exchanged ModelState
// under the <target>.lora_A / <target>.lora_B convention; merge(extract(x)) == x.
ModelState extract_trainable(const AdapterState& adapter);
AdapterState merge_trainable(const AdapterState& current, const ModelState& state);

} // namespace fedsilo
