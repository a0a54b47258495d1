#include "fedsilo/lora.hpp"

#include "fedsilo/rng.hpp"

namespace fedsilo {

void AdapterSpec::validate() const {
    if (rank < 1) fail(Err::BadConfig, "adapter rank must be >= 1");
    if (!(scaling > 0.0)) fail(Err::BadConfig, "adapter scaling must be positive");
    if (target_names.empty()) fail(Err::BadConfig, "adapter target_names must be nonempty");
}

ArchitectureProfile llama2_7b_profile() {
    ArchitectureProfile p;
    p.layer_count = 32;
    p.target_shapes = {{"q_proj", 4096, 4096}, {"v_proj", 4096, 4096}};
    p.bytes_per_param = 4;
    p.base_param_count = 6738415616ULL;
    return p;
}

AdapterState init_adapter(const AdapterSpec& spec, const ModelState& base, std::uint64_t seed) {
    spec.validate();
    AdapterState out;
    std::size_t stream = 0;
    for (const auto& target : spec.target_names) {
        if (!base.contains(target))
            fail(Err::TargetNotFound, "adapter target '" + target + "' not in base model");
        const Tensor& w = base.at(target);
        if (!w.is_matrix())
            fail(Err::TargetNotMatrix, "adapter target '" + target + "' is not rank-2");
        const std::size_t out_dim = w.rows();
        const std::size_t in_dim = w.cols();

        // one derived stream per target keeps draws independent of target order
        Rng rng(mix_seed(seed, stream++));
        Tensor a = Tensor::matrix(spec.rank, in_dim, w.dtype());
        for (std::size_t i = 0; i < a.size(); ++i) a.set(i, rng.normal(0.0, 0.02));
        Tensor b = Tensor::matrix(out_dim, spec.rank, w.dtype());
        out.targets.emplace(target, AdapterPair{std::move(a), std::move(b)});
    }
    return out;
}

Tensor effective_weight(const Tensor& base_w, const Tensor& a, const Tensor& b,
                        const AdapterSpec& spec) {
    if (!base_w.is_matrix() || !a.is_matrix() || !b.is_matrix())
        fail(Err::ShapeMismatch, "effective_weight requires rank-2 tensors");
    const std::size_t out_dim = base_w.rows();
    const std::size_t in_dim = base_w.cols();
    const std::size_t rank = spec.rank;
    if (a.rows() != rank || a.cols() != in_dim || b.rows() != out_dim || b.cols() != rank)
        fail(Err::ShapeMismatch, "adapter matrices do not conform to base shape");

    const double s = spec.scale_factor();
    Tensor out = Tensor::matrix(out_dim, in_dim, base_w.dtype());
    for (std::size_t r = 0; r < out_dim; ++r) {
        for (std::size_t k = 0; k < rank; ++k) {
            const double brk = b.get2(r, k);
            if (brk == 0.0) continue;
            for (std::size_t c = 0; c < in_dim; ++c) {
                out.values_mut()[r * in_dim + c] += brk * a.get2(k, c);
            }
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        out.set(i, base_w.get(i) + s * out.get(i));
    return out;
}

std::uint64_t trainable_bytes(const AdapterSpec& spec, const ArchitectureProfile& arch) {
    std::uint64_t params = 0;
    for (const auto& [name, out_dim, in_dim] : arch.target_shapes) {
        params += std::uint64_t(spec.rank) * in_dim + std::uint64_t(out_dim) * spec.rank;
    }
    return params * arch.layer_count * arch.bytes_per_param;
}

std::string lora_a_name(const std::string& target) { return target + ".lora_A"; }
std::string lora_b_name(const std::string& target) { return target + ".lora_B"; }

ModelState extract_trainable(const AdapterState& adapter) {
    ModelState out;
    for (const auto& [target, pair] : adapter.targets) {
        out.add(lora_a_name(target), pair.a);
        out.add(lora_b_name(target), pair.b);
    }
    return out;
}

AdapterState merge_trainable(const AdapterState& current, const ModelState& state) {
    AdapterState out = current;
    for (const auto& [name, tensor] : state) {
        std::string target;
        bool is_a = false;
        if (name.size() > 7 && name.ends_with(".lora_A")) {
            target = name.substr(0, name.size() - 7);
            is_a = true;
        } else if (name.size() > 7 && name.ends_with(".lora_B")) {
            target = name.substr(0, name.size() - 7);
        } else {
            fail(Err::NameConventionViolation,
                 "'" + name + "' is not a <target>.lora_A/.lora_B name");
        }
        auto it = out.targets.find(target);
        if (it == out.targets.end())
            fail(Err::NameConventionViolation, "unknown adapter target '" + target + "'");
        Tensor& dst = is_a ? it->second.a : it->second.b;
        if (tensor.dims() != dst.dims())
            fail(Err::ShapeMismatch, "merged tensor shape differs for '" + name + "'");
        dst = tensor;
    }
    return out;
}

} // namespace fedsilo
