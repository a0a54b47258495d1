#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fedsilo/tensor.hpp"

namespace fedsilo {

struct TrainMetrics {
    double loss = 0.0;
    std::uint64_t n_samples = 0;
    std::uint64_t wall_ms = 0;
};

struct ClientUpdate {
    std::string client_id;
    std::int64_t round = 0;
    ModelState state; // trainable parameters only
    std::uint64_t n_samples = 1;
    TrainMetrics metrics;
};

struct RoundRecord {
    std::int64_t round = 0;
    std::vector<std::string> contributors; // sorted client ids
    std::uint64_t total_samples = 0;
    double mean_loss = 0.0;
    std::uint64_t wall_ms = 0;
    std::string state_sha256; // digest of the encoded aggregate
};

// Sample-count-weighted elementwise mean. Updates are accumulated in
// client_id order and every element is clamped into the hull of its
// contributions, so permutation invariance, convexity, and idempotence on
// identical updates hold bit-exactly.
ModelState fedavg(const std::vector<ClientUpdate>& updates);

struct BarrierComplete {};
struct BarrierWaiting {
    std::set<std::string> missing;
};
using BarrierStatus = std::variant<BarrierComplete, BarrierWaiting>;

bool barrier_complete(const BarrierStatus& s);

// Complete iff every roster member has exactly one update for `round`.
BarrierStatus check_barrier(const std::set<std::string>& roster,
                            const std::vector<ClientUpdate>& received, std::int64_t round);

} // namespace fedsilo
