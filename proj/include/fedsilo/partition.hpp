#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsilo/rng.hpp"

namespace fedsilo {

struct PartitionConfig {
    std::size_t n_clients = 1;
    double alpha1 = 2.0; // class concentration within a client
    double alpha2 = 8.0; // sample-size concentration across clients
    std::uint64_t seed = 0;
};

struct PartitionPlan {
    PartitionConfig config;
    std::vector<std::vector<std::size_t>> assignments; // per client, sample indices
    std::size_t n_samples = 0;
    std::size_t n_classes = 0;
};

// One Dirichlet draw via normalized Gamma(alpha_i, 1) samples.
std::vector<double> sample_dirichlet(const std::vector<double>& alphas, Rng& rng);

// Dual-Dirichlet split: client sizes ~ Dir(alpha2 * 1), per-client class
// mixtures ~ Dir(alpha1 * 1) over the observed classes, integerized with
// largest-remainder quotas and shortfalls spilled to the neediest client.
// The result is always an exact disjoint cover with every client nonempty.
PartitionPlan dual_dirichlet_partition(const std::vector<int>& labels,
                                       const PartitionConfig& config);

struct PartitionReportRow {
    std::size_t client;
    int label;
    std::size_t count;
    double fraction; // of the client's shard
};

std::vector<PartitionReportRow> partition_report(const PartitionPlan& plan,
                                                 const std::vector<int>& labels);

// CSV with header client,class,count,fraction
std::string partition_report_csv(const std::vector<PartitionReportRow>& rows);

std::string partition_plan_to_json(const PartitionPlan& plan);
PartitionPlan partition_plan_from_json(const std::string& text);

// Largest-remainder rounding of `weights` (nonnegative, not all zero) to
// integers summing to `total`.
std::vector<std::size_t> largest_remainder_round(const std::vector<double>& weights,
                                                 std::size_t total);

} // namespace fedsilo
