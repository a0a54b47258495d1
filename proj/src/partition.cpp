#include "fedsilo/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"

#include "fedsilo/errors.hpp"

namespace fedsilo {

std::vector<double> sample_dirichlet(const std::vector<double>& alphas, Rng& rng) {
    if (alphas.empty()) fail(Err::NonPositiveAlpha, "alphas must be nonempty");
    for (double a : alphas)
        if (!(a > 0.0)) fail(Err::NonPositiveAlpha, "all alphas must be positive");

    std::vector<double> draws(alphas.size());
    double sum = 0.0;
    do {
        sum = 0.0;
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            draws[i] = rng.gamma(alphas[i]);
            sum += draws[i];
        }
    } while (sum == 0.0); // tiny alphas can underflow every draw; redraw

    for (double& d : draws) d /= sum;
    return draws;
}

std::vector<std::size_t> largest_remainder_round(const std::vector<double>& weights,
                                                 std::size_t total) {
    const std::size_t n = weights.size();
    double wsum = 0.0;
    for (double w : weights) wsum += w;

    std::vector<std::size_t> out(n, 0);
    std::vector<std::pair<double, std::size_t>> remainders(n); // (-remainder, index)
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double share =
            wsum > 0.0 ? weights[i] / wsum * double(total) : double(total) / double(n);
        const double fl = std::floor(share);
        out[i] = static_cast<std::size_t>(fl);
        assigned += out[i];
        remainders[i] = {-(share - fl), i};
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t k = 0; assigned < total; ++k) {
        out[remainders[k % n].second] += 1;
        ++assigned;
    }
    return out;
}

PartitionPlan dual_dirichlet_partition(const std::vector<int>& labels,
                                       const PartitionConfig& config) {
    if (labels.empty()) fail(Err::EmptyLabels, "no labels to partition");
    if (!(config.alpha1 > 0.0) || !(config.alpha2 > 0.0))
        fail(Err::NonPositiveAlpha, "alpha1 and alpha2 must be positive");
    const std::size_t n = labels.size();
    const std::size_t k = config.n_clients;
    if (k < 1) fail(Err::BadConfig, "n_clients must be >= 1");
    if (n < k) fail(Err::TooFewSamples, std::to_string(n) + " samples for " +
                                            std::to_string(k) + " clients");

    // observed classes, ascending label value
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    const std::size_t n_classes = by_class.size();

    Rng rng(config.seed);

    // (1) client-size proportions, integerized; every client gets >= 1
    const std::vector<double> size_props =
        sample_dirichlet(std::vector<double>(k, config.alpha2), rng);
    std::vector<std::size_t> target = largest_remainder_round(size_props, n);
    for (std::size_t c = 0; c < k; ++c) {
        while (target[c] == 0) {
            const std::size_t donor =
                std::max_element(target.begin(), target.end()) - target.begin();
            --target[donor];
            ++target[c];
        }
    }

    // (2) per-client class mixtures over observed classes
    // (3) largest-remainder quotas within each client's target size
    std::vector<std::vector<std::size_t>> quota(k);
    for (std::size_t c = 0; c < k; ++c) {
        const std::vector<double> mix =
            sample_dirichlet(std::vector<double>(n_classes, config.alpha1), rng);
        quota[c] = largest_remainder_round(mix, target[c]);
    }

    // (4) deal shuffled per-class index pools against the quotas; a class can
    // be oversubscribed, so takes are capped by availability and by the
    // client's unmet target, and leftovers spill to the neediest client
    std::vector<std::vector<std::size_t>> assignments(k);
    std::vector<std::size_t> unmet = target;

    std::size_t class_pos = 0;
    for (auto& [label, pool] : by_class) {
        rng.shuffle(pool);
        std::size_t cursor = 0;

        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return quota[a][class_pos] > quota[b][class_pos];
        });

        for (std::size_t c : order) {
            const std::size_t want =
                std::min({quota[c][class_pos], pool.size() - cursor, unmet[c]});
            for (std::size_t i = 0; i < want; ++i) assignments[c].push_back(pool[cursor++]);
            unmet[c] -= want;
        }
        while (cursor < pool.size()) {
            const std::size_t c =
                std::max_element(unmet.begin(), unmet.end()) - unmet.begin();
            assignments[c].push_back(pool[cursor++]);
            --unmet[c];
        }
        ++class_pos;
    }

    for (auto& shard : assignments) std::sort(shard.begin(), shard.end());

    PartitionPlan plan;
    plan.config = config;
    plan.assignments = std::move(assignments);
    plan.n_samples = n;
    plan.n_classes = n_classes;
    return plan;
}

std::vector<PartitionReportRow> partition_report(const PartitionPlan& plan,
                                                 const std::vector<int>& labels) {
    if (plan.n_samples != labels.size())
        fail(Err::PlanLabelMismatch, "plan covers " + std::to_string(plan.n_samples) +
                                         " samples, got " + std::to_string(labels.size()) +
                                         " labels");
    std::vector<PartitionReportRow> rows;
    for (std::size_t c = 0; c < plan.assignments.size(); ++c) {
        const auto& shard = plan.assignments[c];
        std::map<int, std::size_t> counts;
        for (std::size_t i : shard) {
            if (i >= labels.size())
                fail(Err::PlanLabelMismatch, "plan index out of label range");
            counts[labels[i]] += 1;
        }
        for (const auto& [label, count] : counts) {
            rows.push_back({c, label, count, double(count) / double(shard.size())});
        }
    }
    return rows;
}

std::string partition_report_csv(const std::vector<PartitionReportRow>& rows) {
    std::string out = "client,class,count,fraction\n";
    for (const auto& r : rows) {
        out += std::to_string(r.client) + "," + std::to_string(r.label) + "," +
               std::to_string(r.count) + "," + std::to_string(r.fraction) + "\n";
    }
    return out;
}

std::string partition_plan_to_json(const PartitionPlan& plan) {
    nlohmann::json j;
    j["config"] = {{"n_clients", plan.config.n_clients},
                   {"alpha1", plan.config.alpha1},
                   {"alpha2", plan.config.alpha2},
                   {"seed", plan.config.seed}};
    j["n_samples"] = plan.n_samples;
    j["n_classes"] = plan.n_classes;
    j["assignments"] = plan.assignments;
    return j.dump(2);
}

PartitionPlan partition_plan_from_json(const std::string& text) {
    PartitionPlan plan;
    try {
        const auto j = nlohmann::json::parse(text);
        plan.config.n_clients = j.at("config").at("n_clients").get<std::size_t>();
        plan.config.alpha1 = j.at("config").at("alpha1").get<double>();
        plan.config.alpha2 = j.at("config").at("alpha2").get<double>();
        plan.config.seed = j.at("config").at("seed").get<std::uint64_t>();
        plan.n_samples = j.at("n_samples").get<std::size_t>();
        plan.n_classes = j.at("n_classes").get<std::size_t>();
        plan.assignments = j.at("assignments").get<std::vector<std::vector<std::size_t>>>();
    } catch (const nlohmann::json::exception& e) {
        fail(Err::BadConfig, std::string("partition plan JSON: ") + e.what());
    }
    return plan;
}

} // namespace fedsilo
