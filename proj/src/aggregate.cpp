#include "fedsilo/aggregate.hpp"

#include <algorithm>
#include <cmath>

namespace fedsilo {

namespace {

void check_signature(const ModelState& a, const ModelState& b) {
    if (a.size() != b.size()) fail(Err::SignatureMismatch, "entry counts differ");
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
        const auto& [na, ta] = a.entries()[i];
        const auto& [nb, tb] = b.entries()[i];
        if (na != nb) fail(Err::SignatureMismatch, "entry name '" + na + "' vs '" + nb + "'");
        if (ta.dims() != tb.dims() || ta.dtype() != tb.dtype())
            fail(Err::SignatureMismatch, "shape or dtype differs for '" + na + "'");
    }
}

} // namespace

ModelState fedavg(const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) fail(Err::EmptyUpdateSet, "no updates to aggregate");

    std::vector<const ClientUpdate*> ordered;
    ordered.reserve(updates.size());
    for (const auto& u : updates) ordered.push_back(&u);
    std::sort(ordered.begin(), ordered.end(), [](const ClientUpdate* a, const ClientUpdate* b) {
        return a->client_id < b->client_id;
    });

    const ClientUpdate& first = *ordered.front();
    std::uint64_t total = 0;
    for (const auto* u : ordered) {
        if (u->round != first.round)
            fail(Err::RoundMismatch, "updates span rounds " + std::to_string(first.round) +
                                         " and " + std::to_string(u->round));
        if (u->n_samples < 1) fail(Err::BadConfig, "update with zero n_samples");
        check_signature(first.state, u->state);
        total += u->n_samples;
    }

    std::vector<double> weights;
    weights.reserve(ordered.size());
    for (const auto* u : ordered)
        weights.push_back(double(u->n_samples) / double(total));

    ModelState out;
    for (std::size_t e = 0; e < first.state.entries().size(); ++e) {
        const auto& [name, proto] = first.state.entries()[e];
        Tensor acc(proto.dims(), proto.dtype());
        for (std::size_t i = 0; i < acc.size(); ++i) {
            double sum = 0.0;
            double lo = ordered.front()->state.entries()[e].second.get(i);
            double hi = lo;
            for (std::size_t u = 0; u < ordered.size(); ++u) {
                const double v = ordered[u]->state.entries()[e].second.get(i);
                sum += weights[u] * v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            // clamp to the contribution hull: the exact mean lies inside it,
            // only rounding can step out
            acc.set(i, std::min(std::max(sum, lo), hi));
        }
        out.add(name, std::move(acc));
    }
    return out;
}

bool barrier_complete(const BarrierStatus& s) {
    return std::holds_alternative<BarrierComplete>(s);
}

BarrierStatus check_barrier(const std::set<std::string>& roster,
                            const std::vector<ClientUpdate>& received, std::int64_t round) {
    std::set<std::string> seen;
    for (const auto& u : received) {
        if (!roster.count(u.client_id))
            fail(Err::UnknownClient, "'" + u.client_id + "' not in roster");
        if (u.round != round) continue;
        if (!seen.insert(u.client_id).second)
            fail(Err::DuplicateUpdate, "'" + u.client_id + "' sent two updates for round " +
                                           std::to_string(round));
    }
    std::set<std::string> missing;
    for (const auto& id : roster)
        if (!seen.count(id)) missing.insert(id);
    if (missing.empty()) return BarrierComplete{};
    return BarrierWaiting{std::move(missing)};
}

} // namespace fedsilo
