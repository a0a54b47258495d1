#include "doctest.h"

#include <algorithm>

#include "fedsilo/aggregate.hpp"
#include "fedsilo/rng.hpp"

using namespace fedsilo;

namespace {

ClientUpdate make_update(const std::string& id, std::vector<double> values,
                         std::uint64_t n_samples, std::int64_t round = 0) {
    ClientUpdate u;
    u.client_id = id;
    u.round = round;
    u.n_samples = n_samples;
    const std::size_t n = values.size();
    u.state.add("w", Tensor::from_values({n}, std::move(values)));
    return u;
}

// Independent oracle: accumulate n_i * x_i in input order, divide once.
ModelState brute_force_mean(const std::vector<ClientUpdate>& updates) {
    double total = 0.0;
    for (const auto& u : updates) total += double(u.n_samples);
    ModelState out;
    for (std::size_t e = 0; e < updates.front().state.entries().size(); ++e) {
        const auto& [name, proto] = updates.front().state.entries()[e];
        Tensor acc(proto.dims(), proto.dtype());
        for (std::size_t i = 0; i < acc.size(); ++i) {
            double sum = 0.0;
            for (const auto& u : updates)
                sum += double(u.n_samples) * u.state.entries()[e].second.get(i);
            acc.set(i, sum / total);
        }
        out.add(name, std::move(acc));
    }
    return out;
}

std::vector<ClientUpdate> random_updates(Rng& rng) {
    const std::size_t n_clients = 1 + rng.below(5);
    const std::size_t n_tensors = 1 + rng.below(4);
    std::vector<std::vector<std::size_t>> shapes;
    for (std::size_t t = 0; t < n_tensors; ++t)
        shapes.push_back({1 + rng.below(8), 1 + rng.below(8)});

    std::vector<ClientUpdate> updates;
    for (std::size_t c = 0; c < n_clients; ++c) {
        ClientUpdate u;
        u.client_id = "client" + std::to_string(c);
        u.round = 3;
        u.n_samples = 1 + rng.below(1000);
        for (std::size_t t = 0; t < n_tensors; ++t) {
            Tensor tensor(shapes[t]);
            for (std::size_t i = 0; i < tensor.size(); ++i)
                tensor.set(i, rng.normal(0.0, 5.0));
            u.state.add("p" + std::to_string(t), std::move(tensor));
        }
        updates.push_back(std::move(u));
    }
    return updates;
}

} // namespace

TEST_CASE("single update aggregates to itself") {
    const auto u = make_update("a", {1.0, -2.0, 3.0}, 17);
    const ModelState out = fedavg({u});
    CHECK(out == u.state);
}

TEST_CASE("hand-computed weighted means") {
    SUBCASE("equal weights") {
        const ModelState out =
            fedavg({make_update("a", {1.0}, 2), make_update("b", {3.0}, 2)});
        CHECK(out.at("w").get(0) == doctest::Approx(2.0).epsilon(1e-15));
    }
    SUBCASE("1:3 weights -> 2.5") {
        const ModelState out =
            fedavg({make_update("a", {1.0}, 1), make_update("b", {3.0}, 3)});
        CHECK(out.at("w").get(0) == doctest::Approx(2.5).epsilon(1e-15));
    }
}

TEST_CASE("fedavg matches the brute-force oracle on random updates") {
    Rng rng(314);
    for (int iter = 0; iter < 200; ++iter) {
        const auto updates = random_updates(rng);
        const ModelState got = fedavg(updates);
        const ModelState want = brute_force_mean(updates);
        REQUIRE(got.size() == want.size());
        for (std::size_t e = 0; e < got.entries().size(); ++e) {
            const auto& gt = got.entries()[e].second;
            const auto& wt = want.entries()[e].second;
            for (std::size_t i = 0; i < gt.size(); ++i)
                CHECK(std::abs(gt.get(i) - wt.get(i)) < 1e-12);
        }
    }
}

TEST_CASE("permutation invariance is bit-exact") {
    Rng rng(271);
    for (int iter = 0; iter < 50; ++iter) {
        auto updates = random_updates(rng);
        const ModelState base = fedavg(updates);
        for (int p = 0; p < 4; ++p) {
            rng.shuffle(updates);
            CHECK(fedavg(updates) == base);
        }
    }
}

TEST_CASE("scaling all sample counts leaves the result unchanged") {
    Rng rng(137);
    for (int iter = 0; iter < 50; ++iter) {
        auto updates = random_updates(rng);
        const ModelState base = fedavg(updates);
        for (auto& u : updates) u.n_samples *= 7;
        CHECK(fedavg(updates) == base);
    }
}

TEST_CASE("every aggregated element lies in the contribution hull") {
    Rng rng(555);
    for (int iter = 0; iter < 100; ++iter) {
        const auto updates = random_updates(rng);
        const ModelState out = fedavg(updates);
        for (std::size_t e = 0; e < out.entries().size(); ++e) {
            const auto& t = out.entries()[e].second;
            for (std::size_t i = 0; i < t.size(); ++i) {
                double lo = updates.front().state.entries()[e].second.get(i);
                double hi = lo;
                for (const auto& u : updates) {
                    lo = std::min(lo, u.state.entries()[e].second.get(i));
                    hi = std::max(hi, u.state.entries()[e].second.get(i));
                }
                CHECK(t.get(i) >= lo);
                CHECK(t.get(i) <= hi);
            }
        }
    }
}

TEST_CASE("identical updates aggregate to that exact state") {
    const auto u = make_update("a", {0.1, 0.2, -0.3}, 5);
    std::vector<ClientUpdate> copies;
    for (int k = 0; k < 3; ++k) {
        auto c = u;
        c.client_id = "c" + std::to_string(k);
        copies.push_back(std::move(c));
    }
    CHECK(fedavg(copies) == u.state);
}

TEST_CASE("fedavg error cases") {
    try {
        fedavg({});
        FAIL_CHECK("expected EmptyUpdateSet");
    } catch (const Error& e) {
        CHECK(e.code() == Err::EmptyUpdateSet);
    }

    auto a = make_update("a", {1.0}, 1);
    auto b = make_update("b", {1.0, 2.0}, 1); // different shape
    try {
        fedavg({a, b});
        FAIL_CHECK("expected SignatureMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Err::SignatureMismatch);
    }

    auto c = make_update("c", {1.0}, 1, 1); // different round
    try {
        fedavg({a, c});
        FAIL_CHECK("expected RoundMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Err::RoundMismatch);
    }
}

TEST_CASE("round barrier") {
    const std::set<std::string> roster = {"a", "b"};
    SUBCASE("waiting lists the missing client") {
        const auto status = check_barrier(roster, {make_update("a", {1.0}, 1)}, 0);
        REQUIRE_FALSE(barrier_complete(status));
        CHECK(std::get<BarrierWaiting>(status).missing == std::set<std::string>{"b"});
    }
    SUBCASE("complete when everyone reported") {
        const auto status = check_barrier(
            roster, {make_update("a", {1.0}, 1), make_update("b", {2.0}, 1)}, 0);
        CHECK(barrier_complete(status));
    }
    SUBCASE("duplicate updates are an error") {
        try {
            check_barrier(roster, {make_update("a", {1.0}, 1), make_update("a", {1.0}, 1)}, 0);
            FAIL_CHECK("expected DuplicateUpdate");
        } catch (const Error& e) {
            CHECK(e.code() == Err::DuplicateUpdate);
        }
    }
    SUBCASE("unknown clients are an error") {
        try {
            check_barrier(roster, {make_update("zz", {1.0}, 1)}, 0);
            FAIL_CHECK("expected UnknownClient");
        } catch (const Error& e) {
            CHECK(e.code() == Err::UnknownClient);
        }
    }
    SUBCASE("updates for other rounds do not satisfy the barrier") {
        const auto status = check_barrier(
            roster, {make_update("a", {1.0}, 1, 5), make_update("b", {2.0}, 1, 0)}, 0);
        REQUIRE_FALSE(barrier_complete(status));
        CHECK(std::get<BarrierWaiting>(status).missing == std::set<std::string>{"a"});
    }
}
