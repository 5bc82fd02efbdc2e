#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "robustkd/distill.hpp"

using namespace rkd;

TEST_CASE("squared distillation loss") {
    const Probs u{1.0 / 3, 1.0 / 3, 1.0 / 3};
    auto same = sq_distill_loss(u, u);
    CHECK(same.loss == 0.0);
    for (double g : same.dl_dp) CHECK(g == 0.0);

    CHECK(std::abs(sq_distill_loss(Probs{1, 0, 0}, Probs{0, 1, 0}).loss - 2.0) < 1e-9);
    CHECK(std::abs(sq_distill_loss(Probs{0.7, 0.2, 0.1}, Probs{0.5, 0.3, 0.2}).loss - 0.06) < 1e-9);
    CHECK_THROWS_AS(sq_distill_loss(Probs{0.5, 0.6, 0.2}, u), ContractError);
}

TEST_CASE("ensemble target") {
    auto close = [](const Probs& a, const Probs& b) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i] - b[i]) > 1e-9) return false;
        return a.size() == b.size();
    };
    CHECK(close(ensemble_target(std::vector<Probs>{{0.2, 0.5, 0.3}}), {0.2, 0.5, 0.3}));
    CHECK(close(ensemble_target(std::vector<Probs>{{1, 0, 0}, {0, 1, 0}}), {0.5, 0.5, 0.0}));
    CHECK(close(ensemble_target(std::vector<Probs>{{0.6, 0.3, 0.1}, {0.3, 0.6, 0.1}, {0.3, 0.3, 0.4}}),
                {0.4, 0.4, 0.2}));
    CHECK_THROWS_AS(ensemble_target(std::vector<Probs>{}), ContractError);
}

TEST_CASE("gate") {
    auto d = gate(0, Probs{0.1, 0.1, 0.8}, Probs{0.6, 0.3, 0.1});
    CHECK(d.include);
    CHECK(d.reason == GateReason::teacher_correct);

    d = gate(0, Probs{0.2, 0.4, 0.4}, Probs{0.3, 0.5, 0.2});
    CHECK(d.include);
    CHECK(d.reason == GateReason::teacher_better_on_gold);

    d = gate(0, Probs{0.4, 0.3, 0.3}, Probs{0.3, 0.5, 0.2});
    CHECK_FALSE(d.include);
    CHECK(d.reason == GateReason::excluded);

    std::mt19937_64 gen(21);
    for (int i = 0; i < 200; ++i) {
        const int gold = static_cast<int>(gen() % 3);
        auto p = oracle::random_distribution(gen);
        auto q = oracle::random_distribution(gen);
        REQUIRE(gate(gold, p, q).include == oracle::gate_include(gold, p, q));
    }
}

TEST_CASE("teacher smoothing") {
    CHECK(smooth_teacher(Probs{1, 0, 0}) == Probs{1, 0, 0});
    auto u = smooth_teacher(Probs{1.0 / 3, 1.0 / 3, 1.0 / 3});
    for (double v : u) CHECK(std::abs(v - 1.0 / 3) < 1e-12);

    auto s = smooth_teacher(Probs{0.5, 0.3, 0.2});
    auto ref = oracle::smooth({0.5, 0.3, 0.2}, 0.9);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(s[c] - ref[c]) < 1e-9);
    // the published figures are rounded approximations
    CHECK(std::abs(s[0] - 0.4830) < 5e-4);
    CHECK(std::abs(s[1] - 0.3053) < 5e-4);
    CHECK(std::abs(s[2] - 0.2117) < 5e-4);
    CHECK_THROWS_AS(smooth_teacher(Probs{0.5, 0.3, 0.2}, 0.0), ContractError);
}

TEST_CASE("cross entropy") {
    CHECK(cross_entropy(Probs{1, 0, 0}, 0).loss == 0.0);
    for (int g = 0; g < 3; ++g)
        CHECK(std::abs(cross_entropy(Probs{1.0 / 3, 1.0 / 3, 1.0 / 3}, g).loss - std::log(3.0)) < 1e-9);
    auto clamped = cross_entropy(Probs{0, 1, 0}, 0);
    CHECK(std::isfinite(clamped.loss));
    CHECK(clamped.loss == doctest::Approx(-std::log(kCrossEntropyFloor)));
}
