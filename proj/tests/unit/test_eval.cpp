#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "robustkd/encoded.hpp"
#include "robustkd/eval.hpp"

using namespace rkd;

namespace {

CorrectnessVector vec(const std::vector<bool>& bits, const std::string& prefix = "e") {
    CorrectnessVector c;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        c.ids.push_back(prefix + std::to_string(i));
        c.correct.push_back(bits[i]);
    }
    return c;
}

EncodedSplit balanced_split() {
    Dataset ds;
    for (int i = 0; i < 9; ++i) {
        NLIExample ex;
        ex.id = "s" + std::to_string(i);
        ex.premise = "word" + std::to_string(i) + " here";
        ex.hypothesis = "other words";
        ex.domain = "d";
        ex.gold = i % 3;
        ds.add(ex);
    }
    return EncodedSplit::from(ds, 64);
}

RunRecord record(const std::string& method, std::uint64_t seed, double acc) {
    RunRecord r;
    r.method = method;
    r.seed = seed;
    r.split_accuracy["test"] = acc;
    std::vector<bool> bits(10);
    for (int i = 0; i < 10; ++i) bits[i] = i < static_cast<int>(acc * 10 + 0.5);
    r.correctness["test"] = vec(bits);
    return r;
}

}  // namespace

TEST_CASE("accuracy") {
    auto split = balanced_split();
    std::vector<Probs> right, uniform;
    for (std::size_t i = 0; i < split.size(); ++i) {
        Probs p(3, 0.0);
        p[static_cast<std::size_t>(*split.gold[i])] = 1.0;
        right.push_back(p);
        uniform.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
    }
    CHECK(accuracy(right, split).value == 1.0);

    // uniform output breaks ties towards class 0
    std::size_t zeros = 0;
    for (const auto& g : split.gold) zeros += *g == 0;
    auto u = accuracy(uniform, split);
    CHECK(u.value == static_cast<double>(zeros) / static_cast<double>(split.size()));

    std::size_t wrong = 0;
    for (bool b : u.correctness.correct) wrong += !b;
    CHECK(u.value + static_cast<double>(wrong) / static_cast<double>(split.size()) == 1.0);
}

TEST_CASE("paired bootstrap") {
    SUBCASE("equal vectors give exactly one") {
        auto a = vec({true, false, true, true});
        CHECK(bootstrap_pvalue(a, a, 1000, 1).p_value == 1.0);
    }
    SUBCASE("all-true against all-false") {
        auto a = vec(std::vector<bool>(50, true));
        auto b = vec(std::vector<bool>(50, false));
        CHECK(bootstrap_pvalue(a, b, 10000, 2).p_value < 0.01);
    }
    SUBCASE("symmetric in its arguments") {
        std::mt19937_64 gen(4);
        std::vector<bool> x(200), y(200);
        for (int i = 0; i < 200; ++i) {
            x[i] = gen() % 10 < 7;
            y[i] = gen() % 10 < 6;
        }
        auto a = vec(x), b = vec(y);
        CHECK(bootstrap_pvalue(a, b, 2000, 9).p_value == bootstrap_pvalue(b, a, 2000, 9).p_value);
    }
    SUBCASE("mismatched ids are rejected") {
        CHECK_THROWS_AS(bootstrap_pvalue(vec({true}, "a"), vec({true}, "b")), ContractError);
        CHECK_THROWS_AS(bootstrap_pvalue(vec({}), vec({})), ContractError);
    }
    CHECK(format_p_value(0.00001) == "<0.0001");
    CHECK(format_p_value(0.05) == "0.0500");
}

TEST_CASE("aggregate over seeds") {
    std::vector<RunRecord> recs = {record("kd", 1, 0.8), record("kd", 2, 0.9), record("dta", 1, 0.8),
                                   record("dta", 2, 0.8)};
    auto table = aggregate_seeds(recs, "kd", 500, 3);
    CHECK(table.row("kd").mean_accuracy.at("test") == doctest::Approx(0.85));
    CHECK(table.row("dta").mean_accuracy.at("test") == doctest::Approx(0.8));
    CHECK(table.row("kd").seeds == 2);
    CHECK(table.to_tsv().find("85.00") != std::string::npos);

    SUBCASE("uneven seed counts are rejected") {
        recs.pop_back();
        CHECK_THROWS_AS(aggregate_seeds(recs, "kd"), ContractError);
    }
    SUBCASE("failed runs are skipped") {
        recs.push_back(record("kd", 3, 0.1));
        recs.back().failed = true;
        CHECK(aggregate_seeds(recs, "kd", 100).row("kd").seeds == 2);
    }
}

TEST_CASE("pooled correctness prefixes ids with the seed") {
    auto a = record("kd", 1, 0.5), b = record("kd", 2, 0.5);
    auto pooled = pool_correctness({&a, &b}, "test");
    CHECK(pooled.size() == 20);
    CHECK(pooled.ids.front() == "1/e0");
    CHECK(pooled.ids.back() == "2/e9");
}
