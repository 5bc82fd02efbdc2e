#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "robustkd/dmu.hpp"
#include "robustkd/encoded.hpp"

using namespace rkd;

namespace {

// Ten examples whose gold labels are set from the model's own forward pass,
// flipped on `wrong` so that exactly those are misclassified.
EncodedSplit labelled_by(const ModelParams& m, const std::set<int>& wrong) {
    Dataset ds;
    std::mt19937_64 gen(5);
    for (int i = 0; i < 10; ++i) {
        NLIExample ex;
        ex.id = std::to_string(i);
        ex.premise = oracle::random_sentence(gen, 6);
        ex.hypothesis = oracle::random_sentence(gen, 3);
        ex.domain = "t";
        const int pick = argmax(forward(m, encode(ex.premise, ex.hypothesis, m.dim)));
        ex.gold = wrong.count(i) ? (pick + 1) % 3 : pick;
        ds.add(ex);
    }
    return EncodedSplit::from(ds, m.dim);
}

std::vector<std::string> ids_of(int n) {
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) v.push_back("id" + std::to_string(i));
    return v;
}

}  // namespace

TEST_CASE("identify_minority from forward passes") {
    auto m = ModelParams::init(64, 8, 3, 17);
    CHECK(identify_minority({&m}, labelled_by(m, {}), MinorityMode::student).ids.empty());
    auto set = identify_minority({&m}, labelled_by(m, {1, 3}), MinorityMode::student);
    CHECK(set.ids == std::set<std::string>{"1", "3"});

    SUBCASE("jtt_config is the teacher-mode alias") {
        auto data = labelled_by(m, {7});
        auto j = jtt_config(m, data);
        CHECK(j.ids == std::set<std::string>{"7"});
        CHECK(j.ids == identify_minority({&m}, data, MinorityMode::teacher).ids);
        CHECK(j.mode == MinorityMode::teacher);
    }
    SUBCASE("single-model modes reject ensembles") {
        auto data = labelled_by(m, {});
        CHECK_THROWS_AS(identify_minority({&m, &m}, data, MinorityMode::student), ContractError);
    }
}

TEST_CASE("ensemble_any is the union of per-model error sets") {
    const std::vector<std::string> ids{"0", "1", "2"};
    const std::vector<std::optional<int>> gold{0, 0, 0};
    std::vector<std::vector<Probs>> preds = {
        {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.8, 0.1, 0.1}},
        {{0.8, 0.1, 0.1}, {0.8, 0.1, 0.1}, {0.1, 0.1, 0.8}},
    };
    auto s = identify_minority(preds, ids, gold, MinorityMode::ensemble_any);
    CHECK(s.ids == std::set<std::string>{"1", "2"});

    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + gen() % 20, models = 1 + gen() % 5;
        std::vector<std::string> tid;
        std::vector<std::optional<int>> tg;
        for (std::size_t i = 0; i < n; ++i) {
            tid.push_back("x" + std::to_string(i));
            tg.push_back(static_cast<int>(gen() % 3));
        }
        std::vector<std::vector<Probs>> tp(models);
        std::set<std::string> brute;
        for (std::size_t k = 0; k < models; ++k)
            for (std::size_t i = 0; i < n; ++i) {
                tp[k].push_back(oracle::random_distribution(gen));
                const auto& r = tp[k].back();
                if (std::max_element(r.begin(), r.end()) - r.begin() != *tg[i]) brute.insert(tid[i]);
            }
        REQUIRE(identify_minority(tp, tid, tg, MinorityMode::ensemble_any).ids == brute);
    }
}

TEST_CASE("manifest") {
    auto ids = ids_of(10);
    MinoritySet none;
    CHECK(build_manifest(ids, none, 6).size() == 10);

    MinoritySet one;
    one.ids = {"id3"};
    auto m = build_manifest(ids, one, 6);
    CHECK(m.size() == 15);
    CHECK(std::count(m.order.begin(), m.order.end(), "id3") == 6);
    CHECK(m.multiplicity.at("id3") == 6);
    CHECK(build_manifest(ids, one, 1).order == ids);

    MinoritySet stranger;
    stranger.ids = {"nope"};
    CHECK_THROWS_AS(build_manifest(ids, stranger, 6), ContractError);

    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 200);
        auto train = ids_of(n);
        MinoritySet ms;
        for (const auto& id : train)
            if (gen() % 4 == 0) ms.ids.insert(id);
        auto mf = build_manifest(train, ms, 6);
        REQUIRE(mf.size() == train.size() + 5 * ms.ids.size());
        REQUIRE(mf.size() == oracle::manifest_length(train.size(), ms.ids.size(), 6));
    }
}

TEST_CASE("minority set file round trip") {
    MinoritySet m;
    m.ids = {"b", "a"};
    m.mode = MinorityMode::ensemble_any;
    m.source_models = {"s0", "s1"};
    auto text = format_minority_set(m);
    CHECK(text == "# mode=ensemble_any models=s0,s1\na\nb\n");
    auto back = parse_minority_set(text);
    CHECK(back.ids == m.ids);
    CHECK(back.mode == m.mode);
    CHECK(back.source_models == m.source_models);
}
