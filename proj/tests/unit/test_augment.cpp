#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>

#include "oracles.hpp"
#include "scripted_client.hpp"
#include "robustkd/augment.hpp"

using namespace rkd;

using oracle::ScriptedClient;
using oracle::starts_with;

TEST_CASE("premise prompts are byte-exact") {
    CHECK(build_premise_prompt("travel").text == "Example extract from a travel guide:");
    CHECK(build_premise_prompt("flickr").text == "Example flickr image caption:");
    CHECK(build_premise_prompt("fiction").text == "Example extract from a fiction book:");
    CHECK(build_premise_prompt("magazine").text == "Example extract from a popular magazine article:");
    const std::vector<std::string> gov = {
        "Example extract from a press release on a public domain government website:",
        "Example extract from a letter on a public domain government website:",
        "Example extract from a speech on a public domain government website",
        "Example extract from a report on a public domain government website:",
    };
    for (std::size_t r = 0; r < 8; ++r) CHECK(build_premise_prompt("government", r).text == gov[r % 4]);
    CHECK_THROWS_AS(build_premise_prompt("cooking"), ConfigError);
}

TEST_CASE("filter_premise") {
    CHECK_FALSE(filter_premise("Hi.").has_value());
    CHECK_FALSE(filter_premise("Is this real?").has_value());
    CHECK(filter_premise("Ok. The museum opens at nine.") == std::optional<std::string>("The museum opens at nine."));
    CHECK(filter_premise("The museum opens at nine.") == std::optional<std::string>("The museum opens at nine."));
    // only the second sentence is considered as a fallback
    CHECK_FALSE(filter_premise("Hi. Yo. The museum opens at nine.").has_value());
}

TEST_CASE("hypothesis prompts") {
    auto bank = ExampleBank::builtin();
    auto a = build_hypothesis_prompt("A boat sails.", 1, bank, "travel");
    CHECK(a.text == build_hypothesis_prompt("A boat sails.", 1, bank, "travel").text);
    CHECK(starts_with(a.text, "Write a hypothesis that might be true given the premise."));
    const std::string tail = "\n\nPremise: A boat sails.\nHypothesis:";
    CHECK(a.text.compare(a.text.size() - tail.size(), tail.size(), tail) == 0);

    std::set<std::string> distinct;
    for (int c = 0; c < 3; ++c) {
        auto t = build_hypothesis_prompt("A boat sails.", c, bank, "travel").text;
        distinct.insert(t);
        CHECK(t.find(bank.per_class[c][0].hypothesis) != std::string::npos);
    }
    CHECK(distinct.size() == 3);

    bank.per_class[1].pop_back();
    CHECK_THROWS_AS(bank.validate(), ConfigError);
}

TEST_CASE("shuffle_words_remove_conjunction") {
    auto w = shuffle_words_remove_conjunction("she stayed home because it rained", "because", 4);
    std::multiset<std::string> got(w.begin(), w.end());
    CHECK(got == std::multiset<std::string>{"she", "stayed", "home", "it", "rained"});
    CHECK(w == shuffle_words_remove_conjunction("she stayed home because it rained", "because", 4));
    CHECK(shuffle_words_remove_conjunction("rain because", "because", 1) == std::vector<std::string>{"rain"});
    CHECK_THROWS_AS(shuffle_words_remove_conjunction("no link here", "because", 1), ContractError);
}

TEST_CASE("conjunction list") {
    auto c = ConjunctionList::builtin();
    CHECK(c.words.size() == 60);
    CHECK_NOTHROW(c.validate());
    c.words.pop_back();
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("DTA generation") {
    SynthConfig world;
    MockOptions mo;
    mo.seed = 3;
    DtaOptions opts;
    opts.domains = {"travel"};
    opts.n_target = 3;
    opts.seed = 8;

    SUBCASE("smallest quota covers every class once") {
        MockCompletionClient client(world, mo);
        auto res = generate_dta(opts, client, ExampleBank::builtin());
        REQUIRE(res.examples.size() == 3);
        std::set<int> classes;
        for (const auto& ex : res.examples) {
            classes.insert(*ex.conditioned_class);
            CHECK_FALSE(ex.gold.has_value());
            CHECK(ex.provenance == Provenance::dta);
        }
        CHECK(classes == std::set<int>{0, 1, 2});
    }
    SUBCASE("byte-identical per seed") {
        opts.n_target = 60;
        MockCompletionClient c1(world, mo), c2(world, mo);
        auto a = generate_dta(opts, c1, ExampleBank::builtin());
        auto b = generate_dta(opts, c2, ExampleBank::builtin());
        CHECK(format_dataset(a.to_dataset("dta")) == format_dataset(b.to_dataset("dta")));
        CHECK(a.report.to_json() == b.report.to_json());
    }
    SUBCASE("rejected premises never reach the hypothesis step") {
        ScriptedClient client;
        client.premise = [](const auto&) { return std::string("Is this real?"); };
        opts.max_candidates_per_example = 4;
        auto res = generate_dta(opts, client, ExampleBank::builtin());
        CHECK(res.examples.empty());
        CHECK(client.calls["hypothesis"] == 0);
        CHECK(client.calls["premise"] > 0);
        CHECK_FALSE(res.report.target_reached);
    }
}

TEST_CASE("WOA generation drops exactly per checker answers") {
    auto conj = ConjunctionList::builtin();
    WoaOptions opts;
    opts.n_target = 40;
    opts.seed = 6;
    opts.max_candidates_per_example = 1;

    ScriptedClient client;
    std::set<std::string> incoherent, same;
    client.coherent = [&](const std::string& s) {
        if (oracle::fnv1a64(s) % 4 == 0) {
            incoherent.insert(s);
            return std::string("No.");
        }
        return std::string("Yes");
    };
    client.same_meaning = [&](const std::string& a, const std::string& b) {
        if (oracle::fnv1a64(a + b) % 3 == 0) {
            same.insert(a);
            return std::string("yes");
        }
        return std::string("No");
    };
    auto res = generate_woa(opts, conj, client);
    CHECK(res.report.candidates == 40);
    CHECK(res.report.dropped_incoherent > 0);
    CHECK(res.report.dropped_same_meaning > 0);
    CHECK(res.report.emitted == 40 - res.report.dropped_incoherent - res.report.dropped_same_meaning);
    for (const auto& ex : res.examples) {
        CHECK(incoherent.count(ex.premise) == 0);
        CHECK(incoherent.count(ex.hypothesis) == 0);
        CHECK(same.count(ex.premise) == 0);
        CHECK(ex.provenance == Provenance::woa);
        CHECK_FALSE(ex.gold.has_value());
    }
    // meaning is only asked for pairs that passed the coherence check
    CHECK(client.calls["meaning"] == static_cast<int>(40 - res.report.dropped_incoherent));
}

TEST_CASE("WOA with an all-pass checker") {
    SynthConfig world;
    MockOptions mo;
    mo.coherence_yes_rate = 1.0;
    mo.meaning_no_rate = 1.0;
    MockCompletionClient client(world, mo);
    WoaOptions opts;
    opts.n_target = 5;
    opts.seed = 2;
    auto res = generate_woa(opts, ConjunctionList::builtin(), client);
    REQUIRE(res.examples.size() == 5);
    auto conj = ConjunctionList::builtin();
    for (const auto& ex : res.examples) {
        auto prem = tokenize(ex.premise);
        std::multiset<std::string> pool(prem.begin(), prem.end());
        // drop one conjunction token from the premise
        for (const auto& w : conj.words)
            if (auto it = pool.find(w); it != pool.end()) {
                pool.erase(it);
                break;
            }
        for (const auto& t : tokenize(ex.hypothesis)) {
            auto it = pool.find(t);
            REQUIRE(it != pool.end());
            pool.erase(it);
        }
    }
}

TEST_CASE("yes/no parsing") {
    CHECK(parse_yes_no(" Yes.") == true);
    CHECK(parse_yes_no("no") == false);
    CHECK_FALSE(parse_yes_no("maybe").has_value());
}
