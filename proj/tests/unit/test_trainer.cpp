#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "robustkd/distill.hpp"
#include "robustkd/encoded.hpp"
#include "robustkd/eval.hpp"
#include "robustkd/trainer.hpp"

using namespace rkd;

namespace {

constexpr std::size_t kDim = 256;

// Class is carried by one of three marker words; the rest is noise.
EncodedSplit toy(std::size_t n, std::uint64_t seed, bool labelled = true, const std::string& prefix = "t") {
    static const char* markers[] = {"alpha", "beta", "gamma"};
    std::mt19937_64 gen(seed);
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        NLIExample ex;
        ex.id = prefix + std::to_string(i);
        const int c = static_cast<int>(i % 3);
        ex.premise = oracle::random_sentence(gen, 5);
        ex.hypothesis = oracle::random_sentence(gen, 2) + " " + markers[c];
        ex.domain = "toy";
        if (labelled) ex.gold = c;
        else ex.provenance = Provenance::dta;
        ds.add(ex);
    }
    return EncodedSplit::from(ds, kDim);
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.seed = 4;
    cfg.batch_size = 8;
    cfg.model.dim = kDim;
    cfg.model.hidden = 16;
    cfg.supervised = {20, 0.5};
    cfg.distill.epochs = 6;
    cfg.distill.peak_lr = 0.05;
    cfg.distill.patience = 2;
    return cfg;
}

}  // namespace

TEST_CASE("supervised training") {
    auto cfg = small_config();
    auto data = toy(50, 1);

    SUBCASE("fits a separable toy set") {
        auto m = train_supervised(cfg, data);
        CHECK(accuracy(m, data).value == 1.0);
    }
    SUBCASE("deterministic per seed") {
        CHECK(format_checkpoint(train_supervised(cfg, data)) == format_checkpoint(train_supervised(cfg, data)));
    }
    SUBCASE("zero steps is a contract error") {
        cfg.supervised.epochs = 0;
        CHECK_THROWS_AS(train_supervised(cfg, data), ContractError);
    }
    SUBCASE("unlabelled rows are rejected") {
        CHECK_THROWS_AS(train_supervised(cfg, toy(6, 1, false)), ContractError);
    }
}

TEST_CASE("distillation") {
    auto cfg = small_config();
    auto train = toy(60, 2);
    auto dev = toy(30, 3, true, "d");
    cfg.supervised.epochs = 2;
    auto student = train_supervised(cfg, train);
    cfg.supervised.epochs = 20;
    auto teacher = train_supervised(cfg, train);

    SUBCASE("self-distillation at zero learning rate is a no-op") {
        cfg.gate_enabled = false;
        cfg.distill.peak_lr = 0.0;
        cfg.distill.early_stopping = false;
        DistillInputs in{&train, teacher_targets({&student}, train), {}, nullptr};
        CHECK(distill(cfg, student, in).model == student);
    }
    SUBCASE("one teacher equals the ensemble path with E=1") {
        auto direct = teacher_targets({&teacher}, train);
        std::vector<Probs> via;
        for (std::size_t i = 0; i < train.size(); ++i)
            via.push_back(ensemble_target(std::vector<Probs>{forward(teacher, train.features[i])}));
        auto a = distill(cfg, student, {&train, direct, {}, &dev});
        auto b = distill(cfg, student, {&train, via, {}, &dev});
        CHECK(a.model == b.model);
        CHECK(a.dev_accuracy == b.dev_accuracy);
    }
    SUBCASE("gate counts match the rule per batch") {
        cfg.distill.peak_lr = 0.0;  // frozen student keeps decisions fixed
        cfg.distill.early_stopping = false;
        cfg.distill.epochs = 1;
        auto unl = toy(12, 9, false, "u");
        auto all = EncodedSplit::concat(train, unl);
        auto targets = teacher_targets({&student}, all);
        // perturb so that some labelled rows fail the gate
        std::mt19937_64 gen(6);
        for (auto& q : targets) q = oracle::random_distribution(gen);
        std::size_t expected = 0;
        for (std::size_t i = 0; i < train.size(); ++i)
            expected += oracle::gate_include(*all.gold[i], forward(student, all.features[i]), targets[i]);

        std::size_t kept = 0, dropped = 0, unlabelled = 0;
        TrainHooks hooks;
        hooks.on_batch = [&](const TrainHooks::BatchStats& s) {
            CHECK(s.gated_in + s.gated_out == s.labelled);
            kept += s.gated_in;
            dropped += s.gated_out;
            unlabelled += s.unlabelled;
        };
        auto res = distill(cfg, student, {&all, targets, {}, nullptr}, hooks);
        CHECK(kept == expected);
        CHECK(dropped == train.size() - expected);
        CHECK(unlabelled == unl.size());
        CHECK(res.gated_in == kept);
        CHECK(dropped > 0);
    }
    SUBCASE("early stopping halts exactly when patience runs out") {
        cfg.distill.epochs = 12;
        cfg.distill.patience = 2;
        cfg.distill.peak_lr = 0.3;
        auto res = distill(cfg, student, {&train, teacher_targets({&teacher}, train), {}, &dev});
        const auto& acc = res.dev_accuracy;
        REQUIRE(acc.size() == res.epochs_run);
        auto stalled = [&](std::size_t e) {  // 1-based epoch e
            double best_before = -1.0;
            for (std::size_t k = 0; k + cfg.distill.patience < e; ++k) best_before = std::max(best_before, acc[k]);
            for (std::size_t k = e - cfg.distill.patience; k < e; ++k)
                if (acc[k] > best_before) return false;
            return true;
        };
        for (std::size_t e = cfg.distill.patience + 1; e < res.epochs_run; ++e) CHECK_FALSE(stalled(e));
        if (res.stopped_early) CHECK(stalled(res.epochs_run));
        const auto best = std::max_element(acc.begin(), acc.end()) - acc.begin() + 1;
        CHECK(res.selected_epoch == best);
    }
    SUBCASE("targets must cover every row") {
        DistillInputs in{&train, {}, {}, &dev};
        CHECK_THROWS_AS(distill(cfg, student, in), ContractError);
    }
}

TEST_CASE("config validation") {
    SUBCASE("empty text gives the defaults") {
        auto v = validate_config_text("");
        CHECK(v.ok());
        CHECK(to_json(v.config) == to_json(TrainConfig{}));
    }
    SUBCASE("patience zero with early stopping names both fields") {
        auto v = validate_config_text(R"({"distill": {"patience": 0, "early_stopping": true}})");
        REQUIRE(v.errors.size() == 1);
        CHECK(v.errors[0].find("distill.patience") != std::string::npos);
        CHECK(v.errors[0].find("distill.early_stopping") != std::string::npos);
    }
    SUBCASE("augmented_only needs generated data") {
        auto v = validate_config_text(R"({"distill_on": "augmented_only"})");
        REQUIRE_FALSE(v.ok());
        CHECK(v.errors[0].find("augmented") != std::string::npos);
    }
    SUBCASE("every problem is reported at once") {
        auto v = validate_config_text(R"({"batch_size": "big", "bogus": 1, "distill": {"epochs": 0}})");
        CHECK(v.errors.size() == 3);
    }
    SUBCASE("exceptions force early stopping off") {
        TrainConfig cfg;
        CHECK(apply_exceptions(cfg).empty());
        cfg.exceptions.self_distillation_ensemble = true;
        CHECK_FALSE(apply_exceptions(cfg).empty());
        CHECK_FALSE(cfg.distill.early_stopping);
    }
}

TEST_CASE("manifest rows") {
    auto data = toy(4, 1);
    TrainingManifest m;
    m.order = {"t0", "t2", "t2"};
    CHECK(manifest_rows(m, data) == std::vector<std::size_t>{0, 2, 2});
    m.order.push_back("missing");
    CHECK_THROWS_AS(manifest_rows(m, data), ContractError);
}
