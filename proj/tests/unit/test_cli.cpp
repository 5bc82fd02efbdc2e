#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "oracles.hpp"
#include "robustkd/cli.hpp"
#include "robustkd/data.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "robustkd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream captured;
    auto* old = std::cerr.rdbuf(captured.rdbuf());
    const int code = rkd::cli::dispatch(static_cast<int>(argv.size()), argv.data());
    std::cerr.rdbuf(old);
    return {code, captured.str()};
}

std::string slurp(const fs::path& p) { return rkd::read_text_file(p); }

void write(const fs::path& p, const std::string& text) { rkd::write_text_file(p, text); }

}  // namespace

TEST_CASE("evaluate without a checkpoint is a usage error naming the flag") {
    auto dir = oracle::scratch_dir("cli-eval");
    auto r = cli({"evaluate", "--data", dir.string(), "--out-dir", (dir / "o").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("--checkpoint") != std::string::npos);

    r = cli({"evaluate", "--checkpoint", (dir / "none.ckpt").string(), "--data", dir.string(), "--out-dir",
             (dir / "o").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("--checkpoint") != std::string::npos);
}

TEST_CASE("synth-data is deterministic per seed") {
    auto dir = oracle::scratch_dir("cli-synth");
    REQUIRE(cli({"synth-data", "--seed", "7", "--out-dir", (dir / "a").string()}).code == 0);
    REQUIRE(cli({"synth-data", "--seed", "7", "--out-dir", (dir / "b").string()}).code == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        ++files;
        CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
    }
    CHECK(files >= 6);
}

TEST_CASE("config problems exit 1 and list every error") {
    auto dir = oracle::scratch_dir("cli-config");
    write(dir / "bad.json", R"({"distill": {"patience": 0}, "bogus": true})");
    auto r = cli({"train-teacher", "--config", (dir / "bad.json").string(), "--data", dir.string(), "--out-dir",
                  (dir / "o").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("distill.patience") != std::string::npos);
    CHECK(r.err.find("bogus") != std::string::npos);

    r = cli({"gen-dta", "--out-dir", (dir / "g").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("--mock-llm") != std::string::npos);

    CHECK(cli({"no-such-command"}).code == 1);
}

TEST_CASE("small end-to-end pipeline through the CLI") {
    auto dir = oracle::scratch_dir("cli-pipeline");
    const auto corpus = (dir / "corpus").string();
    write(dir / "synth.json",
          R"({"n_train": 300, "n_dev": 90, "n_test": 90, "n_test_hard": 90, "n_ood_target": 90, "n_pretrain_per_domain": 150})");
    write(dir / "train.json",
          R"({"model": {"dim": 1024, "hidden": 16}, "supervised": {"epochs": 3, "peak_lr": 0.5},
              "distill": {"epochs": 3, "peak_lr": 0.05, "patience": 2}})");
    REQUIRE(cli({"synth-data", "--config", (dir / "synth.json").string(), "--out-dir", corpus}).code == 0);

    auto gen = cli({"gen-dta", "--mock-llm", "--n", "30", "--seed", "3", "--out-dir", (dir / "dta").string()});
    REQUIRE(gen.code == 0);
    CHECK(rkd::load_dataset(dir / "dta" / "dta.jsonl").size() == 30);
    REQUIRE(cli({"gen-woa", "--mock-llm", "--n", "10", "--seed", "3", "--out-dir", (dir / "woa").string()}).code == 0);
    CHECK(rkd::load_dataset(dir / "woa" / "woa.jsonl").size() == 10);

    const auto cfg = (dir / "train.json").string();
    // teacher predictions also cover the generated rows so the matrix can stand in for the model
    REQUIRE(cli({"train-teacher", "--config", cfg, "--data", corpus, "--seed", "1", "--augmented",
                 (dir / "dta" / "dta.jsonl").string(), "--out-dir", (dir / "teacher").string()})
                .code == 0);
    REQUIRE(cli({"train-teacher", "--config", cfg, "--data", corpus, "--seed", "2", "--out-dir",
                 (dir / "student").string()})
                .code == 0);
    CHECK(fs::exists(dir / "teacher" / "model.ckpt"));
    CHECK(fs::exists(dir / "teacher" / "run_record.json"));

    auto d = cli({"distill", "--config", cfg, "--data", corpus, "--teacher", (dir / "teacher" / "model.ckpt").string(),
                  "--student-init", (dir / "student" / "model.ckpt").string(), "--augmented",
                  (dir / "dta" / "dta.jsonl").string(), "--out-dir", (dir / "kd").string()});
    REQUIRE(d.code == 0);
    CHECK(fs::exists(dir / "kd" / "correctness" / "test.csv"));

    SUBCASE("matrix teachers work like live teachers") {
        REQUIRE(cli({"distill", "--config", cfg, "--data", corpus, "--predictions",
                     (dir / "teacher" / "predictions.csv").string(), "--student-init",
                     (dir / "student" / "model.ckpt").string(), "--augmented", (dir / "dta" / "dta.jsonl").string(),
                     "--out-dir", (dir / "kd-matrix").string()})
                    .code == 0);
        CHECK(slurp(dir / "kd-matrix" / "model.ckpt") == slurp(dir / "kd" / "model.ckpt"));
    }
    SUBCASE("evaluate and significance") {
        REQUIRE(cli({"evaluate", "--checkpoint", (dir / "kd" / "model.ckpt").string(), "--data", corpus, "--split",
                     "test", "--out-dir", (dir / "eval").string()})
                    .code == 0);
        CHECK(slurp(dir / "eval" / "correctness" / "test.csv") == slurp(dir / "kd" / "correctness" / "test.csv"));
        REQUIRE(cli({"significance", "--a", (dir / "kd" / "correctness" / "test.csv").string(), "--b",
                     (dir / "student" / "correctness" / "test.csv").string(), "--resamples", "500", "--out-dir",
                     (dir / "sig").string()})
                    .code == 0);
        CHECK(slurp(dir / "sig" / "significance.json").find("p_value") != std::string::npos);
    }
    SUBCASE("nothing is written outside the output directory") {
        std::size_t before = 0, after = 0;
        for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) ++before;
        REQUIRE(cli({"evaluate", "--checkpoint", (dir / "kd" / "model.ckpt").string(), "--data", corpus,
                     "--out-dir", (dir / "eval2").string()})
                    .code == 0);
        for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it)
            if (it->path().string().rfind((dir / "eval2").string(), 0) != 0) ++after;
        CHECK(before == after);
    }
}
