#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustkd/augment.hpp"
#include "robustkd/eval.hpp"
#include "robustkd/synth.hpp"
#include "robustkd/trainer.hpp"

namespace rkd {

enum class MethodKind {
    supervised,    // the supervised-phase student itself
    distill,       // supervised student, then distillation
    jtt,           // teacher-identified upsampling during fine-tuning, no distillation
    labelled_aug,  // fine-tuning on train plus generated data with conditioned labels
};

std::string_view to_string(MethodKind k);

struct MethodSpec {
    std::string name;
    MethodKind kind = MethodKind::distill;
    std::size_t teachers = 1;
    std::vector<std::string> augment;    // subset of {"dta", "woa"}
    std::optional<MinorityMode> dmu;     // minority upsampling during distillation
    nlohmann::json overrides = nlohmann::json::object();  // merged into the student config
};

struct SuiteConfig {
    SynthConfig corpus;
    std::string corpus_dir;  // load instead of generating when set
    std::vector<std::uint64_t> seeds;

    nlohmann::json student = nlohmann::json::object();
    nlohmann::json teacher = nlohmann::json::object();
    std::size_t teacher_pool = 8;
    std::uint64_t teacher_seed = 1000;
    std::vector<std::string> teacher_splits = {"pretrain", "train"};

    DtaOptions dta;
    std::string dta_path;  // load generated DTA data instead of generating
    WoaOptions woa;
    MockOptions mock;

    std::vector<MethodSpec> methods;
    std::vector<std::string> eval_splits = {"test", "test-hard", "ood-target"};
    std::string baseline = "kd";
    std::size_t resamples = kDefaultResamples;
    std::uint64_t bootstrap_seed = 0;
};

/// Corpus generator settings from a JSON object of SynthConfig fields.
SynthConfig parse_synth_config(const nlohmann::json& j, std::vector<std::string>& errors);

/// Reads a suite config; all problems are collected into `errors`.
SuiteConfig parse_suite_config(const nlohmann::json& j, std::vector<std::string>& errors);
SuiteConfig load_suite_config(const std::filesystem::path& path);

struct SuiteResult {
    std::vector<RunRecord> records;
    SummaryTable summary;
    GenerationReport dta_report;
    GenerationReport woa_report;
};

/// Trains the teacher pool once, then every method at every seed. A failing
/// run is recorded and the suite moves on. Writes outputs when `out_dir` is
/// non-empty.
SuiteResult run_suite(const SuiteConfig& cfg, const std::filesystem::path& out_dir = {},
                      const std::function<void(const std::string&)>& log = {});

/// `id,correct` lines with 0/1 values.
std::string format_correctness(const CorrectnessVector& c);
CorrectnessVector parse_correctness(std::string_view text);

std::string record_to_json(const RunRecord& r);

}  // namespace rkd
