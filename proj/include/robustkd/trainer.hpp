#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustkd/common.hpp"
#include "robustkd/dmu.hpp"
#include "robustkd/encoded.hpp"
#include "robustkd/tinynet.hpp"

namespace rkd {

enum class DistillOn { all, augmented_only };
enum class LossReduction { sum, mean };

std::string_view to_string(DistillOn d);
std::string_view to_string(LossReduction r);

struct PhaseConfig {
    std::size_t epochs = 0;
    double peak_lr = 0.0;
};

struct TrainConfig {
    std::uint64_t seed = 0;
    std::size_t batch_size = 32;

    struct Model {
        std::size_t dim = kDefaultDim;
        std::size_t hidden = kDefaultHidden;
    } model;

    PhaseConfig supervised{2, 1e-5};
    LossReduction supervised_reduction = LossReduction::mean;

    struct Distill {
        std::size_t epochs = 10;
        double peak_lr = 1e-6;
        std::size_t patience = 5;
        bool early_stopping = true;
        LossReduction reduction = LossReduction::sum;
    } distill;

    bool gate_enabled = true;
    std::optional<double> smoothing;  // power applied to teacher targets; nullopt = off
    DistillOn distill_on = DistillOn::all;

    struct Upsample {
        std::size_t minority = 6;
        std::size_t dta = 1;
        std::size_t woa = 10;
    } upsample;

    struct Minority {
        bool enabled = false;
        MinorityMode mode = MinorityMode::student;
        std::size_t ensemble_size = 8;
    } minority;

    // Settings under which epoch selection is not used.
    struct Exceptions {
        bool self_distillation_ensemble = false;
        bool adversarial_eval = false;
        bool cross_architecture_dmu = false;
        bool any() const { return self_distillation_ensemble || adversarial_eval || cross_architecture_dmu; }
    } exceptions;

    struct Data {
        std::string corpus;                  // corpus directory
        std::vector<std::string> augmented;  // dataset files with generated examples
        std::string train_split = "train";
        std::string dev_split = "dev";
        std::vector<std::string> eval_splits;
    } data;
};

/// Reads a config tree on top of the defaults. Every problem found is
/// appended to `errors`; the returned config holds whatever parsed.
TrainConfig parse_train_config(const nlohmann::json& j, std::vector<std::string>& errors);
/// Cross-field checks on a fully parsed config.
void check_train_config(const TrainConfig& cfg, std::vector<std::string>& errors);
nlohmann::json to_json(const TrainConfig& cfg);
/// Dotted-path view of to_json, for run records.
std::map<std::string, std::string> flatten_config(const TrainConfig& cfg);

struct ConfigValidation {
    TrainConfig config;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

/// Empty file means all defaults. Unreadable file: ConfigError.
ConfigValidation validate_config(const std::filesystem::path& path);
ConfigValidation validate_config_text(std::string_view text);

/// Forces early stopping off when an exception flag is set; returns the
/// warning text, or empty when nothing changed.
std::string apply_exceptions(TrainConfig& cfg);

/// Hooks for observing training; all optional.
struct TrainHooks {
    std::function<void(const std::string&)> log;
    struct BatchStats {
        std::size_t epoch = 0;
        std::size_t step = 0;
        std::size_t labelled = 0;
        std::size_t gated_in = 0;
        std::size_t gated_out = 0;
        std::size_t unlabelled = 0;
        double loss = 0.0;
    };
    std::function<void(const BatchStats&)> on_batch;
};

ModelParams init_model(const TrainConfig& cfg, std::uint64_t seed);

/// Total optimizer steps for `epochs` passes over `rows` examples.
std::size_t total_steps(std::size_t epochs, std::size_t rows, std::size_t batch_size);

/// Cross-entropy fine-tuning. `rows` lists the row indices visited each
/// epoch (repeats allowed); empty means every row once. Starts from `init`
/// or from a fresh model seeded by cfg.seed.
ModelParams train_supervised(const TrainConfig& cfg, const EncodedSplit& data,
                             const std::vector<std::size_t>& rows = {},
                             const ModelParams* init = nullptr, const TrainHooks& hooks = {});

/// Per-row ensemble-averaged teacher distributions.
std::vector<Probs> teacher_targets(const std::vector<const ModelParams*>& teachers, const EncodedSplit& data,
                                   std::size_t student_classes = kNumClasses);
std::vector<Probs> teacher_targets(const std::vector<const PredictionMatrix*>& teachers,
                                   const EncodedSplit& data);

struct DistillInputs {
    const EncodedSplit* data = nullptr;  // labelled and unlabelled rows together
    std::vector<Probs> targets;          // one unsmoothed teacher target per row
    std::vector<std::size_t> rows;       // manifest as row indices; empty = every row once
    const EncodedSplit* dev = nullptr;   // required when early stopping is on
};

struct DistillResult {
    ModelParams model;
    std::vector<double> dev_accuracy;  // one per completed epoch
    int selected_epoch = -1;           // 1-based
    std::size_t epochs_run = 0;
    bool stopped_early = false;
    std::size_t gated_in = 0;
    std::size_t gated_out = 0;
};

DistillResult distill(const TrainConfig& cfg, const ModelParams& student_init, const DistillInputs& in,
                      const TrainHooks& hooks = {});

/// Row indices for a manifest over `data`; every manifest id must exist.
std::vector<std::size_t> manifest_rows(const TrainingManifest& m, const EncodedSplit& data);

}  // namespace rkd
