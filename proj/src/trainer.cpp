#include "robustkd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "robustkd/data.hpp"
#include "robustkd/distill.hpp"
#include "robustkd/eval.hpp"

#include "config_reader.hpp"

namespace rkd {

using detail::Reader;
using nlohmann::json;

std::string_view to_string(DistillOn d) { return d == DistillOn::all ? "all" : "augmented_only"; }
std::string_view to_string(LossReduction r) { return r == LossReduction::sum ? "sum" : "mean"; }

TrainConfig parse_train_config(const json& j, std::vector<std::string>& errors) {
    TrainConfig cfg;
    Reader r(j, "", errors);
    r.get("seed", cfg.seed);
    r.get("batch_size", cfg.batch_size);
    r.child("model", [&](Reader& m) {
        m.get("dim", cfg.model.dim);
        m.get("hidden", cfg.model.hidden);
    });
    r.child("supervised", [&](Reader& s) {
        s.get("epochs", cfg.supervised.epochs);
        s.get("peak_lr", cfg.supervised.peak_lr);
        std::string red(to_string(cfg.supervised_reduction));
        s.get("loss_reduction", red);
        if (red == "sum") cfg.supervised_reduction = LossReduction::sum;
        else if (red == "mean") cfg.supervised_reduction = LossReduction::mean;
        else s.error("'supervised.loss_reduction' must be 'sum' or 'mean'");
    });
    r.child("distill", [&](Reader& d) {
        d.get("epochs", cfg.distill.epochs);
        d.get("peak_lr", cfg.distill.peak_lr);
        d.get("patience", cfg.distill.patience);
        d.get("early_stopping", cfg.distill.early_stopping);
        std::string red(to_string(cfg.distill.reduction));
        d.get("loss_reduction", red);
        if (red == "sum") cfg.distill.reduction = LossReduction::sum;
        else if (red == "mean") cfg.distill.reduction = LossReduction::mean;
        else d.error("'distill.loss_reduction' must be 'sum' or 'mean'");
    });
    r.get("gate_enabled", cfg.gate_enabled);

    std::string smoothing = "off";
    double power = 0.9;
    r.child("smoothing", [&](Reader& s) {
        s.get("mode", smoothing);
        s.get("power", power);
    });
    if (smoothing == "power") cfg.smoothing = power;
    else if (smoothing != "off") errors.push_back("'smoothing.mode' must be 'off' or 'power'");

    std::string on(to_string(cfg.distill_on));
    r.get("distill_on", on);
    if (on == "all") cfg.distill_on = DistillOn::all;
    else if (on == "augmented_only") cfg.distill_on = DistillOn::augmented_only;
    else errors.push_back("'distill_on' must be 'all' or 'augmented_only'");

    r.child("upsample", [&](Reader& u) {
        u.get("minority", cfg.upsample.minority);
        u.get("dta", cfg.upsample.dta);
        u.get("woa", cfg.upsample.woa);
    });
    r.child("minority", [&](Reader& m) {
        m.get("enabled", cfg.minority.enabled);
        std::string mode(to_string(cfg.minority.mode));
        m.get("mode", mode);
        try {
            cfg.minority.mode = minority_mode_from_string(mode);
        } catch (const ConfigError& e) {
            m.error(std::string("'minority.mode': ") + e.what());
        }
        m.get("ensemble_size", cfg.minority.ensemble_size);
    });
    r.child("exceptions", [&](Reader& e) {
        e.get("self_distillation_ensemble", cfg.exceptions.self_distillation_ensemble);
        e.get("adversarial_eval", cfg.exceptions.adversarial_eval);
        e.get("cross_architecture_dmu", cfg.exceptions.cross_architecture_dmu);
    });
    r.child("data", [&](Reader& d) {
        d.get("corpus", cfg.data.corpus);
        d.get("augmented", cfg.data.augmented);
        d.get("train_split", cfg.data.train_split);
        d.get("dev_split", cfg.data.dev_split);
        d.get("eval_splits", cfg.data.eval_splits);
    });
    if (cfg.smoothing && !(*cfg.smoothing > 0.0)) errors.push_back("'smoothing.power' must be positive");
    return cfg;
}

void check_train_config(const TrainConfig& cfg, std::vector<std::string>& errors) {
    if (cfg.batch_size < 1) errors.push_back("'batch_size' must be at least 1");
    if (cfg.model.dim < 2) errors.push_back("'model.dim' must be at least 2");
    if (cfg.model.hidden < 1) errors.push_back("'model.hidden' must be at least 1");
    if (cfg.supervised.epochs < 1) errors.push_back("'supervised.epochs' must be at least 1");
    if (!(cfg.supervised.peak_lr > 0.0)) errors.push_back("'supervised.peak_lr' must be positive");
    if (cfg.distill.epochs < 1) errors.push_back("'distill.epochs' must be at least 1");
    if (!(cfg.distill.peak_lr > 0.0)) errors.push_back("'distill.peak_lr' must be positive");
    if (cfg.distill.early_stopping && cfg.distill.patience < 1)
        errors.push_back("'distill.patience' must be at least 1 when 'distill.early_stopping' is on");
    if (cfg.upsample.minority < 1 || cfg.upsample.dta < 1 || cfg.upsample.woa < 1)
        errors.push_back("'upsample' factors must be at least 1");
    if (cfg.minority.ensemble_size < 1) errors.push_back("'minority.ensemble_size' must be at least 1");
    if (cfg.distill_on == DistillOn::augmented_only && cfg.data.augmented.empty())
        errors.push_back("'distill_on' = augmented_only needs generated data in 'data.augmented'");
}

json to_json(const TrainConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["batch_size"] = cfg.batch_size;
    j["model"] = {{"dim", cfg.model.dim}, {"hidden", cfg.model.hidden}};
    j["supervised"] = {{"epochs", cfg.supervised.epochs},
                       {"peak_lr", cfg.supervised.peak_lr},
                       {"loss_reduction", to_string(cfg.supervised_reduction)}};
    j["distill"] = {{"epochs", cfg.distill.epochs},
                    {"peak_lr", cfg.distill.peak_lr},
                    {"patience", cfg.distill.patience},
                    {"early_stopping", cfg.distill.early_stopping},
                    {"loss_reduction", to_string(cfg.distill.reduction)}};
    j["gate_enabled"] = cfg.gate_enabled;
    j["smoothing"] = {{"mode", cfg.smoothing ? "power" : "off"}, {"power", cfg.smoothing.value_or(0.9)}};
    j["distill_on"] = to_string(cfg.distill_on);
    j["upsample"] = {{"minority", cfg.upsample.minority}, {"dta", cfg.upsample.dta}, {"woa", cfg.upsample.woa}};
    j["minority"] = {{"enabled", cfg.minority.enabled},
                     {"mode", to_string(cfg.minority.mode)},
                     {"ensemble_size", cfg.minority.ensemble_size}};
    j["exceptions"] = {{"self_distillation_ensemble", cfg.exceptions.self_distillation_ensemble},
                       {"adversarial_eval", cfg.exceptions.adversarial_eval},
                       {"cross_architecture_dmu", cfg.exceptions.cross_architecture_dmu}};
    j["data"] = {{"corpus", cfg.data.corpus},
                 {"augmented", cfg.data.augmented},
                 {"train_split", cfg.data.train_split},
                 {"dev_split", cfg.data.dev_split},
                 {"eval_splits", cfg.data.eval_splits}};
    return j;
}

std::map<std::string, std::string> flatten_config(const TrainConfig& cfg) {
    std::map<std::string, std::string> out;
    const json flat = to_json(cfg).flatten();
    for (const auto& [k, v] : flat.items()) out[k] = v.is_string() ? v.get<std::string>() : v.dump();
    return out;
}

ConfigValidation validate_config_text(std::string_view text) {
    ConfigValidation out;
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return out;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        out.errors.push_back(std::string("config is not valid JSON: ") + e.what());
        return out;
    }
    out.config = parse_train_config(j, out.errors);
    check_train_config(out.config, out.errors);
    return out;
}

ConfigValidation validate_config(const std::filesystem::path& path) {
    return validate_config_text(read_text_file(path));
}

std::string apply_exceptions(TrainConfig& cfg) {
    if (!cfg.exceptions.any() || !cfg.distill.early_stopping) return {};
    cfg.distill.early_stopping = false;
    std::string which;
    if (cfg.exceptions.self_distillation_ensemble) which += " self_distillation_ensemble";
    if (cfg.exceptions.adversarial_eval) which += " adversarial_eval";
    if (cfg.exceptions.cross_architecture_dmu) which += " cross_architecture_dmu";
    return "warning: early stopping disabled for exception setting(s):" + which;
}

ModelParams init_model(const TrainConfig& cfg, std::uint64_t seed) {
    return ModelParams::init(cfg.model.dim, cfg.model.hidden, kNumClasses, seed);
}

std::size_t total_steps(std::size_t epochs, std::size_t rows, std::size_t batch_size) {
    if (batch_size == 0) throw ContractError("batch size must be positive");
    return epochs * ((rows + batch_size - 1) / batch_size);
}

namespace {

std::vector<std::size_t> default_rows(const EncodedSplit& data, const std::vector<std::size_t>& rows) {
    if (!rows.empty()) {
        for (auto r : rows)
            if (r >= data.size()) throw ContractError("manifest row out of range");
        return rows;
    }
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

void log_to(const TrainHooks& hooks, const std::string& msg) {
    if (hooks.log) hooks.log(msg);
}

}  // namespace

ModelParams train_supervised(const TrainConfig& cfg, const EncodedSplit& data, const std::vector<std::size_t>& rows_in,
                             const ModelParams* init, const TrainHooks& hooks) {
    auto rows = default_rows(data, rows_in);
    for (auto r : rows)
        if (!data.gold[r]) throw ContractError("supervised training row '" + data.ids[r] + "' has no gold label");
    const std::size_t T = total_steps(cfg.supervised.epochs, rows.size(), cfg.batch_size);
    if (T == 0) throw ContractError("supervised phase has 0 training steps");
    if (!(cfg.supervised.peak_lr >= 0.0)) throw ContractError("learning rate must be non-negative");

    ModelParams model = init ? *init : init_model(cfg, cfg.seed);
    if (!data.features.empty() && data.features[0].dim != model.dim)
        throw ContractError("feature dimension does not match the model");
    const LRSchedule sched{cfg.supervised.peak_lr, T};
    Rng rng(derive_seed(cfg.seed, 0x5157u));
    Activations act;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.supervised.epochs; ++epoch) {
        rng.shuffle(rows);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < rows.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(rows.size(), start + cfg.batch_size);
            const double scale = cfg.supervised_reduction == LossReduction::mean ? 1.0 / double(end - start) : 1.0;
            Gradient grad = Gradient::zeros_like(model);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const auto r = rows[i];
                forward(model, data.features[r], act);
                auto lg = cross_entropy(act.probs, *data.gold[r]);
                batch_loss += lg.loss;
                backward_into(model, data.features[r], act, lg.dl_dp, scale, grad);
            }
            if (!std::isfinite(batch_loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step + 1));
            sgd_step_inplace(model, grad, lr_at(sched, ++step));
            epoch_loss += batch_loss;
        }
        std::ostringstream os;
        os << "supervised epoch " << epoch << "/" << cfg.supervised.epochs
           << " mean loss " << epoch_loss / double(rows.size());
        log_to(hooks, os.str());
    }
    if (!model.all_finite()) throw TrainingError("non-finite parameters after supervised training");
    return model;
}

std::vector<Probs> teacher_targets(const std::vector<const ModelParams*>& teachers, const EncodedSplit& data,
                                   std::size_t student_classes) {
    if (teachers.empty()) throw ContractError("at least one teacher is required");
    std::vector<std::vector<Probs>> preds;
    for (const auto* t : teachers) {
        if (t->classes != student_classes)
            throw ContractError("teacher has " + std::to_string(t->classes) + " classes, student has " +
                                std::to_string(student_classes));
        preds.push_back(predict(*t, data));
    }
    std::vector<Probs> out(data.size());
    std::vector<Probs> qs(teachers.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t t = 0; t < teachers.size(); ++t) qs[t] = preds[t][i];
        out[i] = ensemble_target(qs);
    }
    return out;
}

std::vector<Probs> teacher_targets(const std::vector<const PredictionMatrix*>& teachers, const EncodedSplit& data) {
    if (teachers.empty()) throw ContractError("at least one teacher is required");
    std::vector<Probs> out(data.size());
    std::vector<Probs> qs(teachers.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t t = 0; t < teachers.size(); ++t) {
            qs[t] = teachers[t]->row(data.ids[i]);
            if (qs[t].size() != kNumClasses)
                throw ContractError("teacher prediction for '" + data.ids[i] + "' has " +
                                    std::to_string(qs[t].size()) + " classes");
        }
        out[i] = ensemble_target(qs);
    }
    return out;
}

DistillResult distill(const TrainConfig& cfg, const ModelParams& student_init, const DistillInputs& in,
                      const TrainHooks& hooks) {
    if (!in.data) throw ContractError("distillation needs data");
    const EncodedSplit& data = *in.data;
    if (in.targets.size() != data.size()) throw ContractError("one teacher target per row is required");
    for (const auto& q : in.targets)
        if (q.size() != student_init.classes) throw ContractError("teacher and student class counts differ");
    const bool early = cfg.distill.early_stopping;
    if (early && !in.dev) throw ContractError("early stopping needs a dev split");
    if (early && cfg.distill.patience < 1) throw ContractError("patience must be at least 1");

    auto rows = default_rows(data, in.rows);
    const std::size_t T = total_steps(cfg.distill.epochs, rows.size(), cfg.batch_size);
    if (T == 0) throw ContractError("distillation phase has 0 training steps");
    const LRSchedule sched{cfg.distill.peak_lr, T};

    DistillResult res;
    res.model = student_init;
    ModelParams& model = res.model;
    ModelParams best = model;
    double best_acc = -1.0;
    std::size_t best_epoch = 0;

    std::vector<Probs> targets = in.targets;
    if (cfg.smoothing)
        for (auto& q : targets) q = smooth_teacher(q, *cfg.smoothing);

    Rng rng(derive_seed(cfg.seed, 0xd157u));
    Activations act;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.distill.epochs; ++epoch) {
        rng.shuffle(rows);
        std::size_t in_epoch = 0, out_epoch = 0;
        for (std::size_t start = 0; start < rows.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(rows.size(), start + cfg.batch_size);
            const double scale = cfg.distill.reduction == LossReduction::mean ? 1.0 / double(end - start) : 1.0;
            Gradient grad = Gradient::zeros_like(model);
            TrainHooks::BatchStats stats;
            stats.epoch = epoch;
            stats.step = step + 1;
            for (std::size_t i = start; i < end; ++i) {
                const auto r = rows[i];
                const bool labelled = data.gold[r].has_value();
                if (labelled) ++stats.labelled;
                else ++stats.unlabelled;
                if (labelled && cfg.distill_on == DistillOn::augmented_only) continue;
                forward(model, data.features[r], act);
                if (labelled && cfg.gate_enabled) {
                    // the gate reads the raw teacher distribution, before any smoothing
                    if (!gate(*data.gold[r], act.probs, in.targets[r]).include) {
                        ++stats.gated_out;
                        continue;
                    }
                }
                if (labelled) ++stats.gated_in;
                auto lg = sq_distill_loss(act.probs, targets[r]);
                stats.loss += lg.loss;
                backward_into(model, data.features[r], act, lg.dl_dp, scale, grad);
            }
            if (!std::isfinite(stats.loss))
                throw TrainingError("non-finite distillation loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(stats.step));
            sgd_step_inplace(model, grad, lr_at(sched, ++step));
            in_epoch += stats.gated_in;
            out_epoch += stats.gated_out;
            if (hooks.on_batch) hooks.on_batch(stats);
        }
        res.gated_in += in_epoch;
        res.gated_out += out_epoch;
        res.epochs_run = epoch;

        std::ostringstream os;
        os << "distill epoch " << epoch << "/" << cfg.distill.epochs << " gate kept " << in_epoch << " dropped "
           << out_epoch;
        if (in.dev) {
            const double acc = accuracy(model, *in.dev).value;
            res.dev_accuracy.push_back(acc);
            os << " dev acc " << acc;
            if (acc > best_acc) {
                best_acc = acc;
                best_epoch = epoch;
                if (early) best = model;
            }
        }
        log_to(hooks, os.str());
        if (early && epoch - best_epoch >= cfg.distill.patience) {
            res.stopped_early = epoch < cfg.distill.epochs;
            if (res.stopped_early) log_to(hooks, "early stopping after epoch " + std::to_string(epoch));
            break;
        }
    }
    if (early) {
        res.model = std::move(best);
        res.selected_epoch = static_cast<int>(best_epoch);
    } else {
        res.selected_epoch = static_cast<int>(res.epochs_run);
    }
    if (!res.model.all_finite()) throw TrainingError("non-finite parameters after distillation");
    return res;
}

std::vector<std::size_t> manifest_rows(const TrainingManifest& m, const EncodedSplit& data) {
    auto idx = data.index();
    std::vector<std::size_t> rows;
    rows.reserve(m.order.size());
    for (const auto& id : m.order) {
        auto it = idx.find(id);
        if (it == idx.end()) throw ContractError("manifest id '" + id + "' is not in the training data");
        rows.push_back(it->second);
    }
    return rows;
}

}  // namespace rkd
