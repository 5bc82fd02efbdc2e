#include "robustkd/cli.hpp"

#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "robustkd/augment.hpp"
#include "robustkd/data.hpp"
#include "robustkd/dmu.hpp"
#include "robustkd/eval.hpp"
#include "robustkd/suite.hpp"
#include "robustkd/synth.hpp"
#include "robustkd/trainer.hpp"

namespace rkd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log(const std::string& msg) { std::cerr << msg << '\n'; }

json read_json_config(const std::string& path) {
    if (path.empty()) return json::object();
    const auto text = read_text_file(path);
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config " + path + ": not valid JSON: " + e.what());
    }
}

[[noreturn]] void fail_config(const std::string& path, const std::vector<std::string>& errors) {
    std::string msg = "--config " + (path.empty() ? std::string("(defaults)") : path) + ": " +
                      std::to_string(errors.size()) + " error(s)";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string data;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
    cmd->add_option("--config", c.config, "JSON config file");
    cmd->add_option("--seed", c.seed, "Seed override");
    auto* out = cmd->add_option("--out-dir", c.out_dir, "Directory for all outputs");
    if (out_required) out->required();
}

Dataset load_corpus_flag(const std::string& dir, const char* flag = "--data") {
    if (dir.empty()) throw ConfigError(std::string(flag) + " is required");
    if (!fs::is_directory(dir)) throw ConfigError(std::string(flag) + " " + dir + ": not a corpus directory");
    return load_corpus_dir(dir);
}

ModelParams load_checkpoint_flag(const std::string& path, const char* flag) {
    if (!fs::exists(path)) throw ConfigError(std::string(flag) + " " + path + ": file not found");
    return load_checkpoint(path);
}

// ---------------------------------------------------------------------------

int cmd_synth_data(const Common& c) {
    std::vector<std::string> errors;
    auto cfg = parse_synth_config(read_json_config(c.config), errors);
    if (c.seed) cfg.seed = *c.seed;
    if (!errors.empty()) fail_config(c.config, errors);
    cfg.validate();
    auto ds = generate_synth_corpus(cfg);
    write_corpus_dir(ds, c.out_dir);
    log("wrote " + std::to_string(ds.size()) + " examples in " + std::to_string(ds.splits().size()) +
        " splits to " + c.out_dir);
    return 0;
}

struct GenFlags {
    bool mock = false;
    std::optional<std::size_t> n;
    std::string conjunctions;
};

std::unique_ptr<CompletionClient> make_client(const json& j, bool mock, std::vector<std::string>& errors,
                                              std::uint64_t seed) {
    // the mock world is the synthetic language; its settings live under "corpus"
    SynthConfig world;
    if (j.contains("corpus")) world = parse_synth_config(j["corpus"], errors);
    if (mock) {
        MockOptions mo;
        mo.seed = seed;
        if (j.contains("mock")) {
            const auto& m = j["mock"];
            mo.premise_reject_rate = m.value("premise_reject_rate", mo.premise_reject_rate);
            mo.second_sentence_rate = m.value("second_sentence_rate", mo.second_sentence_rate);
            mo.label_noise = m.value("label_noise", mo.label_noise);
            mo.rotate_noise = m.value("rotate_noise", mo.rotate_noise);
            mo.coherence_yes_rate = m.value("coherence_yes_rate", mo.coherence_yes_rate);
            mo.meaning_no_rate = m.value("meaning_no_rate", mo.meaning_no_rate);
            mo.seed = m.value("seed", seed);
        }
        return std::make_unique<MockCompletionClient>(world, mo);
    }
    if (!j.contains("endpoint") || !j["endpoint"].contains("base_url")) {
        errors.push_back("no completion endpoint configured ('endpoint.base_url'); pass --mock-llm for offline generation");
        return nullptr;
    }
    const auto& e = j["endpoint"];
    HttpClientOptions ho;
    ho.base_url = e.value("base_url", "");
    ho.model = e.value("model", "");
    ho.credential_env = e.value("credential_env", ho.credential_env);
    ho.max_parallel = e.value("max_parallel", ho.max_parallel);
    ho.attempts = e.value("attempts", ho.attempts);
    ho.backoff_ms = e.value("backoff_ms", ho.backoff_ms);
    ho.timeout_s = e.value("timeout_s", ho.timeout_s);
    return std::make_unique<HttpCompletionClient>(ho);
}

int finish_generation(const GenerationResult& gen, const Common& c, const std::string& name) {
    write_dataset(gen.to_dataset(name), fs::path(c.out_dir) / (name + ".jsonl"));
    write_text_file(fs::path(c.out_dir) / "generation_report.json", gen.report.to_json());
    log("generated " + std::to_string(gen.report.emitted) + " " + name + " examples from " +
        std::to_string(gen.report.requests) + " requests");
    if (!gen.report.failed_prompts.empty()) {
        log(std::to_string(gen.report.failed_prompts.size()) + " prompt(s) failed after retries; see generation_report.json");
        if (!gen.report.target_reached) return 2;
    }
    if (!gen.report.target_reached) log("warning: target count not reached");
    return 0;
}

int cmd_gen_dta(const Common& c, const GenFlags& g) {
    const json j = read_json_config(c.config);
    std::vector<std::string> errors;
    DtaOptions opts;
    opts.domains = j.value("domains", std::vector<std::string>{"travel"});
    opts.n_target = j.value("n", std::size_t{300});
    opts.seed = j.value("seed", std::uint64_t{0});
    opts.max_tokens = j.value("max_tokens", opts.max_tokens);
    opts.temperature = j.value("temperature", opts.temperature);
    if (g.n) opts.n_target = *g.n;
    if (c.seed) opts.seed = *c.seed;
    if (opts.n_target < 1) errors.push_back("'n' must be at least 1");
    for (const auto& d : opts.domains) {
        try {
            premise_prompt_texts(d);
        } catch (const ConfigError& e) {
            errors.push_back(e.what());
        }
    }
    auto client = make_client(j, g.mock, errors, opts.seed);
    if (!errors.empty()) fail_config(c.config, errors);

    ExampleBank bank;
    if (j.contains("bank")) bank = ExampleBank::load(j["bank"].get<std::string>());
    else if (!c.data.empty()) bank = ExampleBank::from_dataset(load_corpus_flag(c.data), "train", opts.seed);
    else bank = ExampleBank::builtin();

    return finish_generation(generate_dta(opts, *client, bank), c, "dta");
}

int cmd_gen_woa(const Common& c, const GenFlags& g) {
    const json j = read_json_config(c.config);
    std::vector<std::string> errors;
    WoaOptions opts;
    opts.n_target = j.value("n", std::size_t{100});
    opts.seed = j.value("seed", std::uint64_t{0});
    opts.domain = j.value("domain", opts.domain);
    if (g.n) opts.n_target = *g.n;
    if (c.seed) opts.seed = *c.seed;
    if (opts.n_target < 1) errors.push_back("'n' must be at least 1");
    auto client = make_client(j, g.mock, errors, opts.seed);
    if (!errors.empty()) fail_config(c.config, errors);
    std::string conj_path = g.conjunctions.empty() ? j.value("conjunctions", std::string{}) : g.conjunctions;
    const auto conjunctions = conj_path.empty() ? ConjunctionList::builtin() : ConjunctionList::load(conj_path);
    return finish_generation(generate_woa(opts, conjunctions, *client), c, "woa");
}

// ---------------------------------------------------------------------------

struct TrainFlags {
    std::vector<std::string> teachers;
    std::vector<std::string> predictions;
    std::vector<std::string> peers;
    std::vector<std::string> augmented;
    std::vector<std::string> train_splits;
    std::string student_init;
    std::string minority;
    bool print_config = false;
};

TrainConfig load_train_config(const Common& c, const TrainFlags& t) {
    std::vector<std::string> errors;
    auto cfg = parse_train_config(read_json_config(c.config), errors);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.data.empty()) cfg.data.corpus = c.data;
    for (const auto& a : t.augmented) cfg.data.augmented.push_back(a);
    check_train_config(cfg, errors);
    if (!errors.empty()) fail_config(c.config, errors);
    if (auto w = apply_exceptions(cfg); !w.empty()) log(w);
    return cfg;
}

std::vector<std::string> default_eval_splits(const TrainConfig& cfg, const Dataset& ds) {
    if (!cfg.data.eval_splits.empty()) return cfg.data.eval_splits;
    std::vector<std::string> out;
    for (const auto& [name, ids] : ds.splits())
        if (name != cfg.data.train_split && name != "pretrain" && name != "train-minority") out.push_back(name);
    return out;
}

void write_run_outputs(const fs::path& out, const ModelParams& model, RunRecord rec, const Dataset& ds,
                       const std::vector<std::string>& splits) {
    for (const auto& s : splits) {
        auto acc = accuracy(model, EncodedSplit::from(ds.subset(s), model.dim));
        rec.split_accuracy[s] = acc.value;
        write_text_file(out / "correctness" / (s + ".csv"), format_correctness(acc.correctness));
        log(s + " accuracy " + std::to_string(acc.value));
    }
    save_checkpoint(model, out / "model.ckpt");
    write_text_file(out / "run_record.json", record_to_json(rec) + "\n");
}

Dataset augmented_data(const TrainConfig& cfg) {
    Dataset aug;
    std::vector<std::string> ids;
    for (const auto& path : cfg.data.augmented) {
        if (!fs::exists(path)) throw ConfigError("augmented data " + path + ": file not found");
        const Dataset part = load_dataset(path);
        for (const auto& ex : part.examples()) {
            if (ex.gold) throw ValidationError("augmented example '" + ex.id + "' carries a gold label");
            ids.push_back(ex.id);
            aug.add(ex);
        }
    }
    aug.set_split("augmented", ids);
    return aug;
}

int cmd_train_teacher(const Common& c, const TrainFlags& t) {
    auto cfg = load_train_config(c, t);
    if (t.print_config) {
        write_text_file(fs::path(c.out_dir) / "config.json", to_json(cfg).dump(2) + "\n");
        log(to_json(cfg).dump(2));
        return 0;
    }
    const auto ds = load_corpus_flag(cfg.data.corpus);
    std::vector<std::string> ids;
    const auto splits = t.train_splits.empty() ? std::vector<std::string>{cfg.data.train_split} : t.train_splits;
    for (const auto& s : splits)
        for (const auto& id : ds.split_ids(s)) ids.push_back(id);
    const auto train = EncodedSplit::from(ds.subset(ids), cfg.model.dim);
    TrainHooks hooks;
    hooks.log = log;
    const auto model = train_supervised(cfg, train, {}, nullptr, hooks);

    // predictions over the corpus and any augmented data, for matrix-based distillation
    PredictionMatrix all = predict_matrix(model, EncodedSplit::from(ds, cfg.model.dim));
    if (!cfg.data.augmented.empty()) {
        auto aug = predict_matrix(model, EncodedSplit::from(augmented_data(cfg), cfg.model.dim));
        all.ids.insert(all.ids.end(), aug.ids.begin(), aug.ids.end());
        all.rows.insert(all.rows.end(), aug.rows.begin(), aug.rows.end());
    }
    write_predictions(all, fs::path(c.out_dir) / "predictions.csv");

    RunRecord rec;
    rec.method = "supervised";
    rec.seed = cfg.seed;
    rec.config = flatten_config(cfg);
    write_run_outputs(c.out_dir, model, rec, ds, default_eval_splits(cfg, ds));
    return 0;
}

int cmd_distill(const Common& c, const TrainFlags& t) {
    auto cfg = load_train_config(c, t);
    if (t.print_config) {
        write_text_file(fs::path(c.out_dir) / "config.json", to_json(cfg).dump(2) + "\n");
        log(to_json(cfg).dump(2));
        return 0;
    }
    if (t.teachers.empty() && t.predictions.empty())
        throw ConfigError("--teacher or --predictions is required (one per ensemble member)");
    if (!t.teachers.empty() && !t.predictions.empty())
        throw ConfigError("use either --teacher or --predictions, not both");

    const auto ds = load_corpus_flag(cfg.data.corpus);
    const auto train = EncodedSplit::from(ds.subset(cfg.data.train_split), cfg.model.dim);
    const auto dev = EncodedSplit::from(ds.subset(cfg.data.dev_split), cfg.model.dim);
    const auto aug = EncodedSplit::from(augmented_data(cfg), cfg.model.dim);
    const auto data = EncodedSplit::concat(train, aug);

    TrainHooks hooks;
    hooks.log = log;
    ModelParams student = t.student_init.empty() ? train_supervised(cfg, train, {}, nullptr, hooks)
                                                 : load_checkpoint_flag(t.student_init, "--student-init");
    if (student.dim != cfg.model.dim) throw ConfigError("--student-init: input dimension differs from model.dim");

    std::vector<ModelParams> teacher_models;
    std::vector<PredictionMatrix> matrices;
    std::vector<Probs> targets;
    std::vector<std::vector<Probs>> teacher_train_preds;
    if (!t.teachers.empty()) {
        for (const auto& p : t.teachers) teacher_models.push_back(load_checkpoint_flag(p, "--teacher"));
        std::vector<const ModelParams*> ptrs;
        for (const auto& m : teacher_models) ptrs.push_back(&m);
        targets = teacher_targets(ptrs, data, student.classes);
        teacher_train_preds.push_back(predict(teacher_models.front(), train));
    } else {
        for (const auto& p : t.predictions) {
            if (!fs::exists(p)) throw ConfigError("--predictions " + p + ": file not found");
            matrices.push_back(read_predictions(p));
        }
        std::vector<const PredictionMatrix*> ptrs;
        for (const auto& m : matrices) ptrs.push_back(&m);
        targets = teacher_targets(ptrs, data);
        std::vector<Probs> first;
        for (const auto& id : train.ids) first.push_back(matrices.front().row(id));
        teacher_train_preds.push_back(std::move(first));
    }

    std::map<std::string, std::size_t> factors;
    for (std::size_t i = 0; i < aug.size(); ++i)
        factors[aug.ids[i]] = aug.provenance[i] == Provenance::woa ? cfg.upsample.woa : cfg.upsample.dta;
    if (!t.minority.empty() || cfg.minority.enabled) {
        MinoritySet minority;
        if (!t.minority.empty()) {
            minority = read_minority_set(t.minority);
        } else if (cfg.minority.mode == MinorityMode::teacher) {
            minority = identify_minority(teacher_train_preds, train.ids, train.gold, MinorityMode::teacher,
                                         {t.teachers.empty() ? t.predictions.front() : t.teachers.front()});
        } else {
            std::vector<std::vector<Probs>> preds{predict(student, train)};
            std::vector<std::string> names{"student"};
            if (cfg.minority.mode == MinorityMode::ensemble_any) {
                for (const auto& p : t.peers) {
                    preds.push_back(predict(load_checkpoint_flag(p, "--peer"), train));
                    names.push_back(p);
                }
            }
            minority = identify_minority(preds, train.ids, train.gold,
                                         preds.size() > 1 ? MinorityMode::ensemble_any : MinorityMode::student, names);
        }
        write_minority_set(minority, fs::path(c.out_dir) / "minority.txt");
        log(std::to_string(minority.ids.size()) + " minority examples upsampled x" +
            std::to_string(cfg.upsample.minority));
        for (const auto& id : minority.ids) factors[id] = cfg.upsample.minority;
    }
    const auto manifest = build_manifest(data.ids, factors);

    DistillInputs in;
    in.data = &data;
    in.targets = std::move(targets);
    in.rows = manifest_rows(manifest, data);
    in.dev = &dev;
    auto res = distill(cfg, student, in, hooks);

    RunRecord rec;
    rec.method = "distill";
    rec.seed = cfg.seed;
    rec.dev_accuracy = res.dev_accuracy;
    rec.selected_epoch = res.selected_epoch;
    rec.config = flatten_config(cfg);
    write_run_outputs(c.out_dir, res.model, rec, ds, default_eval_splits(cfg, ds));
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, const std::vector<std::string>& splits_in) {
    const auto model = load_checkpoint_flag(checkpoint, "--checkpoint");
    const auto ds = load_corpus_flag(c.data);
    auto splits = splits_in;
    if (splits.empty())
        for (const auto& [name, _] : ds.splits())
            if (name != "pretrain" && name != "train-minority") splits.push_back(name);
    json metrics = json::object();
    for (const auto& s : splits) {
        if (!ds.has_split(s)) throw ConfigError("--split " + s + ": not in the corpus");
        auto acc = accuracy(model, EncodedSplit::from(ds.subset(s), model.dim));
        metrics[s] = acc.value;
        log(s + " accuracy " + std::to_string(acc.value));
        if (!c.out_dir.empty())
            write_text_file(fs::path(c.out_dir) / "correctness" / (s + ".csv"), format_correctness(acc.correctness));
    }
    if (!c.out_dir.empty()) write_text_file(fs::path(c.out_dir) / "metrics.json", metrics.dump(2) + "\n");
    return 0;
}

int cmd_significance(const Common& c, const std::string& a, const std::string& b, std::size_t resamples) {
    auto load = [](const std::string& path, const char* flag) {
        if (!fs::exists(path)) throw ConfigError(std::string(flag) + " " + path + ": file not found");
        return parse_correctness(read_text_file(path));
    };
    const auto ca = load(a, "--a");
    const auto cb = load(b, "--b");
    const auto r = bootstrap_pvalue(ca, cb, resamples, c.seed.value_or(0));
    json j = {{"a", a},
              {"b", b},
              {"mean_a", ca.mean()},
              {"mean_b", cb.mean()},
              {"mean_diff", r.mean_diff},
              {"p_value", r.p_value},
              {"p_display", format_p_value(r.p_value)},
              {"resamples", r.resamples},
              {"seed", r.seed}};
    log("mean diff " + std::to_string(r.mean_diff) + ", p = " + format_p_value(r.p_value));
    if (!c.out_dir.empty()) write_text_file(fs::path(c.out_dir) / "significance.json", j.dump(2) + "\n");
    return 0;
}

int cmd_run_suite(const Common& c) {
    if (c.config.empty()) throw ConfigError("--config is required");
    auto cfg = load_suite_config(c.config);
    if (c.seed) cfg.bootstrap_seed = *c.seed;
    auto res = run_suite(cfg, c.out_dir, log);
    log("\n" + res.summary.to_tsv());
    std::size_t failed = 0;
    for (const auto& r : res.records) failed += r.failed ? 1 : 0;
    if (failed) {
        log(std::to_string(failed) + " run(s) failed; see records.jsonl");
        return 2;
    }
    return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"Robust knowledge distillation toolkit"};
    app.require_subcommand(1);

    Common common;
    GenFlags gen;
    TrainFlags train;
    std::string checkpoint, corr_a, corr_b;
    std::vector<std::string> splits;
    std::size_t resamples = kDefaultResamples;

    auto* synth = app.add_subcommand("synth-data", "Generate the synthetic two-domain corpus");
    add_common(synth, common);

    auto* dta = app.add_subcommand("gen-dta", "Generate domain-targeted unlabelled pairs");
    add_common(dta, common);
    dta->add_option("--data", common.data, "Corpus directory supplying in-context demonstrations");
    dta->add_flag("--mock-llm", gen.mock, "Use the offline mock generator");
    dta->add_option("--n", gen.n, "Number of examples");

    auto* woa = app.add_subcommand("gen-woa", "Generate word-overlap unlabelled pairs");
    add_common(woa, common);
    woa->add_flag("--mock-llm", gen.mock, "Use the offline mock generator");
    woa->add_option("--n", gen.n, "Number of examples");
    woa->add_option("--conjunctions", gen.conjunctions, "File with 60 conjunctions, one per line");

    auto* teacher = app.add_subcommand("train-teacher", "Supervised fine-tuning of a model");
    add_common(teacher, common);
    teacher->add_option("--data", common.data, "Corpus directory");
    teacher->add_option("--train-split", train.train_splits, "Split(s) to train on (repeatable)");
    teacher->add_option("--augmented", train.augmented, "Generated data to include in predictions (repeatable)");
    teacher->add_flag("--print-config", train.print_config, "Validate and write the normalized config only");

    auto* dist = app.add_subcommand("distill", "Distil teachers into a student");
    add_common(dist, common);
    dist->add_option("--data", common.data, "Corpus directory");
    dist->add_option("--teacher", train.teachers, "Teacher checkpoint (repeatable for ensembles)");
    dist->add_option("--predictions", train.predictions, "Teacher prediction matrix (repeatable)");
    dist->add_option("--student-init", train.student_init, "Supervised student checkpoint");
    dist->add_option("--augmented", train.augmented, "Generated unlabelled data (repeatable)");
    dist->add_option("--minority", train.minority, "Minority id file to upsample");
    dist->add_option("--peer", train.peers, "Peer checkpoint for ensemble minority identification (repeatable)");
    dist->add_flag("--print-config", train.print_config, "Validate and write the normalized config only");

    auto* eval = app.add_subcommand("evaluate", "Accuracy of a checkpoint per split");
    add_common(eval, common, false);
    eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    eval->add_option("--data", common.data, "Corpus directory")->required();
    eval->add_option("--split", splits, "Split to evaluate (repeatable; default all)");

    auto* sig = app.add_subcommand("significance", "Paired bootstrap test between two correctness files");
    add_common(sig, common, false);
    sig->add_option("--a", corr_a, "Correctness file of system A")->required();
    sig->add_option("--b", corr_b, "Correctness file of system B")->required();
    sig->add_option("--resamples", resamples, "Bootstrap resamples");

    auto* suite = app.add_subcommand("run-suite", "Run every configured method over every seed");
    add_common(suite, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) return cmd_synth_data(common);
        if (dta->parsed()) return cmd_gen_dta(common, gen);
        if (woa->parsed()) return cmd_gen_woa(common, gen);
        if (teacher->parsed()) return cmd_train_teacher(common, train);
        if (dist->parsed()) return cmd_distill(common, train);
        if (eval->parsed()) return cmd_evaluate(common, checkpoint, splits);
        if (sig->parsed()) return cmd_significance(common, corr_a, corr_b, resamples);
        if (suite->parsed()) return cmd_run_suite(common);
    } catch (const TrainingError& e) {
        log(std::string("training failed: ") + e.what());
        return 2;
    } catch (const ClientError& e) {
        log(std::string("completion client failed: ") + e.what());
        return 2;
    } catch (const ParseError& e) {
        log(std::string("parse error: ") + e.what());
        return 1;
    } catch (const ContractError& e) {
        log(std::string("error: ") + e.what());
        return 1;
    } catch (const ConfigError& e) {
        log(std::string("error: ") + e.what());
        return 1;
    } catch (const ValidationError& e) {
        log(std::string("invalid data: ") + e.what());
        return 1;
    } catch (const IntegrityError& e) {
        log(std::string("invalid data: ") + e.what());
        return 1;
    } catch (const std::exception& e) {
        log(std::string("failure: ") + e.what());
        return 2;
    }
    return 1;
}

}  // namespace rkd::cli
