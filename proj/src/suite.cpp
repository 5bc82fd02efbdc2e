#include "robustkd/suite.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "robustkd/data.hpp"
#include "robustkd/distill.hpp"
#include "robustkd/dmu.hpp"

#include "config_reader.hpp"

namespace rkd {

using detail::Reader;
using nlohmann::json;

std::string_view to_string(MethodKind k) {
    switch (k) {
        case MethodKind::supervised: return "supervised";
        case MethodKind::distill: return "distill";
        case MethodKind::jtt: return "jtt";
        case MethodKind::labelled_aug: return "labelled_aug";
    }
    return "distill";
}

namespace {

void read_synth(Reader& r, SynthConfig& c) {
    r.get("seed", c.seed);
    r.get("n_train", c.n_train);
    r.get("n_dev", c.n_dev);
    r.get("n_test", c.n_test);
    r.get("n_test_hard", c.n_test_hard);
    r.get("n_ood_target", c.n_ood_target);
    r.get("n_pretrain_per_domain", c.n_pretrain_per_domain);
    r.get("vocab_source", c.vocab_source);
    r.get("vocab_target", c.vocab_target);
    r.get("source_domain", c.source_domain);
    r.get("target_domain", c.target_domain);
    r.get("overlap_bias", c.overlap_bias);
    r.get("minority_rate", c.minority_rate);
    r.get("cue_reliability", c.cue_reliability);
    r.get("cues_per_class", c.cues_per_class);
    r.get("shared_cue_rate", c.shared_cue_rate);
    r.get("shared_cues_per_class", c.shared_cues_per_class);
    r.get("premise_length", c.premise_length);
    r.get("hypothesis_body", c.hypothesis_body);
}

}  // namespace

SynthConfig parse_synth_config(const json& j, std::vector<std::string>& errors) {
    SynthConfig c;
    Reader r(j, "corpus", errors);
    read_synth(r, c);
    return c;
}

namespace {

std::optional<MethodKind> method_kind_from(const std::string& s) {
    for (auto k : {MethodKind::supervised, MethodKind::distill, MethodKind::jtt, MethodKind::labelled_aug})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::vector<std::uint64_t> read_seeds(const json& j, std::vector<std::string>& errors) {
    std::vector<std::uint64_t> seeds;
    if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number_unsigned()) {
                errors.push_back("'seeds' entries must be non-negative integers");
                return {};
            }
            seeds.push_back(v.get<std::uint64_t>());
        }
    } else if (j.is_object()) {
        std::uint64_t start = 1;
        std::size_t count = 10;
        Reader r(j, "seeds", errors);
        r.get("start", start);
        r.get("count", count);
        for (std::size_t i = 0; i < count; ++i) seeds.push_back(start + i);
    } else {
        errors.push_back("'seeds' must be a list or {\"start\", \"count\"}");
    }
    return seeds;
}

}  // namespace

SuiteConfig parse_suite_config(const json& j, std::vector<std::string>& errors) {
    SuiteConfig cfg;
    Reader r(j, "", errors);
    r.child("corpus", [&](Reader& c) { read_synth(c, cfg.corpus); });
    r.get("corpus_dir", cfg.corpus_dir);
    if (const auto* s = r.raw("seeds")) cfg.seeds = read_seeds(*s, errors);
    else for (std::uint64_t s = 1; s <= 10; ++s) cfg.seeds.push_back(s);

    if (const auto* s = r.raw("student")) cfg.student = *s;
    if (const auto* t = r.raw("teacher")) cfg.teacher = *t;
    r.get("teacher_pool", cfg.teacher_pool);
    r.get("teacher_seed", cfg.teacher_seed);
    r.get("teacher_splits", cfg.teacher_splits);

    cfg.dta.domains = {"travel"};
    cfg.dta.n_target = 3000;
    cfg.dta.seed = 17;
    r.child("dta", [&](Reader& d) {
        d.get("domains", cfg.dta.domains);
        d.get("n", cfg.dta.n_target);
        d.get("seed", cfg.dta.seed);
        d.get("path", cfg.dta_path);
        d.get("max_tokens", cfg.dta.max_tokens);
        d.get("temperature", cfg.dta.temperature);
    });
    cfg.woa.n_target = 500;
    cfg.woa.seed = 23;
    r.child("woa", [&](Reader& w) {
        w.get("n", cfg.woa.n_target);
        w.get("seed", cfg.woa.seed);
    });
    r.child("mock", [&](Reader& m) {
        m.get("seed", cfg.mock.seed);
        m.get("premise_reject_rate", cfg.mock.premise_reject_rate);
        m.get("second_sentence_rate", cfg.mock.second_sentence_rate);
        m.get("label_noise", cfg.mock.label_noise);
        m.get("rotate_noise", cfg.mock.rotate_noise);
        m.get("coherence_yes_rate", cfg.mock.coherence_yes_rate);
        m.get("meaning_no_rate", cfg.mock.meaning_no_rate);
    });

    if (const auto* ms = r.raw("methods")) {
        if (!ms->is_array()) errors.push_back("'methods' must be a list");
        std::size_t i = 0;
        for (const auto& m : ms->is_array() ? *ms : json::array()) {
            MethodSpec spec;
            Reader mr(m, "methods[" + std::to_string(i++) + "]", errors);
            mr.get("name", spec.name);
            std::string kind = "distill";
            mr.get("kind", kind);
            if (auto k = method_kind_from(kind)) spec.kind = *k;
            else mr.error("method '" + spec.name + "': unknown kind '" + kind + "'");
            mr.get("teachers", spec.teachers);
            mr.get("augment", spec.augment);
            std::string dmu;
            mr.get("dmu", dmu);
            if (!dmu.empty()) {
                try {
                    spec.dmu = minority_mode_from_string(dmu);
                } catch (const ConfigError& e) {
                    mr.error("method '" + spec.name + "': " + e.what());
                }
            }
            if (const auto* o = mr.raw("overrides")) spec.overrides = *o;
            if (spec.name.empty()) mr.error("every method needs a name");
            for (const auto& a : spec.augment)
                if (a != "dta" && a != "woa") mr.error("method '" + spec.name + "': unknown augmentation '" + a + "'");
            if (spec.teachers < 1) mr.error("method '" + spec.name + "': teachers must be at least 1");
            cfg.methods.push_back(std::move(spec));
        }
    }
    r.get("eval_splits", cfg.eval_splits);
    r.get("baseline", cfg.baseline);
    r.child("bootstrap", [&](Reader& b) {
        b.get("resamples", cfg.resamples);
        b.get("seed", cfg.bootstrap_seed);
    });

    // cross-field checks
    if (cfg.seeds.empty()) errors.push_back("'seeds' must not be empty");
    std::vector<std::uint64_t> sorted = cfg.seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) errors.push_back("'seeds' must be distinct");
    if (cfg.methods.empty()) errors.push_back("'methods' must list at least one method");
    std::map<std::string, int> names;
    for (const auto& m : cfg.methods) {
        if (++names[m.name] == 2) errors.push_back("method name '" + m.name + "' used twice");
        if (m.teachers > cfg.teacher_pool)
            errors.push_back("method '" + m.name + "' asks for more teachers than 'teacher_pool'");
        std::vector<std::string> sub;
        json merged = cfg.student;
        merged.merge_patch(m.overrides);
        auto tc = parse_train_config(merged, sub);
        check_train_config(tc, sub);
        for (auto& e : sub) {
            // augmented data comes from the suite, not from data.augmented
            if (e.find("augmented_only needs") != std::string::npos && !m.augment.empty()) continue;
            errors.push_back("method '" + m.name + "': " + e);
        }
    }
    if (cfg.teacher_pool < 1) errors.push_back("'teacher_pool' must be at least 1");
    if (cfg.resamples < 1) errors.push_back("'bootstrap.resamples' must be at least 1");
    std::vector<std::string> tsub;
    auto tc = parse_train_config(cfg.teacher, tsub);
    check_train_config(tc, tsub);
    for (auto& e : tsub) errors.push_back("teacher: " + e);
    try {
        cfg.corpus.validate();
    } catch (const ConfigError& e) {
        errors.push_back(std::string("corpus: ") + e.what());
    }
    return cfg;
}

SuiteConfig load_suite_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": not valid JSON: " + e.what());
    }
    std::vector<std::string> errors;
    auto cfg = parse_suite_config(j, errors);
    if (!errors.empty()) {
        std::string msg = path.string() + ": " + std::to_string(errors.size()) + " config error(s)";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return cfg;
}

std::string format_correctness(const CorrectnessVector& c) {
    std::string out = "id,correct\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        out += c.ids[i];
        out += c.correct[i] ? ",1\n" : ",0\n";
    }
    return out;
}

CorrectnessVector parse_correctness(std::string_view text) {
    CorrectnessVector c;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (n == 1 && line == "id,correct")) continue;
        auto comma = line.rfind(',');
        if (comma == std::string::npos) throw ParseError("line " + std::to_string(n) + ": expected 'id,correct'", n);
        auto v = line.substr(comma + 1);
        if (v != "0" && v != "1") throw ParseError("line " + std::to_string(n) + ": correctness must be 0 or 1", n);
        c.ids.push_back(line.substr(0, comma));
        c.correct.push_back(v == "1");
    }
    return c;
}

std::string record_to_json(const RunRecord& r) {
    json j;
    j["method"] = r.method;
    j["seed"] = r.seed;
    j["failed"] = r.failed;
    if (r.failed) j["failure"] = r.failure;
    j["dev_accuracy"] = r.dev_accuracy;
    j["selected_epoch"] = r.selected_epoch;
    j["split_accuracy"] = r.split_accuracy;
    j["config"] = r.config;
    return j.dump();
}

namespace {

TrainConfig method_config(const SuiteConfig& cfg, const MethodSpec& m, std::uint64_t seed) {
    json merged = cfg.student;
    merged.merge_patch(m.overrides);
    std::vector<std::string> errors;
    auto tc = parse_train_config(merged, errors);
    if (!errors.empty()) throw ConfigError("method '" + m.name + "': " + errors.front());
    tc.seed = seed;
    return tc;
}

std::vector<std::size_t> range_rows(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> out;
    for (std::size_t i = begin; i < end; ++i) out.push_back(i);
    return out;
}

std::vector<std::size_t> misclassified_rows(const std::vector<Probs>& preds, const EncodedSplit& data,
                                            std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (argmax(preds[i]) != *data.gold[i]) out.push_back(i);
    return out;
}

}  // namespace

SuiteResult run_suite(const SuiteConfig& cfg, const std::filesystem::path& out_dir,
                      const std::function<void(const std::string&)>& log) {
    auto say = [&](const std::string& m) {
        if (log) log(m);
    };
    SuiteResult result;

    const Dataset ds = cfg.corpus_dir.empty() ? generate_synth_corpus(cfg.corpus) : load_corpus_dir(cfg.corpus_dir);
    std::vector<std::string> errors;
    const TrainConfig base = parse_train_config(cfg.student, errors);
    const TrainConfig teacher_cfg = parse_train_config(cfg.teacher, errors);
    if (!errors.empty()) throw ConfigError(errors.front());
    if (teacher_cfg.model.dim != base.model.dim)
        throw ConfigError("teacher and student must share the hashed input dimension");
    const std::size_t dim = base.model.dim;

    const auto train = EncodedSplit::from(ds.subset(base.data.train_split), dim);
    const auto dev = EncodedSplit::from(ds.subset(base.data.dev_split), dim);
    std::map<std::string, EncodedSplit> evals;
    for (const auto& s : cfg.eval_splits) evals.emplace(s, EncodedSplit::from(ds.subset(s), dim));

    // generated data, shared by all seeds
    bool need_dta = false, need_woa = false;
    for (const auto& m : cfg.methods) {
        for (const auto& a : m.augment) (a == "dta" ? need_dta : need_woa) = true;
        if (m.kind == MethodKind::labelled_aug) need_dta = true;
    }
    EncodedSplit dta, woa;
    if (need_dta) {
        if (!cfg.dta_path.empty()) {
            dta = EncodedSplit::from(load_dataset(cfg.dta_path), dim);
        } else {
            MockCompletionClient client(cfg.corpus, cfg.mock);
            auto gen = generate_dta(cfg.dta, client, ExampleBank::from_dataset(ds, base.data.train_split, cfg.dta.seed));
            result.dta_report = gen.report;
            say("generated " + std::to_string(gen.examples.size()) + " DTA examples");
            if (!out_dir.empty()) {
                write_dataset(gen.to_dataset("dta"), out_dir / "dta.jsonl");
                write_text_file(out_dir / "dta_report.json", gen.report.to_json());
            }
            dta = EncodedSplit::from(gen.to_dataset("dta"), dim);
        }
    }
    if (need_woa) {
        MockCompletionClient client(cfg.corpus, cfg.mock);
        auto gen = generate_woa(cfg.woa, ConjunctionList::builtin(), client);
        result.woa_report = gen.report;
        say("generated " + std::to_string(gen.examples.size()) + " WOA examples");
        if (!out_dir.empty()) {
            write_dataset(gen.to_dataset("woa"), out_dir / "woa.jsonl");
            write_text_file(out_dir / "woa_report.json", gen.report.to_json());
        }
        woa = EncodedSplit::from(gen.to_dataset("woa"), dim);
    }
    // row layout of `combined`: train, then dta, then woa
    const EncodedSplit combined = EncodedSplit::concat(EncodedSplit::concat(train, dta), woa);
    const std::size_t n_train = train.size();
    const auto dta_rows = range_rows(n_train, n_train + dta.size());
    const auto woa_rows = range_rows(n_train + dta.size(), combined.size());

    // teacher pool, trained once
    std::size_t pool_needed = 0;
    for (const auto& m : cfg.methods)
        if (m.kind == MethodKind::distill || m.kind == MethodKind::jtt) pool_needed = cfg.teacher_pool;
    std::vector<std::vector<Probs>> teacher_preds;
    if (pool_needed > 0) {
        Dataset teacher_ds;
        std::vector<std::string> ids;
        for (const auto& split : cfg.teacher_splits)
            for (const auto& id : ds.split_ids(split)) ids.push_back(id);
        const auto teacher_data = EncodedSplit::from(ds.subset(ids), dim);
        for (std::size_t t = 0; t < pool_needed; ++t) {
            TrainConfig tc = teacher_cfg;
            tc.seed = derive_seed(cfg.teacher_seed, t);
            auto model = train_supervised(tc, teacher_data);
            teacher_preds.push_back(predict(model, combined));
            std::ostringstream os;
            os << "teacher " << t << ":";
            for (const auto& [name, split] : evals) os << " " << name << "=" << accuracy(model, split).value;
            say(os.str());
        }
    }
    auto targets_for = [&](const std::vector<std::size_t>& teachers) {
        std::vector<Probs> out(combined.size());
        std::vector<Probs> qs(teachers.size());
        for (std::size_t i = 0; i < combined.size(); ++i) {
            for (std::size_t k = 0; k < teachers.size(); ++k) qs[k] = teacher_preds[teachers[k]][i];
            out[i] = ensemble_target(qs);
        }
        return out;
    };

    auto evaluate = [&](RunRecord& rec, const ModelParams& model) {
        for (const auto& [name, split] : evals) {
            auto acc = accuracy(model, split);
            rec.split_accuracy[name] = acc.value;
            rec.correctness[name] = std::move(acc.correctness);
        }
    };

    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
        const std::uint64_t seed = cfg.seeds[si];
        std::optional<ModelParams> student0;
        std::optional<std::vector<Probs>> student0_train_preds;
        std::vector<ModelParams> peers;

        auto get_student0 = [&]() -> const ModelParams& {
            if (!student0) {
                TrainConfig sc = base;
                sc.seed = seed;
                student0 = train_supervised(sc, train);
            }
            return *student0;
        };
        auto teacher_set = [&](std::size_t e) {
            std::vector<std::size_t> out;
            for (std::size_t k = 0; k < e; ++k) out.push_back((si + k) % cfg.teacher_pool);
            return out;
        };

        for (const auto& m : cfg.methods) {
            RunRecord rec;
            rec.method = m.name;
            rec.seed = seed;
            try {
                TrainConfig tc = method_config(cfg, m, seed);
                if (auto w = apply_exceptions(tc); !w.empty()) say(m.name + ": " + w);
                rec.config = flatten_config(tc);
                const std::size_t factor = tc.upsample.minority;

                switch (m.kind) {
                    case MethodKind::supervised: {
                        evaluate(rec, get_student0());
                        break;
                    }
                    case MethodKind::jtt: {
                        const auto t = teacher_set(1).front();
                        auto minority = misclassified_rows(teacher_preds[t], combined, n_train);
                        auto rows = range_rows(0, n_train);
                        for (std::size_t k = 1; k < factor; ++k) rows.insert(rows.end(), minority.begin(), minority.end());
                        evaluate(rec, train_supervised(tc, train, rows));
                        break;
                    }
                    case MethodKind::labelled_aug: {
                        EncodedSplit aug = dta;
                        for (std::size_t i = 0; i < aug.size(); ++i) aug.gold[i] = aug.conditioned[i];
                        evaluate(rec, train_supervised(tc, EncodedSplit::concat(train, aug)));
                        break;
                    }
                    case MethodKind::distill: {
                        const auto& s0 = get_student0();
                        std::vector<std::size_t> rows = range_rows(0, n_train);
                        std::optional<MinorityMode> dmu = m.dmu;
                        if (!dmu && tc.minority.enabled) dmu = tc.minority.mode;
                        if (dmu) {
                            std::vector<std::vector<Probs>> judges;
                            if (*dmu == MinorityMode::teacher) {
                                judges.push_back(teacher_preds[teacher_set(1).front()]);
                            } else {
                                if (!student0_train_preds) student0_train_preds = predict(s0, combined);
                                judges.push_back(*student0_train_preds);
                                if (*dmu == MinorityMode::ensemble_any) {
                                    while (peers.size() + 1 < tc.minority.ensemble_size) {
                                        TrainConfig pc = base;
                                        pc.seed = derive_seed(seed, 0x9ee7u, peers.size());
                                        peers.push_back(train_supervised(pc, train));
                                    }
                                    for (std::size_t p = 0; p + 1 < tc.minority.ensemble_size; ++p)
                                        judges.push_back(predict(peers[p], combined));
                                }
                            }
                            std::vector<bool> flagged(n_train, false);
                            for (const auto& preds : judges)
                                for (auto r : misclassified_rows(preds, combined, n_train)) flagged[r] = true;
                            std::vector<std::size_t> minority;
                            for (std::size_t r = 0; r < n_train; ++r)
                                if (flagged[r]) minority.push_back(r);
                            for (std::size_t k = 1; k < factor; ++k) rows.insert(rows.end(), minority.begin(), minority.end());
                            say(m.name + " seed " + std::to_string(seed) + ": " + std::to_string(minority.size()) +
                                " minority examples");
                        }
                        for (const auto& a : m.augment) {
                            const auto& extra = a == "dta" ? dta_rows : woa_rows;
                            const std::size_t f = a == "dta" ? tc.upsample.dta : tc.upsample.woa;
                            for (std::size_t k = 0; k < f; ++k) rows.insert(rows.end(), extra.begin(), extra.end());
                        }
                        DistillInputs in;
                        in.data = &combined;
                        in.targets = targets_for(teacher_set(m.teachers));
                        in.rows = std::move(rows);
                        in.dev = &dev;
                        auto res = distill(tc, s0, in);
                        rec.dev_accuracy = res.dev_accuracy;
                        rec.selected_epoch = res.selected_epoch;
                        evaluate(rec, res.model);
                        break;
                    }
                }
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.failure = e.what();
                say("run " + m.name + " seed " + std::to_string(seed) + " failed: " + e.what());
            }
            if (!rec.failed) {
                std::ostringstream os;
                os << m.name << " seed " << seed << ":";
                for (const auto& [name, acc] : rec.split_accuracy) os << " " << name << "=" << acc;
                say(os.str());
            }
            result.records.push_back(std::move(rec));
        }
    }

    bool have_baseline = false;
    for (const auto& m : cfg.methods) have_baseline |= m.name == cfg.baseline;
    try {
        result.summary = aggregate_seeds(result.records, have_baseline ? cfg.baseline : std::string{},
                                         cfg.resamples, cfg.bootstrap_seed);
    } catch (const ContractError& e) {
        say(std::string("no summary table: ") + e.what());
    }

    if (!out_dir.empty()) {
        std::string records;
        for (const auto& r : result.records) {
            records += record_to_json(r) + "\n";
            for (const auto& [split, c] : r.correctness)
                write_text_file(out_dir / "correctness" / r.method / ("seed-" + std::to_string(r.seed)) / (split + ".csv"),
                                format_correctness(c));
        }
        write_text_file(out_dir / "records.jsonl", records);
        write_text_file(out_dir / "summary.tsv", result.summary.to_tsv());
        write_text_file(out_dir / "summary.json", result.summary.to_json());
    }
    return result;
}

}  // namespace rkd
