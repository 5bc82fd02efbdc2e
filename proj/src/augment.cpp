#include "robustkd/augment.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "robustkd/tinynet.hpp"

namespace rkd {

std::string_view to_string(PromptKind k) {
    switch (k) {
        case PromptKind::premise: return "premise";
        case PromptKind::hypothesis: return "hypothesis";
        case PromptKind::woa_sentence: return "woa_sentence";
        case PromptKind::woa_second: return "woa_second";
        case PromptKind::woa_coherence: return "woa_coherence";
        case PromptKind::woa_meaning: return "woa_meaning";
    }
    return "premise";
}

namespace {

const std::map<std::string, std::vector<std::string>, std::less<>>& prompt_table() {
    static const std::map<std::string, std::vector<std::string>, std::less<>> table = {
        {"magazine", {"Example extract from a popular magazine article:"}},
        {"travel", {"Example extract from a travel guide:"}},
        {"fiction", {"Example extract from a fiction book:"}},
        {"government",
         {"Example extract from a press release on a public domain government website:",
          "Example extract from a letter on a public domain government website:",
          // no trailing colon in the published wording; kept as printed
          "Example extract from a speech on a public domain government website",
          "Example extract from a report on a public domain government website:"}},
        {"flickr", {"Example flickr image caption:"}},
    };
    return table;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string first_line(std::string_view s) {
    auto t = trim(s);
    auto nl = t.find('\n');
    return nl == std::string::npos ? t : trim(std::string_view(t).substr(0, nl));
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

constexpr std::string_view kInstructions[kNumClasses] = {
    "Write a hypothesis that is definitely true given the premise.",
    "Write a hypothesis that might be true given the premise.",
    "Write a hypothesis that is definitely false given the premise.",
};

constexpr std::string_view kWoaSentencePrefix = "Write a short sentence that includes the word \"";
constexpr std::string_view kWoaSecondPrefix = "Write a sentence using only words from this list: ";
constexpr std::string_view kCoherencePrefix =
    "Is the following sentence mostly coherent? Answer yes or no.\nSentence: ";
constexpr std::string_view kMeaningPrefix =
    "Do the following two sentences have essentially the same meaning? Answer yes or no.\nSentence 1: ";

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

const std::vector<std::string>& premise_prompt_texts(std::string_view domain) {
    const auto& t = prompt_table();
    auto it = t.find(domain);
    if (it == t.end()) throw ConfigError("no premise prompt registered for domain '" + std::string(domain) + "'");
    return it->second;
}

std::vector<std::string> premise_prompt_domains() {
    std::vector<std::string> out;
    for (const auto& [d, _] : prompt_table()) out.push_back(d);
    return out;
}

GenPrompt build_premise_prompt(std::string_view domain, std::size_t round) {
    const auto& texts = premise_prompt_texts(domain);
    return GenPrompt{texts[round % texts.size()], PromptKind::premise, std::string(domain), std::nullopt};
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() &&
            (text[i + 1] == ' ' || text[i + 1] == '\n' || text[i + 1] == '\t' || text[i + 1] == '\r')) {
            auto piece = trim(text.substr(start, i + 1 - start));
            if (!piece.empty()) out.push_back(std::move(piece));
            start = i + 1;
        }
    }
    auto last = trim(text.substr(std::min(start, text.size())));
    if (!last.empty()) out.push_back(std::move(last));
    return out;
}

std::optional<std::string> filter_premise(std::string_view reply) {
    auto sentences = split_sentences(reply);
    auto acceptable = [](const std::string& s) { return utf8_length(s) >= 8 && s.back() != '?'; };
    for (std::size_t i = 0; i < sentences.size() && i < 2; ++i)
        if (acceptable(sentences[i])) return sentences[i];
    return std::nullopt;
}

void ExampleBank::validate() const {
    for (int c = 0; c < kNumClasses; ++c) {
        if (per_class[c].size() != 3)
            throw ConfigError("example bank needs exactly 3 demonstrations for class '" +
                              std::string(LabelCodec::name(c)) + "', found " +
                              std::to_string(per_class[c].size()));
        for (const auto& d : per_class[c])
            if (d.premise.empty() || d.hypothesis.empty())
                throw ConfigError("example bank has an empty demonstration");
    }
}

ExampleBank ExampleBank::builtin() {
    // Hand-written placeholders in the style of caption-domain NLI pairs.
    ExampleBank b;
    b.per_class[0] = {
        {"A man in a red jacket is riding a bicycle down a busy street.", "A man is riding a bike."},
        {"Two children are building a sandcastle on the beach.", "Kids are playing in the sand."},
        {"A woman is slicing vegetables in a small kitchen.", "Someone is preparing food."},
    };
    b.per_class[1] = {
        {"A man in a red jacket is riding a bicycle down a busy street.", "A man is riding to work."},
        {"Two children are building a sandcastle on the beach.", "The children are on vacation with their parents."},
        {"A woman is slicing vegetables in a small kitchen.", "The woman is cooking dinner for her family."},
    };
    b.per_class[2] = {
        {"A man in a red jacket is riding a bicycle down a busy street.", "A man is sleeping on a couch."},
        {"Two children are building a sandcastle on the beach.", "The children are sitting in a classroom."},
        {"A woman is slicing vegetables in a small kitchen.", "The woman is swimming in a lake."},
    };
    return b;
}

ExampleBank ExampleBank::from_dataset(const Dataset& ds, const std::string& split, std::uint64_t seed) {
    auto ids = ds.split_ids(split);
    Rng rng(derive_seed(seed, 0xba4bu));
    rng.shuffle(ids);
    ExampleBank b;
    for (const auto& id : ids) {
        const auto& ex = ds.at(id);
        if (!ex.gold) continue;
        auto& slot = b.per_class[*ex.gold];
        if (slot.size() < 3) slot.push_back({ex.premise, ex.hypothesis});
    }
    b.validate();
    return b;
}

ExampleBank ExampleBank::load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("example bank " + path.string() + ": " + e.what());
    }
    ExampleBank b;
    for (int c = 0; c < kNumClasses; ++c) {
        const std::string key(LabelCodec::name(c));
        if (!j.contains(key) || !j[key].is_array()) continue;
        for (const auto& d : j[key]) {
            if (!d.is_object() || !d.contains("premise") || !d.contains("hypothesis"))
                throw ConfigError("example bank entry for '" + key + "' needs premise and hypothesis");
            b.per_class[c].push_back({d["premise"].get<std::string>(), d["hypothesis"].get<std::string>()});
        }
    }
    b.validate();
    return b;
}

std::string_view hypothesis_instruction(int target_class) {
    if (target_class < 0 || target_class >= kNumClasses) throw ContractError("class index out of range");
    return kInstructions[target_class];
}

GenPrompt build_hypothesis_prompt(std::string_view premise, int target_class, const ExampleBank& bank,
                                  std::string domain) {
    bank.validate();
    std::string text(hypothesis_instruction(target_class));
    text += "\n\n";
    for (const auto& d : bank.per_class[target_class])
        text += "Premise: " + d.premise + "\nHypothesis: " + d.hypothesis + "\n\n";
    text += "Premise: ";
    text += premise;
    text += "\nHypothesis:";
    return GenPrompt{std::move(text), PromptKind::hypothesis, std::move(domain), target_class};
}

void ConjunctionList::validate() const {
    if (words.size() != 60)
        throw ConfigError("conjunction list needs 60 entries, found " + std::to_string(words.size()));
    std::set<std::string> seen;
    for (const auto& w : words) {
        if (w.empty() || !std::all_of(w.begin(), w.end(), [](char c) { return c >= 'a' && c <= 'z'; }))
            throw ConfigError("conjunction '" + w + "' must be a single lowercase word");
        if (!seen.insert(w).second) throw ConfigError("conjunction '" + w + "' listed twice");
    }
}

ConjunctionList ConjunctionList::builtin() {
    ConjunctionList l;
    l.words = {"after",        "although",     "and",          "as",          "because",
               "before",       "but",          "for",          "if",          "lest",
               "nor",          "once",         "or",           "since",       "so",
               "than",         "that",         "though",       "till",        "unless",
               "until",        "when",         "whenever",     "where",       "whereas",
               "wherever",     "whether",      "while",        "whilst",      "yet",
               "also",         "besides",      "consequently", "furthermore", "hence",
               "however",      "likewise",     "meanwhile",    "moreover",    "nevertheless",
               "nonetheless",  "otherwise",    "still",        "then",        "therefore",
               "thus",         "accordingly",  "additionally", "afterwards",  "alternatively",
               "finally",      "indeed",       "instead",      "similarly",   "subsequently",
               "conversely",   "namely",       "notwithstanding", "whereby",  "provided"};
    l.validate();
    return l;
}

ConjunctionList ConjunctionList::load(const std::filesystem::path& path) {
    ConjunctionList l;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        l.words.push_back(t);
    }
    l.validate();
    return l;
}

GenPrompt build_woa_sentence_prompt(std::string_view conjunction) {
    std::string text(kWoaSentencePrefix);
    text += conjunction;
    text += "\".";
    return GenPrompt{std::move(text), PromptKind::woa_sentence, {}, std::nullopt};
}

GenPrompt build_woa_second_prompt(const std::vector<std::string>& words) {
    std::string text(kWoaSecondPrefix);
    for (std::size_t i = 0; i < words.size(); ++i) text += (i ? ", " : "") + words[i];
    text += "\nSentence:";
    return GenPrompt{std::move(text), PromptKind::woa_second, {}, std::nullopt};
}

GenPrompt build_coherence_prompt(std::string_view sentence) {
    std::string text(kCoherencePrefix);
    text += sentence;
    text += "\nAnswer:";
    return GenPrompt{std::move(text), PromptKind::woa_coherence, {}, std::nullopt};
}

GenPrompt build_meaning_prompt(std::string_view first, std::string_view second) {
    std::string text(kMeaningPrefix);
    text += first;
    text += "\nSentence 2: ";
    text += second;
    text += "\nAnswer:";
    return GenPrompt{std::move(text), PromptKind::woa_meaning, {}, std::nullopt};
}

std::vector<std::string> shuffle_words_remove_conjunction(std::string_view sentence,
                                                          std::string_view conjunction,
                                                          std::uint64_t seed) {
    auto tokens = tokenize(sentence);
    auto conj = tokenize(conjunction);
    if (conj.size() != 1) throw ContractError("conjunction must be a single word");
    auto it = std::find(tokens.begin(), tokens.end(), conj[0]);
    if (it == tokens.end())
        throw ContractError("conjunction '" + conj[0] + "' does not occur in the sentence");
    tokens.erase(it);
    Rng rng(seed);
    rng.shuffle(tokens);
    return tokens;
}

std::optional<bool> parse_yes_no(std::string_view reply) {
    auto t = tokenize(reply);
    if (t.empty()) return std::nullopt;
    if (t[0] == "yes") return true;
    if (t[0] == "no") return false;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

std::vector<CompletionResult> CompletionClient::complete_batch(const std::vector<CompletionRequest>& reqs) {
    std::vector<CompletionResult> out;
    out.reserve(reqs.size());
    for (const auto& r : reqs) out.push_back(complete(r));
    return out;
}

MockCompletionClient::MockCompletionClient(const SynthConfig& world, MockOptions opts)
    : lang_(world), opts_(opts) {}

CompletionResult MockCompletionClient::complete(const CompletionRequest& req) {
    ++calls_;
    Rng rng(derive_seed(opts_.seed, req.sample_seed, fnv1a64(req.prompt)));
    const auto& p = req.prompt;
    std::string text;
    if (starts_with(p, "Example ") || starts_with(p, kMagazinePromptParaphrase)) {
        text = premise_reply(rng, p);
    } else if (std::any_of(std::begin(kInstructions), std::end(kInstructions),
                           [&](std::string_view i) { return starts_with(p, i); })) {
        text = hypothesis_reply(rng, p);
    } else if (starts_with(p, kWoaSentencePrefix)) {
        text = woa_sentence_reply(rng, p);
    } else if (starts_with(p, kWoaSecondPrefix)) {
        text = woa_second_reply(rng, p);
    } else if (starts_with(p, kCoherencePrefix)) {
        text = rng.bernoulli(opts_.coherence_yes_rate) ? "Yes." : "No.";
    } else if (starts_with(p, kMeaningPrefix)) {
        text = rng.bernoulli(opts_.meaning_no_rate) ? "No." : "Yes.";
    } else {
        text = SynthLanguage::render(lang_.premise(rng, SynthLanguage::Domain::target));
    }
    return CompletionResult{true, std::move(text), {}};
}

std::string MockCompletionClient::premise_reply(Rng& rng, const std::string& prompt) const {
    const auto domain = prompt.find("flickr") != std::string::npos ? SynthLanguage::Domain::source
                                                                   : SynthLanguage::Domain::target;
    auto tokens = lang_.premise(rng, domain);
    if (rng.bernoulli(opts_.premise_reject_rate)) {
        if (rng.bernoulli(0.5)) return "Hi.";
        tokens.resize(3);
        auto q = SynthLanguage::render(tokens);
        q.back() = '?';
        return q;
    }
    if (rng.bernoulli(opts_.second_sentence_rate)) return "Ok. " + SynthLanguage::render(tokens);
    return SynthLanguage::render(tokens);
}

std::string MockCompletionClient::hypothesis_reply(Rng& rng, const std::string& prompt) const {
    int requested = 0;
    for (int c = 0; c < kNumClasses; ++c)
        if (starts_with(prompt, kInstructions[c])) requested = c;
    const std::string marker = "Premise: ";
    auto pos = prompt.rfind(marker);
    std::string premise_line;
    if (pos != std::string::npos) {
        auto end = prompt.find('\n', pos);
        premise_line = prompt.substr(pos + marker.size(), end == std::string::npos ? std::string::npos
                                                                                   : end - pos - marker.size());
    }
    auto premise = tokenize(premise_line);
    const auto domain = lang_.classify(premise).value_or(SynthLanguage::Domain::target);
    if (premise.empty()) premise = lang_.premise(rng, domain);

    int produced = requested;
    if (rng.bernoulli(opts_.label_noise)) {
        produced = opts_.rotate_noise
                       ? (requested + 1) % kNumClasses
                       : (requested + 1 + static_cast<int>(rng.below(kNumClasses - 1))) % kNumClasses;
    }
    return SynthLanguage::render(lang_.hypothesis(rng, domain, premise, produced, rng.bernoulli(0.5)));
}

std::string MockCompletionClient::woa_sentence_reply(Rng& rng, const std::string& prompt) const {
    auto start = kWoaSentencePrefix.size();
    auto end = prompt.find('"', start);
    const std::string conj = prompt.substr(start, end == std::string::npos ? std::string::npos : end - start);
    using D = SynthLanguage::Domain;
    auto tokens = lang_.premise(rng, D::source);
    tokens.resize(tokens.size() - 2);
    // one class cue so the pair carries a teacher-readable label signal
    auto cue_source = lang_.hypothesis(rng, D::source, tokens, static_cast<int>(rng.below(kNumClasses)), true);
    for (const auto& t : cue_source)
        if (std::find(tokens.begin(), tokens.end(), t) == tokens.end()) tokens.push_back(t);
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(1 + rng.below(tokens.size() - 1)), conj);
    return SynthLanguage::render(tokens);
}

std::string MockCompletionClient::woa_second_reply(Rng& rng, const std::string& prompt) const {
    auto start = kWoaSecondPrefix.size();
    auto end = prompt.find('\n', start);
    std::string list = prompt.substr(start, end == std::string::npos ? std::string::npos : end - start);
    auto words = tokenize(list);
    if (words.empty()) return "Nothing.";
    rng.shuffle(words);
    const std::size_t keep = std::max<std::size_t>(1, words.size() - words.size() / 3);
    words.resize(keep);
    return SynthLanguage::render(words);
}

// ---------------------------------------------------------------------------

std::string GenerationReport::to_json() const {
    nlohmann::json j = {{"candidates", candidates},
                        {"requests", requests},
                        {"premises_rejected", premises_rejected},
                        {"dropped_missing_conjunction", dropped_missing_conjunction},
                        {"dropped_incoherent", dropped_incoherent},
                        {"dropped_same_meaning", dropped_same_meaning},
                        {"emitted", emitted},
                        {"target_reached", target_reached},
                        {"failed_prompts", failed_prompts}};
    return j.dump(2) + "\n";
}

Dataset GenerationResult::to_dataset(const std::string& split) const {
    Dataset ds;
    std::vector<std::string> ids;
    for (const auto& ex : examples) {
        ids.push_back(ex.id);
        ds.add(ex);
    }
    ds.set_split(split, std::move(ids));
    return ds;
}

namespace {

CompletionRequest make_request(const GenPrompt& p, int max_tokens, double temperature, std::uint64_t seed) {
    CompletionRequest r;
    r.prompt = p.text;
    r.max_tokens = max_tokens;
    r.temperature = temperature;
    r.sample_seed = seed;
    if (p.kind == PromptKind::premise || p.kind == PromptKind::hypothesis) r.stop = {"\n\n"};
    return r;
}

std::size_t wave_size(const CompletionClient& client) { return std::max<std::size_t>(4, 4 * client.max_parallel()); }

}  // namespace

GenerationResult generate_dta(const DtaOptions& opts, CompletionClient& client, const ExampleBank& bank) {
    if (opts.n_target < 1) throw ContractError("n_target must be at least 1");
    if (opts.domains.empty()) throw ConfigError("DTA needs at least one domain");
    bank.validate();
    for (const auto& d : opts.domains) premise_prompt_texts(d);

    GenerationResult res;
    auto& rep = res.report;
    const std::size_t n_domains = opts.domains.size();
    for (std::size_t di = 0; di < n_domains; ++di) {
        const auto& domain = opts.domains[di];
        const std::size_t quota = opts.n_target / n_domains + (di < opts.n_target % n_domains ? 1 : 0);
        const std::size_t max_candidates = std::max<std::size_t>(1, quota * opts.max_candidates_per_example);
        std::size_t emitted = 0;
        std::size_t k = 0;
        while (emitted < quota && k < max_candidates) {
            const std::size_t needed = (quota - emitted + kNumClasses - 1) / kNumClasses;
            const std::size_t wave = std::min({wave_size(client), needed, max_candidates - k});

            std::vector<CompletionRequest> premise_reqs;
            for (std::size_t w = 0; w < wave; ++w)
                premise_reqs.push_back(make_request(build_premise_prompt(domain, k + w), opts.max_tokens,
                                                    opts.temperature, derive_seed(opts.seed, di, k + w, 0)));
            auto premise_res = client.complete_batch(premise_reqs);
            rep.requests += premise_reqs.size();
            rep.candidates += wave;

            struct Planned {
                std::size_t candidate;
                std::string premise;
                int cls;
            };
            std::vector<Planned> planned;
            std::size_t budget = quota - emitted;
            for (std::size_t w = 0; w < wave; ++w) {
                if (!premise_res[w].ok) {
                    rep.failed_prompts.push_back(premise_reqs[w].prompt);
                    continue;
                }
                auto premise = filter_premise(premise_res[w].text);
                if (!premise) {
                    ++rep.premises_rejected;
                    continue;
                }
                for (int c = 0; c < kNumClasses && budget > 0; ++c, --budget)
                    planned.push_back({k + w, *premise, c});
            }

            std::vector<CompletionRequest> hyp_reqs;
            for (const auto& pl : planned)
                hyp_reqs.push_back(make_request(build_hypothesis_prompt(pl.premise, pl.cls, bank, domain),
                                                opts.max_tokens, opts.temperature,
                                                derive_seed(opts.seed, di, pl.candidate, 1 + pl.cls)));
            auto hyp_res = client.complete_batch(hyp_reqs);
            rep.requests += hyp_reqs.size();
            for (std::size_t i = 0; i < planned.size(); ++i) {
                const auto hyp = hyp_res[i].ok ? first_line(hyp_res[i].text) : std::string{};
                if (hyp.empty()) {
                    rep.failed_prompts.push_back(hyp_reqs[i].prompt);
                    continue;
                }
                NLIExample ex;
                ex.id = "dta-" + domain + "-" + std::to_string(planned[i].candidate) + "-" +
                        std::to_string(planned[i].cls);
                ex.premise = planned[i].premise;
                ex.hypothesis = hyp;
                ex.domain = domain;
                ex.provenance = Provenance::dta;
                ex.conditioned_class = planned[i].cls;
                res.examples.push_back(std::move(ex));
                ++emitted;
            }
            k += wave;
        }
    }
    rep.emitted = res.examples.size();
    rep.target_reached = rep.emitted == opts.n_target;
    return res;
}

GenerationResult generate_woa(const WoaOptions& opts, const ConjunctionList& conjunctions,
                              CompletionClient& client) {
    if (opts.n_target < 1) throw ContractError("n_target must be at least 1");
    conjunctions.validate();

    GenerationResult res;
    auto& rep = res.report;
    const std::size_t max_candidates = std::max<std::size_t>(1, opts.n_target * opts.max_candidates_per_example);
    std::size_t k = 0;
    auto batch = [&](const std::vector<CompletionRequest>& reqs) {
        rep.requests += reqs.size();
        auto out = client.complete_batch(reqs);
        for (std::size_t i = 0; i < out.size(); ++i)
            if (!out[i].ok) rep.failed_prompts.push_back(reqs[i].prompt);
        return out;
    };

    while (res.examples.size() < opts.n_target && k < max_candidates) {
        const std::size_t wave = std::min(wave_size(client), max_candidates - k);
        rep.candidates += wave;

        struct Candidate {
            std::size_t index;
            std::string conjunction;
            std::string premise;
            std::string hypothesis;
            bool alive = true;
        };
        std::vector<Candidate> cands;
        std::vector<CompletionRequest> reqs;
        for (std::size_t w = 0; w < wave; ++w) {
            const std::size_t idx = k + w;
            Rng pick(derive_seed(opts.seed, idx, 0));
            cands.push_back({idx, conjunctions.words[pick.below(conjunctions.words.size())], {}, {}});
            reqs.push_back(make_request(build_woa_sentence_prompt(cands.back().conjunction), opts.max_tokens,
                                        opts.temperature, derive_seed(opts.seed, idx, 1)));
        }
        // step 1: a sentence containing the conjunction
        auto first = batch(reqs);
        reqs.clear();
        std::vector<std::size_t> live;
        for (std::size_t w = 0; w < wave; ++w) {
            auto& c = cands[w];
            if (!first[w].ok) {
                c.alive = false;
                continue;
            }
            c.premise = first_line(first[w].text);
            auto toks = tokenize(c.premise);
            if (std::find(toks.begin(), toks.end(), c.conjunction) == toks.end()) {
                ++rep.dropped_missing_conjunction;
                c.alive = false;
                continue;
            }
            // steps 2-3: shuffled words without the conjunction feed the second sentence
            auto words = shuffle_words_remove_conjunction(c.premise, c.conjunction,
                                                          derive_seed(opts.seed, c.index, 2));
            reqs.push_back(make_request(build_woa_second_prompt(words), opts.max_tokens, opts.temperature,
                                        derive_seed(opts.seed, c.index, 3)));
            live.push_back(w);
        }
        auto second = batch(reqs);
        reqs.clear();
        std::vector<std::size_t> checked;
        for (std::size_t i = 0; i < live.size(); ++i) {
            auto& c = cands[live[i]];
            c.hypothesis = second[i].ok ? first_line(second[i].text) : std::string{};
            if (c.hypothesis.empty()) {
                c.alive = false;
                continue;
            }
            reqs.push_back(make_request(build_coherence_prompt(c.premise), 4, 0.0, derive_seed(opts.seed, c.index, 4)));
            reqs.push_back(make_request(build_coherence_prompt(c.hypothesis), 4, 0.0, derive_seed(opts.seed, c.index, 5)));
            checked.push_back(live[i]);
        }
        // step 4: both sentences must be judged coherent
        auto coherent = batch(reqs);
        reqs.clear();
        std::vector<std::size_t> distinct;
        for (std::size_t i = 0; i < checked.size(); ++i) {
            auto& c = cands[checked[i]];
            const auto& a = coherent[2 * i];
            const auto& b = coherent[2 * i + 1];
            if (!a.ok || !b.ok) {
                c.alive = false;
                continue;
            }
            if (parse_yes_no(a.text) != true || parse_yes_no(b.text) != true) {
                ++rep.dropped_incoherent;
                c.alive = false;
                continue;
            }
            reqs.push_back(make_request(build_meaning_prompt(c.premise, c.hypothesis), 4, 0.0,
                                        derive_seed(opts.seed, c.index, 6)));
            distinct.push_back(checked[i]);
        }
        // step 5: keep only pairs judged to differ in meaning
        auto meaning = batch(reqs);
        for (std::size_t i = 0; i < distinct.size(); ++i) {
            auto& c = cands[distinct[i]];
            if (!meaning[i].ok) {
                c.alive = false;
                continue;
            }
            if (parse_yes_no(meaning[i].text) != false) {
                ++rep.dropped_same_meaning;
                c.alive = false;
            }
        }
        for (const auto& c : cands) {
            if (!c.alive || res.examples.size() >= opts.n_target) continue;
            NLIExample ex;
            ex.id = "woa-" + std::to_string(c.index);
            ex.premise = c.premise;
            ex.hypothesis = c.hypothesis;
            ex.domain = opts.domain;
            ex.provenance = Provenance::woa;
            res.examples.push_back(std::move(ex));
        }
        k += wave;
    }
    rep.emitted = res.examples.size();
    rep.target_reached = rep.emitted == opts.n_target;
    return res;
}

}  // namespace rkd
