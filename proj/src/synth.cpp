#include "robustkd/synth.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "robustkd/tinynet.hpp"

namespace rkd {

void SynthConfig::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ConfigError(std::string(name) + " must be a probability in [0,1]");
    };
    prob(overlap_bias, "overlap_bias");
    prob(minority_rate, "minority_rate");
    prob(cue_reliability, "cue_reliability");
    prob(shared_cue_rate, "shared_cue_rate");
    if (shared_cue_rate > 0.0 && shared_cues_per_class == 0)
        throw ConfigError("shared_cues_per_class must be positive when shared_cue_rate > 0");
    if (overlap_bias > 1.0 - minority_rate + 1e-12)
        throw ConfigError("overlap_bias must not exceed 1 - minority_rate");
    if (cues_per_class == 0) throw ConfigError("cues_per_class must be positive");
    if (premise_length < hypothesis_body || hypothesis_body == 0)
        throw ConfigError("hypothesis_body must be in [1, premise_length]");
    for (const auto* v : {&vocab_source, &vocab_target}) {
        // empty means "use the built-in pool"; an explicit pool must be big enough
        if (!v->empty() && v->size() < kNumClasses * cues_per_class + 2 * premise_length)
            throw ConfigError("vocabulary pool too small for the requested cue and sentence sizes");
    }
    std::set<std::string> src(vocab_source.begin(), vocab_source.end());
    for (const auto& w : vocab_target)
        if (src.count(w)) throw ConfigError("vocab_source and vocab_target share token '" + w + "'");
    const auto shared = shared_cue_vocabulary(kNumClasses * shared_cues_per_class);
    for (const auto& w : shared) {
        if (src.count(w) || std::find(vocab_target.begin(), vocab_target.end(), w) != vocab_target.end())
            throw ConfigError("vocabulary token '" + w + "' collides with the shared cue pool");
    }
    if (source_domain == target_domain) throw ConfigError("source and target domain tags must differ");
}

namespace {

std::vector<std::string> pseudo_words(const std::string& consonants, std::uint64_t seed, std::size_t size) {
    const std::string vowels = "aeiou";
    std::vector<std::string> syllables;
    for (char c : consonants)
        for (char v : vowels) syllables.push_back(std::string{c, v});
    if (size > syllables.size() * syllables.size() * syllables.size())
        throw ConfigError("vocabulary size exceeds the pseudo-word inventory");
    Rng rng(seed);
    std::unordered_set<std::string> seen;
    std::vector<std::string> out;
    while (out.size() < size) {
        std::string w;
        for (int s = 0; s < 3; ++s) w += syllables[rng.below(syllables.size())];
        if (seen.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

std::vector<std::string> default_vocabulary(bool target, std::size_t size) {
    if (size == 0) throw ConfigError("vocabulary size must be positive");
    // Disjoint consonant inventories keep the pools disjoint for any size.
    return target ? pseudo_words("lmnprvz", 0x7a72676574ULL, size)
                  : pseudo_words("bdfgkst", 0x736f75726365ULL, size);
}

std::vector<std::string> shared_cue_vocabulary(std::size_t size) {
    return pseudo_words("chjwy", 0x736861726564ULL, size);
}

SynthLanguage::SynthLanguage(const SynthConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    auto build = [&](std::vector<std::string> words) {
        Pool p;
        std::size_t k = 0;
        for (int c = 0; c < kNumClasses; ++c)
            for (std::size_t i = 0; i < cfg_.cues_per_class; ++i) p.cues[c].push_back(words[k++]);
        p.fillers.assign(words.begin() + static_cast<std::ptrdiff_t>(k), words.end());
        return p;
    };
    source_ = build(cfg_.vocab_source.empty() ? default_vocabulary(false) : cfg_.vocab_source);
    target_ = build(cfg_.vocab_target.empty() ? default_vocabulary(true) : cfg_.vocab_target);
    const auto shared = shared_cue_vocabulary(kNumClasses * cfg_.shared_cues_per_class);
    for (std::size_t i = 0; i < shared.size(); ++i) shared_[i % kNumClasses].push_back(shared[i]);
}

const std::vector<std::string>& SynthLanguage::fillers(Domain d) const { return pool(d).fillers; }

std::vector<std::string> SynthLanguage::premise(Rng& rng, Domain d) const {
    std::vector<std::string> idx = pool(d).fillers;
    // partial Fisher-Yates: distinct tokens
    std::vector<std::string> out;
    for (std::size_t i = 0; i < cfg_.premise_length; ++i) {
        auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.push_back(idx[i]);
    }
    return out;
}

std::vector<std::string> SynthLanguage::hypothesis(Rng& rng, Domain d,
                                                   const std::vector<std::string>& premise,
                                                   int label, bool high_overlap) const {
    const Pool& p = pool(d);
    int cue_label = label;
    if (!rng.bernoulli(cfg_.cue_reliability)) {
        cue_label = (label + 1 + static_cast<int>(rng.below(kNumClasses - 1))) % kNumClasses;
    }
    const bool shared = cfg_.shared_cue_rate > 0.0 && rng.bernoulli(cfg_.shared_cue_rate);
    const auto& cues = shared ? shared_[cue_label] : p.cues[cue_label];
    std::vector<std::string> body;
    if (high_overlap) {
        std::vector<std::string> src = premise;
        rng.shuffle(src);
        body.assign(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(cfg_.hypothesis_body));
    } else {
        std::unordered_set<std::string> used(premise.begin(), premise.end());
        while (body.size() < cfg_.hypothesis_body) {
            const auto& w = p.fillers[rng.below(p.fillers.size())];
            if (used.insert(w).second) body.push_back(w);
        }
    }
    auto pos = static_cast<std::ptrdiff_t>(rng.below(body.size() + 1));
    body.insert(body.begin() + pos, cues[rng.below(cues.size())]);
    return body;
}

std::optional<SynthLanguage::Domain> SynthLanguage::classify(
    const std::vector<std::string>& tokens) const {
    auto count = [&](const Pool& p) {
        std::size_t n = 0;
        for (const auto& t : tokens) {
            if (std::find(p.fillers.begin(), p.fillers.end(), t) != p.fillers.end()) ++n;
            for (const auto& cs : p.cues)
                if (std::find(cs.begin(), cs.end(), t) != cs.end()) ++n;
        }
        return n;
    };
    auto s = count(source_), t = count(target_);
    if (s == 0 && t == 0) return std::nullopt;
    return t > s ? Domain::target : Domain::source;
}

std::optional<int> SynthLanguage::cue_class(const std::vector<std::string>& tokens,
                                            Domain d) const {
    const Pool& p = pool(d);
    for (const auto& t : tokens)
        for (int c = 0; c < kNumClasses; ++c)
            if (std::find(p.cues[c].begin(), p.cues[c].end(), t) != p.cues[c].end() ||
                std::find(shared_[c].begin(), shared_[c].end(), t) != shared_[c].end())
                return c;
    return std::nullopt;
}

std::string SynthLanguage::render(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 32);
    out += '.';
    return out;
}

bool counters_overlap_bias(const NLIExample& ex) {
    if (!ex.gold) return false;
    const bool high = token_overlap(ex.premise, ex.hypothesis) > 0.5;
    return (*ex.gold == 0) != high;
}

namespace {

enum class BiasMode { planted, counter, independent };

struct SplitSpec {
    std::string name;
    std::size_t n;
    SynthLanguage::Domain domain;
    BiasMode mode;
};

}  // namespace

Dataset generate_synth_corpus(const SynthConfig& cfg) {
    cfg.validate();
    SynthLanguage lang(cfg);
    using D = SynthLanguage::Domain;
    const std::vector<SplitSpec> specs = {
        {"train", cfg.n_train, D::source, BiasMode::planted},
        {"dev", cfg.n_dev, D::source, BiasMode::planted},
        {"test", cfg.n_test, D::source, BiasMode::planted},
        {"test-hard", cfg.n_test_hard, D::source, BiasMode::counter},
        {"ood-target", cfg.n_ood_target, D::target, BiasMode::independent},
        {"pretrain-source", cfg.n_pretrain_per_domain, D::source, BiasMode::independent},
        {"pretrain-target", cfg.n_pretrain_per_domain, D::target, BiasMode::independent},
    };

    Dataset ds;
    std::vector<std::string> minority_ids;
    std::vector<std::string> pretrain_ids;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const auto& spec = specs[s];
        Rng rng(derive_seed(cfg.seed, 0x5350u, s));
        std::vector<int> labels(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) labels[i] = static_cast<int>(i % kNumClasses);
        rng.shuffle(labels);

        const std::string& domain_tag = spec.domain == D::source ? cfg.source_domain : cfg.target_domain;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < spec.n; ++i) {
            const int label = labels[i];
            bool minority = false;
            bool high = false;
            switch (spec.mode) {
                case BiasMode::planted:
                    minority = rng.bernoulli(cfg.minority_rate);
                    // Minority entailments are the low-overlap ones, so the
                    // rest carry the bias at a raised rate to keep
                    // P(high | entailment) == overlap_bias over the split.
                    if (minority) high = label != 0;
                    else high = label == 0 && rng.bernoulli(cfg.overlap_bias / (1.0 - cfg.minority_rate));
                    break;
                case BiasMode::counter:
                    minority = true;
                    high = label != 0;
                    break;
                case BiasMode::independent:
                    high = rng.bernoulli(0.5);
                    break;
            }
            auto prem = lang.premise(rng, spec.domain);
            auto hyp = lang.hypothesis(rng, spec.domain, prem, label, high);
            NLIExample ex;
            ex.id = spec.name + "-" + std::to_string(i);
            ex.premise = SynthLanguage::render(prem);
            ex.hypothesis = SynthLanguage::render(hyp);
            ex.gold = label;
            ex.domain = domain_tag;
            ex.provenance = Provenance::original;
            if (minority && spec.name == "train") minority_ids.push_back(ex.id);
            ids.push_back(ex.id);
            ds.add(std::move(ex));
        }
        if (spec.name.rfind("pretrain", 0) == 0) {
            pretrain_ids.insert(pretrain_ids.end(), ids.begin(), ids.end());
        } else {
            ds.set_split(spec.name, std::move(ids));
        }
    }
    ds.set_split("pretrain", std::move(pretrain_ids));
    ds.set_split("train-minority", std::move(minority_ids));
    return ds;
}

}  // namespace rkd
