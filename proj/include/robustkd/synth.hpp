#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robustkd/common.hpp"
#include "robustkd/data.hpp"

namespace rkd {

/// Parameters of the seeded two-domain corpus used for desk-scale runs.
///
/// The source domain feeds train/dev/test/test-hard, the target domain feeds
/// ood-target. A teacher-only `pretrain` split mixes both domains without the
/// planted overlap bias; it stands in for the broad pretraining that gives
/// large teachers their out-of-domain competence.
struct SynthConfig {
    std::uint64_t seed = 1;

    std::size_t n_train = 3000;
    std::size_t n_dev = 600;
    std::size_t n_test = 1000;
    std::size_t n_test_hard = 1000;
    std::size_t n_ood_target = 1000;
    std::size_t n_pretrain_per_domain = 1500;

    std::vector<std::string> vocab_source;  // empty: built-in pseudo-word pool
    std::vector<std::string> vocab_target;
    std::string source_domain = "captions";
    std::string target_domain = "travel";

    double overlap_bias = 0.9;    // P(high overlap | entailment) over a biased split
    double minority_rate = 0.1;   // fraction of train/dev/test that counters the bias
    double cue_reliability = 0.85;
    std::size_t cues_per_class = 30;
    double shared_cue_rate = 0.5;        // P(hypothesis cue comes from the domain-independent pool)
    std::size_t shared_cues_per_class = 10;
    std::size_t premise_length = 8;
    std::size_t hypothesis_body = 4;

    /// Throws ConfigError on the first violated constraint.
    void validate() const;
};

std::vector<std::string> default_vocabulary(bool target, std::size_t size = 300);
/// Cue tokens usable in either domain; disjoint from both default pools.
std::vector<std::string> shared_cue_vocabulary(std::size_t size);

/// Token-level generative model shared by the corpus generator and the mock
/// completion client. Each domain's pool is split into per-class cue tokens
/// and content fillers, and a third pool holds cues common to both domains. A
/// hypothesis carries one cue plus a body that either copies premise tokens
/// (high overlap) or uses fresh fillers (low overlap).
class SynthLanguage {
public:
    explicit SynthLanguage(const SynthConfig& cfg);

    enum class Domain { source, target };

    std::vector<std::string> premise(Rng& rng, Domain d) const;
    std::vector<std::string> hypothesis(Rng& rng, Domain d, const std::vector<std::string>& premise,
                                        int label, bool high_overlap) const;
    /// Domain owning most of the tokens, or nullopt if none are known.
    std::optional<Domain> classify(const std::vector<std::string>& tokens) const;
    /// Class whose cue appears in the tokens, if any.
    std::optional<int> cue_class(const std::vector<std::string>& tokens, Domain d) const;
    const std::vector<std::string>& fillers(Domain d) const;

    static std::string render(const std::vector<std::string>& tokens);

private:
    struct Pool {
        std::vector<std::string> cues[kNumClasses];
        std::vector<std::string> fillers;
    };
    const Pool& pool(Domain d) const { return d == Domain::source ? source_ : target_; }

    SynthConfig cfg_;
    Pool source_;
    Pool target_;
    std::vector<std::string> shared_[kNumClasses];
};

/// Splits: train, dev, test, test-hard, ood-target, pretrain, plus the id
/// subset train-minority (planted counter-bias examples of train).
Dataset generate_synth_corpus(const SynthConfig& cfg);

/// Counter-bias predicate: entailment with low overlap or non-entailment
/// with high overlap.
bool counters_overlap_bias(const NLIExample& ex);

}  // namespace rkd
