#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robustkd/common.hpp"
#include "robustkd/data.hpp"
#include "robustkd/synth.hpp"

namespace rkd {

enum class PromptKind { premise, hypothesis, woa_sentence, woa_second, woa_coherence, woa_meaning };

std::string_view to_string(PromptKind k);

struct GenPrompt {
    std::string text;
    PromptKind kind = PromptKind::premise;
    std::string domain;
    std::optional<int> target_class;  // set for hypothesis prompts
};

/// Premise prompt texts per domain. Most domains have one text; "government"
/// has four sub-genres used round-robin.
const std::vector<std::string>& premise_prompt_texts(std::string_view domain);
std::vector<std::string> premise_prompt_domains();
/// The shorter wording used in the method description for the magazine genre.
inline constexpr std::string_view kMagazinePromptParaphrase =
    "Provide a sentence from a popular magazine article";

/// `round` picks the sub-genre for multi-prompt domains. Unknown domain:
/// ConfigError.
GenPrompt build_premise_prompt(std::string_view domain, std::size_t round = 0);

/// Keeps the first sentence of a reply if it has at least 8 characters and
/// does not end in '?'; otherwise tries the second sentence once.
std::optional<std::string> filter_premise(std::string_view reply);
/// Splits on '.', '!' or '?' followed by whitespace; trims each piece.
std::vector<std::string> split_sentences(std::string_view text);

struct Demonstration {
    std::string premise;
    std::string hypothesis;
};

/// Three in-context demonstrations per class.
struct ExampleBank {
    std::array<std::vector<Demonstration>, kNumClasses> per_class;

    /// Throws ConfigError unless every class has exactly three entries.
    void validate() const;

    /// Small hand-written bank; not taken from any dataset.
    static ExampleBank builtin();
    /// First three examples of each class of `split` after a seeded shuffle.
    static ExampleBank from_dataset(const Dataset& ds, const std::string& split, std::uint64_t seed);
    /// JSON: {"entailment": [{"premise":..,"hypothesis":..}, ...], ...}
    static ExampleBank load(const std::filesystem::path& path);
};

std::string_view hypothesis_instruction(int target_class);
GenPrompt build_hypothesis_prompt(std::string_view premise, int target_class,
                                  const ExampleBank& bank, std::string domain = {});

struct ConjunctionList {
    std::vector<std::string> words;

    /// Throws ConfigError unless there are 60 unique lowercase single words.
    void validate() const;
    static ConjunctionList builtin();
    /// One word per line; blank lines and '#' comments ignored.
    static ConjunctionList load(const std::filesystem::path& path);
};

GenPrompt build_woa_sentence_prompt(std::string_view conjunction);
GenPrompt build_woa_second_prompt(const std::vector<std::string>& words);
GenPrompt build_coherence_prompt(std::string_view sentence);
GenPrompt build_meaning_prompt(std::string_view first, std::string_view second);

/// Tokens of `sentence` minus the first occurrence of `conjunction`, in a
/// seeded random order. ContractError if the conjunction is absent.
std::vector<std::string> shuffle_words_remove_conjunction(std::string_view sentence,
                                                          std::string_view conjunction,
                                                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Completion clients

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 64;
    double temperature = 0.8;
    std::vector<std::string> stop;
    std::uint64_t sample_seed = 0;
};

struct CompletionResult {
    bool ok = false;
    std::string text;
    std::string error;
};

class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual std::string name() const = 0;
    virtual std::size_t max_parallel() const { return 1; }
    /// One request. Implementations report failures through `ok=false`
    /// after exhausting their retry policy.
    virtual CompletionResult complete(const CompletionRequest& req) = 0;
    /// Results are in request order regardless of completion order.
    virtual std::vector<CompletionResult> complete_batch(const std::vector<CompletionRequest>& reqs);
};

/// Offline stand-in for a text generator, answering from the synthetic
/// language. Replies depend only on (seed, sample_seed, prompt).
struct MockOptions {
    std::uint64_t seed = 0;
    double premise_reject_rate = 0.15;  // reply fails the premise filter
    double second_sentence_rate = 0.15; // reply leads with a short throwaway sentence
    double label_noise = 0.3;           // hypothesis written for a class other than requested
    bool rotate_noise = false;          // noisy hypotheses use class (c+1)%3 instead of a random other class
    double coherence_yes_rate = 0.9;
    double meaning_no_rate = 0.85;
};

class MockCompletionClient : public CompletionClient {
public:
    MockCompletionClient(const SynthConfig& world, MockOptions opts);

    std::string name() const override { return "mock"; }
    std::size_t max_parallel() const override { return 4; }
    CompletionResult complete(const CompletionRequest& req) override;

    std::size_t calls() const { return calls_; }

private:
    std::string premise_reply(Rng& rng, const std::string& prompt) const;
    std::string hypothesis_reply(Rng& rng, const std::string& prompt) const;
    std::string woa_sentence_reply(Rng& rng, const std::string& prompt) const;
    std::string woa_second_reply(Rng& rng, const std::string& prompt) const;

    SynthLanguage lang_;
    MockOptions opts_;
    std::size_t calls_ = 0;
};

struct HttpClientOptions {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string model;     // forwarded when non-empty
    std::string credential_env = "ROBUSTKD_LLM_API_KEY";
    std::size_t max_parallel = 4;
    int attempts = 3;
    int backoff_ms = 500;  // doubled after each failed attempt
    int timeout_s = 60;
};

/// POSTs {prompt, max_tokens, temperature, stop} to `<base_url>/completions`
/// and reads choices[0].text.
class HttpCompletionClient : public CompletionClient {
public:
    explicit HttpCompletionClient(HttpClientOptions opts);

    std::string name() const override { return "http:" + opts_.base_url; }
    std::size_t max_parallel() const override { return opts_.max_parallel; }
    CompletionResult complete(const CompletionRequest& req) override;
    std::vector<CompletionResult> complete_batch(const std::vector<CompletionRequest>& reqs) override;

private:
    HttpClientOptions opts_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // base path without trailing slash
    std::string credential_;
};

// ---------------------------------------------------------------------------
// Pipelines

struct GenerationReport {
    std::size_t candidates = 0;
    std::size_t requests = 0;
    std::size_t premises_rejected = 0;
    std::size_t dropped_missing_conjunction = 0;
    std::size_t dropped_incoherent = 0;
    std::size_t dropped_same_meaning = 0;
    std::size_t emitted = 0;
    bool target_reached = false;
    std::vector<std::string> failed_prompts;

    std::string to_json() const;
};

struct GenerationResult {
    std::vector<NLIExample> examples;
    GenerationReport report;

    Dataset to_dataset(const std::string& split) const;
};

struct DtaOptions {
    std::vector<std::string> domains;
    std::size_t n_target = 0;
    std::uint64_t seed = 0;
    int max_tokens = 64;
    double temperature = 0.8;
    std::size_t max_candidates_per_example = 20;  // give up after this many premise attempts per quota slot
};

/// Premise prompt, filter, then one hypothesis per class for each accepted
/// premise. Output is unlabelled, with the conditioning class recorded.
GenerationResult generate_dta(const DtaOptions& opts, CompletionClient& client, const ExampleBank& bank);

struct WoaOptions {
    std::size_t n_target = 0;
    std::uint64_t seed = 0;
    std::string domain = "woa";
    int max_tokens = 64;
    double temperature = 0.8;
    std::size_t max_candidates_per_example = 20;
};

GenerationResult generate_woa(const WoaOptions& opts, const ConjunctionList& conjunctions,
                              CompletionClient& client);

/// Interprets a checker reply: true for yes, false for no, nullopt otherwise.
std::optional<bool> parse_yes_no(std::string_view reply);

}  // namespace rkd
