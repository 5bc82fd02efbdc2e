#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "robustkd/common.hpp"

namespace rkd {

enum class Provenance { original, dta, woa };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

/// Fixed label encoding: entailment=0, neutral=1, contradiction=2.
struct LabelCodec {
    static constexpr std::string_view names[kNumClasses] = {"entailment", "neutral",
                                                            "contradiction"};
    static std::string_view name(int label);
    /// Throws ParseError (line 0) on unknown label text.
    static int index(std::string_view text);
};

struct NLIExample {
    std::string id;
    std::string premise;
    std::string hypothesis;
    std::optional<int> gold;
    std::string domain;
    Provenance provenance = Provenance::original;
    // Side channel for generated data: the class the hypothesis was
    // conditioned on. Only the labelled-augmentation baseline reads it.
    std::optional<int> conditioned_class;

    bool labelled() const { return gold.has_value(); }
};

/// Throws ValidationError if the record breaks an NLIExample invariant.
void validate_example(const NLIExample& ex);

/// Ordered examples plus named id subsets. Immutable once built; use the
/// builder-style `add`/`set_split` only while constructing.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<NLIExample> examples);

    void add(NLIExample ex);
    void set_split(const std::string& name, std::vector<std::string> ids);

    const std::vector<NLIExample>& examples() const { return examples_; }
    std::size_t size() const { return examples_.size(); }
    bool empty() const { return examples_.empty(); }
    const NLIExample& at(std::string_view id) const;
    bool contains(std::string_view id) const;

    const std::map<std::string, std::vector<std::string>>& splits() const { return splits_; }
    const std::vector<std::string>& split_ids(const std::string& name) const;
    bool has_split(const std::string& name) const { return splits_.count(name) != 0; }
    /// Examples of a split, in split order.
    Dataset subset(const std::string& split) const;
    Dataset subset(const std::vector<std::string>& ids) const;
    std::vector<std::string> ids() const;

private:
    std::vector<NLIExample> examples_;
    std::unordered_map<std::string, std::size_t> index_;
    std::map<std::string, std::vector<std::string>> splits_;
};

// Line-delimited JSON records:
//   {"id", "premise", "hypothesis", "gold"?, "domain", "provenance", "conditioned_class"?}
// `gold` and `conditioned_class` are label names. Unknown fields are ignored.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::string_view text);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string format_dataset(const Dataset& ds);

/// Per-model predicted probabilities keyed by example id, in row order.
struct PredictionMatrix {
    std::vector<std::string> ids;
    std::vector<Probs> rows;

    std::size_t size() const { return ids.size(); }
    const Probs& row(std::string_view id) const;
};

/// CSV with header `id,p0,p1,p2`; values printed with 17 significant digits.
void write_predictions(const PredictionMatrix& m, const std::filesystem::path& path);
std::string format_predictions(const PredictionMatrix& m);
PredictionMatrix read_predictions(const std::filesystem::path& path);
PredictionMatrix parse_predictions(std::string_view text);

/// A corpus directory holds one `<split>.jsonl` per split plus optional
/// `<name>.ids` id lists for planted subsets (e.g. train-minority).
Dataset load_corpus_dir(const std::filesystem::path& dir);
void write_corpus_dir(const Dataset& ds, const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace rkd
