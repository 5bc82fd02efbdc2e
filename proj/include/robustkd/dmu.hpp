#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "robustkd/common.hpp"

namespace rkd {

struct ModelParams;
struct EncodedSplit;

enum class MinorityMode { student, teacher, ensemble_any };
std::string_view to_string(MinorityMode m);
MinorityMode minority_mode_from_string(std::string_view s);

struct MinoritySet {
    std::set<std::string> ids;
    MinorityMode mode = MinorityMode::student;
    std::vector<std::string> source_models;
};

/// Minority = examples some consulted model gets wrong (argmax != gold).
/// `predictions[m][i]` is model m's distribution for example i of `ids`.
/// student/teacher modes take exactly one model.
MinoritySet identify_minority(const std::vector<std::vector<Probs>>& predictions,
                              const std::vector<std::string>& ids,
                              const std::vector<std::optional<int>>& gold, MinorityMode mode,
                              std::vector<std::string> model_names = {});

/// Runs forward passes of each model over a labelled split.
MinoritySet identify_minority(const std::vector<const ModelParams*>& models,
                              const EncodedSplit& data, MinorityMode mode,
                              std::vector<std::string> model_names = {});

/// Teacher-identified minority set used by the JTT comparator.
MinoritySet jtt_config(const ModelParams& teacher, const EncodedSplit& data,
                       std::string teacher_name = "teacher");

/// Ordered multiset of ids; repetition encodes upsampling.
struct TrainingManifest {
    std::vector<std::string> order;
    std::map<std::string, std::size_t> multiplicity;

    std::size_t size() const { return order.size(); }
};

/// Minority ids appear `factor` times, all others once. Originals keep
/// dataset order; extra copies follow, also in dataset order.
TrainingManifest build_manifest(const std::vector<std::string>& train_ids,
                                const MinoritySet& minority, std::size_t factor);

/// Generalised form: per-id multiplicities (>= 1), same ordering rule.
TrainingManifest build_manifest(const std::vector<std::string>& ids,
                                const std::map<std::string, std::size_t>& factors);

/// `# mode=<mode> models=<a,b,...>` then one id per line, sorted.
std::string format_minority_set(const MinoritySet& m);
MinoritySet parse_minority_set(std::string_view text);
void write_minority_set(const MinoritySet& m, const std::filesystem::path& path);
MinoritySet read_minority_set(const std::filesystem::path& path);

}  // namespace rkd
