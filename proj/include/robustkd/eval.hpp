#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "robustkd/common.hpp"

namespace rkd {

struct ModelParams;
struct EncodedSplit;

/// Per-example correctness over a fixed evaluation split.
struct CorrectnessVector {
    std::vector<std::string> ids;
    std::vector<bool> correct;

    std::size_t size() const { return ids.size(); }
    double mean() const;
};

struct AccuracyResult {
    double value = 0.0;
    CorrectnessVector correctness;
};

/// Fraction of examples whose argmax (lowest-index ties) equals gold.
AccuracyResult accuracy(const std::vector<Probs>& predictions, const EncodedSplit& split);
AccuracyResult accuracy(const ModelParams& model, const EncodedSplit& split);

struct SignificanceResult {
    double p_value = 1.0;
    double mean_diff = 0.0;  // mean(a) - mean(b)
    std::size_t resamples = 0;
    std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultResamples = 10000;

/// Two-tailed paired bootstrap. Each resample draws N ids with replacement
/// using a generator seeded from (seed, resample index), so the result does
/// not depend on evaluation order.
SignificanceResult bootstrap_pvalue(const CorrectnessVector& a, const CorrectnessVector& b,
                                    std::size_t resamples = kDefaultResamples,
                                    std::uint64_t seed = 0);

/// "<0.0001" below 1e-4, otherwise four decimals.
std::string format_p_value(double p);

/// One finished run of one method at one seed.
struct RunRecord {
    std::string method;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure;
    std::vector<double> dev_accuracy;  // per distillation (or training) epoch
    int selected_epoch = -1;           // 1-based; -1 when no epoch selection happened
    std::map<std::string, double> split_accuracy;
    std::map<std::string, CorrectnessVector> correctness;
    std::map<std::string, std::string> config;  // flattened config snapshot
};

struct SummaryRow {
    std::string method;
    std::size_t seeds = 0;
    std::map<std::string, double> mean_accuracy;
    std::map<std::string, SignificanceResult> vs_baseline;  // by split
};

struct SummaryTable {
    std::string baseline;
    std::vector<std::string> splits;
    std::vector<SummaryRow> rows;

    const SummaryRow& row(const std::string& method) const;
    /// Tab-separated: method, seeds, then per split accuracy (%) and p-value.
    std::string to_tsv() const;
    std::string to_json() const;
};

/// Correctness vectors of several seeds concatenated, seed-major then id.
CorrectnessVector pool_correctness(const std::vector<const RunRecord*>& records,
                                   const std::string& split);

/// Per-method, per-split mean accuracy; pooled paired bootstrap of each
/// method against `baseline`. Every method must have the same seed count.
SummaryTable aggregate_seeds(const std::vector<RunRecord>& records, const std::string& baseline,
                             std::size_t resamples = kDefaultResamples, std::uint64_t seed = 0);

}  // namespace rkd
