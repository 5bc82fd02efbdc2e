#include "robustkd/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "robustkd/encoded.hpp"

namespace rkd {

double CorrectnessVector::mean() const {
    if (correct.empty()) return 0.0;
    const auto n = std::count(correct.begin(), correct.end(), true);
    return static_cast<double>(n) / static_cast<double>(correct.size());
}

AccuracyResult accuracy(const std::vector<Probs>& predictions, const EncodedSplit& split) {
    if (split.size() == 0) throw ContractError("accuracy of an empty split is undefined");
    if (predictions.size() != split.size()) throw ContractError("prediction count does not match split");
    AccuracyResult out;
    out.correctness.ids = split.ids;
    out.correctness.correct.resize(split.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (!split.gold[i]) throw ContractError("example '" + split.ids[i] + "' has no gold label");
        const bool ok = argmax(predictions[i]) == *split.gold[i];
        out.correctness.correct[i] = ok;
        hits += ok ? 1 : 0;
    }
    out.value = static_cast<double>(hits) / static_cast<double>(split.size());
    return out;
}

AccuracyResult accuracy(const ModelParams& model, const EncodedSplit& split) {
    if (split.size() == 0) throw ContractError("accuracy of an empty split is undefined");
    return accuracy(predict(model, split), split);
}

SignificanceResult bootstrap_pvalue(const CorrectnessVector& a, const CorrectnessVector& b,
                                    std::size_t resamples, std::uint64_t seed) {
    if (a.size() == 0) throw ContractError("bootstrap needs at least one example");
    if (a.ids != b.ids) throw ContractError("bootstrap inputs cover different ids");
    if (resamples == 0) throw ContractError("bootstrap needs at least one resample");
    const std::size_t n = a.size();
    std::vector<int> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = int(a.correct[i]) - int(b.correct[i]);

    SignificanceResult out;
    out.resamples = resamples;
    out.seed = seed;
    out.mean_diff = a.mean() - b.mean();

    const bool degenerate = std::all_of(diff.begin(), diff.end(), [](int d) { return d == 0; });
    std::size_t at_or_below = 0, at_or_above = 0;
    if (degenerate) {
        at_or_below = at_or_above = resamples;
    } else {
        for (std::size_t j = 0; j < resamples; ++j) {
            Rng rng(derive_seed(seed, 0xb007u, j));
            long long total = 0;
            for (std::size_t k = 0; k < n; ++k) total += diff[rng.below(n)];
            if (total <= 0) ++at_or_below;
            if (total >= 0) ++at_or_above;
        }
    }
    const double tail = static_cast<double>(std::min(at_or_below, at_or_above));
    out.p_value = std::min(1.0, 2.0 * tail / static_cast<double>(resamples));
    return out;
}

std::string format_p_value(double p) {
    if (p < 1e-4) return "<0.0001";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", p);
    return buf;
}

const SummaryRow& SummaryTable::row(const std::string& method) const {
    for (const auto& r : rows)
        if (r.method == method) return r;
    throw ContractError("summary has no method '" + method + "'");
}

std::string SummaryTable::to_tsv() const {
    std::ostringstream os;
    os << "method\tseeds";
    for (const auto& s : splits) os << '\t' << s << "\tp(" << s << ")";
    os << '\n';
    char buf[32];
    for (const auto& r : rows) {
        os << r.method << '\t' << r.seeds;
        for (const auto& s : splits) {
            auto it = r.mean_accuracy.find(s);
            std::snprintf(buf, sizeof buf, "%.2f", it == r.mean_accuracy.end() ? 0.0 : 100.0 * it->second);
            os << '\t' << buf << '\t';
            auto sig = r.vs_baseline.find(s);
            os << (sig == r.vs_baseline.end() ? "-" : format_p_value(sig->second.p_value));
        }
        os << '\n';
    }
    return os.str();
}

std::string SummaryTable::to_json() const {
    using nlohmann::json;
    json j;
    j["baseline"] = baseline;
    j["splits"] = splits;
    j["rows"] = json::array();
    for (const auto& r : rows) {
        json row;
        row["method"] = r.method;
        row["seeds"] = r.seeds;
        row["mean_accuracy"] = r.mean_accuracy;
        json sig = json::object();
        for (const auto& [split, s] : r.vs_baseline) {
            sig[split] = {{"p_value", s.p_value},
                          {"p_display", format_p_value(s.p_value)},
                          {"mean_diff", s.mean_diff},
                          {"resamples", s.resamples},
                          {"seed", s.seed}};
        }
        row["vs_baseline"] = sig;
        j["rows"].push_back(row);
    }
    return j.dump(2) + "\n";
}

CorrectnessVector pool_correctness(const std::vector<const RunRecord*>& records,
                                   const std::string& split) {
    CorrectnessVector pooled;
    for (const auto* r : records) {
        auto it = r->correctness.find(split);
        if (it == r->correctness.end())
            throw ContractError("run of '" + r->method + "' has no correctness for split '" + split + "'");
        for (std::size_t i = 0; i < it->second.size(); ++i) {
            pooled.ids.push_back(std::to_string(r->seed) + "/" + it->second.ids[i]);
            pooled.correct.push_back(it->second.correct[i]);
        }
    }
    return pooled;
}

SummaryTable aggregate_seeds(const std::vector<RunRecord>& records, const std::string& baseline,
                             std::size_t resamples, std::uint64_t seed) {
    SummaryTable table;
    table.baseline = baseline;
    std::vector<std::string> methods;
    std::map<std::string, std::vector<const RunRecord*>> by_method;
    for (const auto& r : records) {
        if (r.failed) continue;
        if (!by_method.count(r.method)) methods.push_back(r.method);
        by_method[r.method].push_back(&r);
    }
    if (methods.empty()) throw ContractError("no successful runs to aggregate");

    std::set<std::string> split_set;
    for (const auto& [name, _] : by_method.begin()->second.front()->split_accuracy) split_set.insert(name);
    table.splits.assign(split_set.begin(), split_set.end());

    for (auto& [method, runs] : by_method) {
        std::sort(runs.begin(), runs.end(),
                  [](const RunRecord* x, const RunRecord* y) { return x->seed < y->seed; });
        for (const auto* r : runs) {
            std::set<std::string> s;
            for (const auto& [name, _] : r->split_accuracy) s.insert(name);
            if (s != split_set) throw ContractError("runs disagree on evaluated splits");
        }
    }
    const std::size_t n_seeds = by_method.begin()->second.size();
    for (const auto& [method, runs] : by_method)
        if (runs.size() != n_seeds)
            throw ContractError("method '" + method + "' has " + std::to_string(runs.size()) +
                                " successful seeds, expected " + std::to_string(n_seeds));

    const auto base_it = by_method.find(baseline);
    for (const auto& method : methods) {
        const auto& runs = by_method[method];
        SummaryRow row;
        row.method = method;
        row.seeds = runs.size();
        for (const auto& split : table.splits) {
            double sum = 0.0;
            for (const auto* r : runs) sum += r->split_accuracy.at(split);
            row.mean_accuracy[split] = sum / static_cast<double>(runs.size());
            if (base_it != by_method.end() && method != baseline) {
                for (std::size_t k = 0; k < runs.size(); ++k)
                    if (runs[k]->seed != base_it->second[k]->seed)
                        throw ContractError("seed lists differ between '" + method + "' and baseline");
                row.vs_baseline[split] = bootstrap_pvalue(pool_correctness(runs, split),
                                                          pool_correctness(base_it->second, split),
                                                          resamples, seed);
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace rkd
