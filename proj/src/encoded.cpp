#include "robustkd/encoded.hpp"

#include <algorithm>

namespace rkd {

bool EncodedSplit::all_labelled() const {
    return std::all_of(gold.begin(), gold.end(), [](const auto& g) { return g.has_value(); });
}

EncodedSplit EncodedSplit::from(const Dataset& ds, std::size_t dim) {
    EncodedSplit out;
    for (const auto& ex : ds.examples()) {
        out.ids.push_back(ex.id);
        out.features.push_back(encode(ex.premise, ex.hypothesis, dim));
        out.gold.push_back(ex.gold);
        out.provenance.push_back(ex.provenance);
        out.conditioned.push_back(ex.conditioned_class);
    }
    return out;
}

EncodedSplit EncodedSplit::concat(const EncodedSplit& a, const EncodedSplit& b) {
    EncodedSplit out = a;
    auto idx = a.index();
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (idx.count(b.ids[i])) throw IntegrityError("duplicate id '" + b.ids[i] + "' in concatenation");
        out.ids.push_back(b.ids[i]);
        out.features.push_back(b.features[i]);
        out.gold.push_back(b.gold[i]);
        out.provenance.push_back(b.provenance[i]);
        out.conditioned.push_back(b.conditioned[i]);
    }
    return out;
}

EncodedSplit EncodedSplit::select(const std::vector<std::size_t>& rows) const {
    EncodedSplit out;
    for (auto r : rows) {
        out.ids.push_back(ids.at(r));
        out.features.push_back(features[r]);
        out.gold.push_back(gold[r]);
        out.provenance.push_back(provenance[r]);
        out.conditioned.push_back(conditioned[r]);
    }
    return out;
}

std::unordered_map<std::string, std::size_t> EncodedSplit::index() const {
    std::unordered_map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], i);
    return out;
}

std::vector<Probs> predict(const ModelParams& params, const EncodedSplit& data) {
    std::vector<Probs> out;
    out.reserve(data.size());
    Activations act;
    for (const auto& x : data.features) {
        forward(params, x, act);
        out.push_back(act.probs);
    }
    return out;
}

PredictionMatrix predict_matrix(const ModelParams& params, const EncodedSplit& data) {
    return PredictionMatrix{data.ids, predict(params, data)};
}

}  // namespace rkd
