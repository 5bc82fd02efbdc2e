#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "robustkd/data.hpp"
#include "robustkd/tinynet.hpp"

namespace rkd {

/// A dataset with every example already hashed into a FeatureVector.
struct EncodedSplit {
    std::vector<std::string> ids;
    std::vector<FeatureVector> features;
    std::vector<std::optional<int>> gold;
    std::vector<Provenance> provenance;
    std::vector<std::optional<int>> conditioned;

    std::size_t size() const { return ids.size(); }
    bool all_labelled() const;

    static EncodedSplit from(const Dataset& ds, std::size_t dim);
    /// Concatenation; ids must stay unique.
    static EncodedSplit concat(const EncodedSplit& a, const EncodedSplit& b);
    EncodedSplit select(const std::vector<std::size_t>& rows) const;
    std::unordered_map<std::string, std::size_t> index() const;
};

std::vector<Probs> predict(const ModelParams& params, const EncodedSplit& data);
PredictionMatrix predict_matrix(const ModelParams& params, const EncodedSplit& data);

}  // namespace rkd
