#include "robustkd/dmu.hpp"

#include <sstream>

#include "robustkd/data.hpp"
#include "robustkd/encoded.hpp"

namespace rkd {

std::string_view to_string(MinorityMode m) {
    switch (m) {
        case MinorityMode::student: return "student";
        case MinorityMode::teacher: return "teacher";
        case MinorityMode::ensemble_any: return "ensemble_any";
    }
    return "student";
}

MinorityMode minority_mode_from_string(std::string_view s) {
    if (s == "student") return MinorityMode::student;
    if (s == "teacher") return MinorityMode::teacher;
    if (s == "ensemble_any") return MinorityMode::ensemble_any;
    throw ConfigError("unknown minority mode '" + std::string(s) + "'");
}

MinoritySet identify_minority(const std::vector<std::vector<Probs>>& predictions,
                              const std::vector<std::string>& ids,
                              const std::vector<std::optional<int>>& gold, MinorityMode mode,
                              std::vector<std::string> model_names) {
    if (predictions.empty()) throw ContractError("identify_minority needs at least one model");
    if (mode != MinorityMode::ensemble_any && predictions.size() != 1)
        throw ContractError("student/teacher minority modes take exactly one model");
    if (gold.size() != ids.size()) throw ContractError("ids and gold labels differ in length");
    for (std::size_t i = 0; i < gold.size(); ++i)
        if (!gold[i]) throw ContractError("example '" + ids[i] + "' has no gold label");
    if (model_names.empty())
        for (std::size_t m = 0; m < predictions.size(); ++m)
            model_names.push_back("model" + std::to_string(m));

    MinoritySet out;
    out.mode = mode;
    out.source_models = std::move(model_names);
    for (const auto& preds : predictions) {
        if (preds.size() != ids.size()) throw ContractError("prediction count does not match data");
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (argmax(preds[i]) != *gold[i]) out.ids.insert(ids[i]);
    }
    return out;
}

MinoritySet identify_minority(const std::vector<const ModelParams*>& models,
                              const EncodedSplit& data, MinorityMode mode,
                              std::vector<std::string> model_names) {
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!data.gold[i]) throw ContractError("example '" + data.ids[i] + "' has no gold label");
    std::vector<std::vector<Probs>> preds;
    for (const auto* m : models) preds.push_back(predict(*m, data));
    return identify_minority(preds, data.ids, data.gold, mode, std::move(model_names));
}

MinoritySet jtt_config(const ModelParams& teacher, const EncodedSplit& data, std::string teacher_name) {
    return identify_minority({&teacher}, data, MinorityMode::teacher, {std::move(teacher_name)});
}

TrainingManifest build_manifest(const std::vector<std::string>& ids,
                                const std::map<std::string, std::size_t>& factors) {
    TrainingManifest m;
    for (const auto& [id, f] : factors)
        if (f < 1) throw ContractError("upsampling factor for '" + id + "' must be >= 1");
    auto factor_of = [&](const std::string& id) {
        auto it = factors.find(id);
        return it == factors.end() ? std::size_t{1} : it->second;
    };
    for (const auto& id : ids) {
        if (m.multiplicity.count(id)) throw ContractError("duplicate id '" + id + "' in manifest input");
        m.multiplicity[id] = factor_of(id);
        m.order.push_back(id);
    }
    std::size_t max_factor = 1;
    for (const auto& id : ids) max_factor = std::max(max_factor, factor_of(id));
    // extra copies: round r appends every id that still needs a copy, in dataset order
    for (std::size_t round = 1; round < max_factor; ++round)
        for (const auto& id : ids)
            if (factor_of(id) > round) m.order.push_back(id);
    return m;
}

TrainingManifest build_manifest(const std::vector<std::string>& train_ids,
                                const MinoritySet& minority, std::size_t factor) {
    if (factor < 1) throw ContractError("upsampling factor must be >= 1");
    std::set<std::string> known(train_ids.begin(), train_ids.end());
    std::map<std::string, std::size_t> factors;
    for (const auto& id : minority.ids) {
        if (!known.count(id)) throw ContractError("minority id '" + id + "' is not a train id");
        factors[id] = factor;
    }
    return build_manifest(train_ids, factors);
}

std::string format_minority_set(const MinoritySet& m) {
    std::ostringstream os;
    os << "# mode=" << to_string(m.mode) << " models=";
    for (std::size_t i = 0; i < m.source_models.size(); ++i) os << (i ? "," : "") << m.source_models[i];
    os << '\n';
    for (const auto& id : m.ids) os << id << '\n';
    return os.str();
}

MinoritySet parse_minority_set(std::string_view text) {
    MinoritySet m;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line.rfind("# mode=", 0) != 0)
        throw ParseError("line 1: expected '# mode=<mode> models=<ids>' header", 1);
    std::istringstream header(line.substr(2));
    std::string field;
    while (header >> field) {
        if (field.rfind("mode=", 0) == 0) {
            m.mode = minority_mode_from_string(field.substr(5));
        } else if (field.rfind("models=", 0) == 0) {
            std::istringstream names(field.substr(7));
            std::string name;
            while (std::getline(names, name, ','))
                if (!name.empty()) m.source_models.push_back(name);
        }
    }
    while (std::getline(in, line))
        if (!line.empty()) m.ids.insert(line);
    return m;
}

void write_minority_set(const MinoritySet& m, const std::filesystem::path& path) {
    write_text_file(path, format_minority_set(m));
}

MinoritySet read_minority_set(const std::filesystem::path& path) {
    return parse_minority_set(read_text_file(path));
}

}  // namespace rkd
