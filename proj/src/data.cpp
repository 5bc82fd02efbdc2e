#include "robustkd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rkd {

using nlohmann::json;

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

}  // namespace

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::original: return "original";
        case Provenance::dta: return "dta";
        case Provenance::woa: return "woa";
    }
    return "original";
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "original") return Provenance::original;
    if (s == "dta") return Provenance::dta;
    if (s == "woa") return Provenance::woa;
    throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

std::string_view LabelCodec::name(int label) {
    if (label < 0 || label >= kNumClasses)
        throw ContractError("label index out of range: " + std::to_string(label));
    return names[label];
}

int LabelCodec::index(std::string_view text) {
    for (int i = 0; i < kNumClasses; ++i)
        if (names[i] == text) return i;
    throw ParseError("unknown label '" + std::string(text) + "'", 0);
}

void validate_example(const NLIExample& ex) {
    if (ex.id.empty()) throw ValidationError("example id is empty");
    if (blank(ex.premise)) throw ValidationError("example '" + ex.id + "' has empty premise");
    if (blank(ex.hypothesis))
        throw ValidationError("example '" + ex.id + "' has empty hypothesis");
    if (ex.gold && (*ex.gold < 0 || *ex.gold >= kNumClasses))
        throw ValidationError("example '" + ex.id + "' has gold label out of range");
    if (ex.conditioned_class && (*ex.conditioned_class < 0 || *ex.conditioned_class >= kNumClasses))
        throw ValidationError("example '" + ex.id + "' has conditioned class out of range");
}

Dataset::Dataset(std::vector<NLIExample> examples) {
    examples_.reserve(examples.size());
    for (auto& ex : examples) add(std::move(ex));
}

void Dataset::add(NLIExample ex) {
    validate_example(ex);
    if (index_.count(ex.id)) throw IntegrityError("duplicate example id '" + ex.id + "'");
    index_.emplace(ex.id, examples_.size());
    examples_.push_back(std::move(ex));
}

void Dataset::set_split(const std::string& name, std::vector<std::string> ids) {
    for (const auto& id : ids)
        if (!contains(id))
            throw IntegrityError("split '" + name + "' references unknown id '" + id + "'");
    // train and test must not share examples
    auto disjoint_check = [&](const std::string& a, const std::string& b) {
        const std::vector<std::string>* other = nullptr;
        if (name == a && has_split(b)) other = &splits_.at(b);
        if (name == b && has_split(a)) other = &splits_.at(a);
        if (!other) return;
        std::set<std::string> seen(other->begin(), other->end());
        for (const auto& id : ids)
            if (seen.count(id)) throw IntegrityError("id '" + id + "' is in both train and test");
    };
    disjoint_check("train", "test");
    splits_[name] = std::move(ids);
}

const NLIExample& Dataset::at(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw ContractError("unknown example id '" + std::string(id) + "'");
    return examples_[it->second];
}

bool Dataset::contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }

const std::vector<std::string>& Dataset::split_ids(const std::string& name) const {
    auto it = splits_.find(name);
    if (it == splits_.end()) throw ContractError("dataset has no split '" + name + "'");
    return it->second;
}

Dataset Dataset::subset(const std::string& split) const { return subset(split_ids(split)); }

Dataset Dataset::subset(const std::vector<std::string>& ids) const {
    Dataset out;
    for (const auto& id : ids) out.add(at(id));
    return out;
}

std::vector<std::string> Dataset::ids() const {
    std::vector<std::string> out;
    out.reserve(examples_.size());
    for (const auto& ex : examples_) out.push_back(ex.id);
    return out;
}

Dataset parse_dataset(std::string_view text) {
    Dataset ds;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        if (blank(lines[i])) continue;
        auto fail = [&](const std::string& msg) -> ParseError {
            return ParseError("line " + std::to_string(lineno) + ": " + msg, lineno);
        };
        json rec;
        try {
            rec = json::parse(lines[i]);
        } catch (const json::parse_error& e) {
            throw fail(std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) throw fail("record is not an object");
        auto req_string = [&](const char* key) -> std::string {
            if (!rec.contains(key)) throw fail(std::string("missing field \"") + key + "\"");
            if (!rec[key].is_string()) throw fail(std::string("field \"") + key + "\" is not a string");
            return rec[key].get<std::string>();
        };
        auto opt_label = [&](const char* key) -> std::optional<int> {
            if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
            if (!rec[key].is_string()) throw fail(std::string("field \"") + key + "\" is not a string");
            try {
                return LabelCodec::index(rec[key].get<std::string>());
            } catch (const ParseError& e) {
                throw fail(e.what());
            }
        };
        NLIExample ex;
        ex.id = req_string("id");
        ex.premise = req_string("premise");
        ex.hypothesis = req_string("hypothesis");
        ex.domain = req_string("domain");
        ex.gold = opt_label("gold");
        ex.conditioned_class = opt_label("conditioned_class");
        try {
            ex.provenance = provenance_from_string(req_string("provenance"));
            validate_example(ex);
        } catch (const ValidationError& e) {
            throw fail(e.what());
        }
        ds.add(std::move(ex));  // duplicate ids raise IntegrityError
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_text_file(path)); }

std::string format_dataset(const Dataset& ds) {
    std::string out;
    for (const auto& ex : ds.examples()) {
        json rec = json::object();
        rec["id"] = ex.id;
        rec["premise"] = ex.premise;
        rec["hypothesis"] = ex.hypothesis;
        if (ex.gold) rec["gold"] = LabelCodec::name(*ex.gold);
        rec["domain"] = ex.domain;
        rec["provenance"] = to_string(ex.provenance);
        if (ex.conditioned_class) rec["conditioned_class"] = LabelCodec::name(*ex.conditioned_class);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    write_text_file(path, format_dataset(ds));
}

const Probs& PredictionMatrix::row(std::string_view id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == id) return rows[i];
    throw ContractError("prediction matrix has no row for '" + std::string(id) + "'");
}

std::string format_predictions(const PredictionMatrix& m) {
    if (m.ids.size() != m.rows.size()) throw ContractError("prediction matrix ids/rows mismatch");
    std::string out = "id,p0,p1,p2\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& r = m.rows[i];
        for (double v : r)
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError("row '" + m.ids[i] + "' has a negative or non-finite entry");
        if (!is_distribution(r, 1e-6) || r.size() != kNumClasses)
            throw ValidationError("row '" + m.ids[i] + "' does not sum to 1");
        if (m.ids[i].find(',') != std::string::npos)
            throw ValidationError("row id '" + m.ids[i] + "' contains a comma");
        out += m.ids[i];
        for (double v : r) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

void write_predictions(const PredictionMatrix& m, const std::filesystem::path& path) {
    write_text_file(path, format_predictions(m));
}

PredictionMatrix parse_predictions(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "id,p0,p1,p2")
        throw ParseError("line 1: expected header id,p0,p1,p2", 1);
    PredictionMatrix m;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        auto line = lines[i];
        if (blank(line)) continue;
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 1 + kNumClasses)
            throw ParseError("line " + std::to_string(lineno) + ": expected 4 columns", lineno);
        Probs row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            double v = 0.0;
            // strtod accepts everything %.17g produces; from_chars for doubles is
            // not available in every toolchain we build on.
            std::string cell(cells[c]);
            char* end = nullptr;
            v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size())
                throw ParseError("line " + std::to_string(lineno) + ": bad number '" + cell + "'",
                                 lineno);
            if (v < 0.0 || !std::isfinite(v))
                throw ValidationError("line " + std::to_string(lineno) + ": negative entry");
            row.push_back(v);
        }
        if (!is_distribution(row, 1e-6))
            throw ValidationError("line " + std::to_string(lineno) + ": row does not sum to 1");
        m.ids.emplace_back(cells[0]);
        m.rows.push_back(std::move(row));
    }
    return m;
}

PredictionMatrix read_predictions(const std::filesystem::path& path) {
    return parse_predictions(read_text_file(path));
}

Dataset load_corpus_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("corpus directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    Dataset all;
    std::vector<std::pair<std::string, std::vector<std::string>>> id_lists;
    for (const auto& f : files) {
        if (f.extension() == ".jsonl") {
            Dataset part = load_dataset(f);
            std::vector<std::string> ids = part.ids();
            for (const auto& ex : part.examples()) all.add(ex);
            id_lists.emplace_back(f.stem().string(), std::move(ids));
        } else if (f.extension() == ".ids") {
            std::vector<std::string> ids;
            const std::string text = read_text_file(f);
            for (auto line : split_lines(text))
                if (!blank(line) && line[0] != '#') ids.emplace_back(line);
            id_lists.emplace_back(f.stem().string(), std::move(ids));
        }
    }
    // jsonl splits first so that .ids subsets can reference them
    std::stable_partition(id_lists.begin(), id_lists.end(), [&](const auto& kv) {
        return fs::exists(dir / (kv.first + ".jsonl"));
    });
    for (auto& [name, ids] : id_lists) all.set_split(name, std::move(ids));
    return all;
}

void write_corpus_dir(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    // A split whose examples are all inside another split is written as an id list.
    std::set<std::string> owned;
    for (const auto& [name, ids] : ds.splits()) {
        bool is_subset = std::all_of(ids.begin(), ids.end(), [&](const auto& id) {
            return owned.count(id) != 0;
        });
        if (is_subset) {
            std::string text;
            for (const auto& id : ids) text += id + "\n";
            write_text_file(dir / (name + ".ids"), text);
        } else {
            write_dataset(ds.subset(ids), dir / (name + ".jsonl"));
            owned.insert(ids.begin(), ids.end());
        }
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace rkd
