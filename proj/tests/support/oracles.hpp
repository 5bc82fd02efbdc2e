#pragma once

// Independent reference implementations used to check the library. Nothing
// here calls into the code under test except to obtain the values being
// compared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "robustkd/common.hpp"
#include "robustkd/tinynet.hpp"

namespace oracle {

// Published FNV-1a 64-bit parameters.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline bool gate_include(int gold, const std::vector<double>& p, const std::vector<double>& q) {
    const auto teacher_pick = std::max_element(q.begin(), q.end()) - q.begin();
    // first maximal index, matching lowest-index tie breaking
    bool teacher_correct = teacher_pick == gold;
    return teacher_correct || q[gold] > p[gold];
}

inline std::vector<double> smooth(const std::vector<double>& q, double power) {
    std::vector<double> out(q.size());
    double z = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        out[i] = q[i] == 0.0 ? 0.0 : std::pow(q[i], power);
        z += out[i];
    }
    for (auto& v : out) v /= z;
    return out;
}

inline std::vector<double> random_distribution(std::mt19937_64& gen, int classes = rkd::kNumClasses) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(static_cast<std::size_t>(classes));
    double z = 0.0;
    for (auto& x : v) z += (x = e(gen));
    for (auto& x : v) x /= z;
    return v;
}

// Loss as a function of the output distribution, with its gradient.
struct ScalarLoss {
    std::function<double(const std::vector<double>&)> value;
    std::function<std::vector<double>(const std::vector<double>&)> grad;
};

inline ScalarLoss squared_to(std::vector<double> q) {
    return {[q](const std::vector<double>& p) {
                double s = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
                return s;
            },
            [q](const std::vector<double>& p) {
                std::vector<double> g(p.size());
                for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2.0 * (p[i] - q[i]);
                return g;
            }};
}

inline ScalarLoss neg_log(int gold) {
    return {[gold](const std::vector<double>& p) { return -std::log(p[static_cast<std::size_t>(gold)]); },
            [gold](const std::vector<double>& p) {
                std::vector<double> g(p.size(), 0.0);
                g[static_cast<std::size_t>(gold)] = -1.0 / p[static_cast<std::size_t>(gold)];
                return g;
            }};
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

// Largest relative error between backward() and central differences with
// step 1e-5, over every parameter the example can influence.
inline double gradient_check(rkd::ModelParams params, const rkd::FeatureVector& x, const ScalarLoss& loss) {
    const double h = 1e-5;
    const auto p0 = rkd::forward(params, x);
    const auto g = rkd::backward(params, x, loss.grad(p0));
    auto eval = [&] { return loss.value(rkd::forward(params, x)); };
    double worst = 0.0;
    auto probe = [&](double& w, double analytic) {
        const double keep = w;
        w = keep + h;
        const double up = eval();
        w = keep - h;
        const double down = eval();
        w = keep;
        worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * h)));
    };
    std::vector<std::size_t> cols;
    for (const auto& [c, v] : x.entries) cols.push_back(c);
    cols.push_back(params.dim);
    for (auto col : cols)
        for (std::size_t j = 0; j < params.hidden; ++j) probe(params.w1_at(j, col), g.w1_at(j, col));
    for (std::size_t j = 0; j < params.hidden; ++j) probe(params.b1[j], g.b1[j]);
    for (std::size_t i = 0; i < params.w2.size(); ++i) probe(params.w2[i], g.w2[i]);
    for (std::size_t i = 0; i < params.b2.size(); ++i) probe(params.b2[i], g.b2[i]);
    return worst;
}

inline std::string random_sentence(std::mt19937_64& gen, std::size_t words) {
    static const char* vocab[] = {"the", "cat", "sat", "on", "a", "mat", "dog", "ran", "far", "away",
                                  "river", "blue", "sky", "over", "city", "night", "train", "old"};
    std::uniform_int_distribution<std::size_t> pick(0, std::size(vocab) - 1);
    std::string s;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) s += ' ';
        s += vocab[pick(gen)];
    }
    return s;
}

// Count of a manifest built by repeating minority ids `factor` times.
inline std::size_t manifest_length(std::size_t train, std::size_t minority, std::size_t factor) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < train; ++i) n += i < minority ? factor : 1;
    return n;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("robustkd-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle
