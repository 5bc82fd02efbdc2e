#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "robustkd/common.hpp"

namespace rkd {

inline constexpr std::size_t kDefaultDim = std::size_t{1} << 15;
inline constexpr std::size_t kDefaultHidden = 64;

/// Lowercased maximal alphanumeric runs. Bytes >= 0x80 count as word
/// characters so UTF-8 letters stay inside their token.
std::vector<std::string> tokenize(std::string_view text);

/// |set(premise) ∩ set(hypothesis)| / |set(hypothesis)|, 0 for an empty hypothesis.
double token_overlap(std::string_view premise, std::string_view hypothesis);

/// Hashed bag of words plus one dense overlap slot stored at index `dim`.
struct FeatureVector {
    std::size_t dim = 0;
    std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by index, merged
    double overlap = 0.0;
};

std::uint32_t bucket_of(std::string_view feature, std::size_t dim);
FeatureVector encode(std::string_view premise, std::string_view hypothesis,
                     std::size_t dim = kDefaultDim);

/// One-hidden-layer ReLU network. W1 is stored column-major so that a
/// sparse input touches contiguous memory; the checkpoint file is row-major.
struct ModelParams {
    std::size_t dim = 0;      // hashed input buckets; inputs are dim + 1 wide
    std::size_t hidden = 0;
    std::size_t classes = 0;
    std::uint64_t seed = 0;
    std::vector<double> w1;  // (dim + 1) columns of `hidden` entries
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // classes x hidden, row-major
    std::vector<double> b2;  // classes

    std::size_t inputs() const { return dim + 1; }
    double& w1_at(std::size_t h, std::size_t col) { return w1[col * hidden + h]; }
    double w1_at(std::size_t h, std::size_t col) const { return w1[col * hidden + h]; }
    double& w2_at(std::size_t c, std::size_t h) { return w2[c * hidden + h]; }
    double w2_at(std::size_t c, std::size_t h) const { return w2[c * hidden + h]; }
    bool all_finite() const;

    /// Weights uniform in ±sqrt(6/fan_in), biases zero.
    static ModelParams init(std::size_t dim, std::size_t hidden, std::size_t classes,
                            std::uint64_t seed);
    static ModelParams zeros(std::size_t dim, std::size_t hidden, std::size_t classes);

    bool operator==(const ModelParams&) const = default;
};

/// Parameter gradient with W1 kept as a sparse set of columns.
struct Gradient {
    std::size_t hidden = 0;
    std::vector<std::uint32_t> cols;
    std::vector<double> w1_cols;  // cols.size() blocks of `hidden`
    std::vector<double> b1;
    std::vector<double> w2;
    std::vector<double> b2;

    static Gradient zeros_like(const ModelParams& p);
    /// this += scale * other
    void add(const Gradient& other, double scale = 1.0);
    void scale(double s);
    /// Gradient entry for W1(h, col); zero for untouched columns.
    double w1_at(std::size_t h, std::size_t col) const;
    bool all_finite() const;
    /// Mutable block for W1 column `col`, created zeroed on first use.
    double* column(std::uint32_t col);

private:
    std::unordered_map<std::uint32_t, std::size_t> slot_;
};

struct Activations {
    std::vector<double> pre;     // W1 x + b1
    std::vector<double> hidden;  // relu(pre)
    std::vector<double> logits;
    Probs probs;
};

Probs forward(const ModelParams& params, const FeatureVector& x);
void forward(const ModelParams& params, const FeatureVector& x, Activations& act);

/// Gradient of a loss L(p) with respect to the parameters, given dL/dp.
Gradient backward(const ModelParams& params, const FeatureVector& x, std::span<const double> dl_dp);
/// Accumulating variant: grad += scale * dL/dtheta, reusing forward activations.
void backward_into(const ModelParams& params, const FeatureVector& x, const Activations& act,
                   std::span<const double> dl_dp, double scale, Gradient& grad);

/// Triangular schedule: linear warm-up to `peak` at ceil(T/2), linear decay to 0 at T.
struct LRSchedule {
    double peak = 0.0;
    std::size_t total_steps = 0;
};
double lr_at(const LRSchedule& s, std::size_t step);

/// params - lr * grad. Throws TrainingError on a non-finite gradient.
ModelParams sgd_step(const ModelParams& params, const Gradient& grad, double lr);
void sgd_step_inplace(ModelParams& params, const Gradient& grad, double lr);

/// Text checkpoint: header `tinynet <D> <H> <C> <seed>`, then W1, b1, W2, b2
/// row-major, one matrix row per line, 17 significant digits.
void save_checkpoint(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string format_checkpoint(const ModelParams& p);
ModelParams parse_checkpoint(std::string_view text);

}  // namespace rkd
