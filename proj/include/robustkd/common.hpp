#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rkd {

inline constexpr int kNumClasses = 3;

/// Predicted class probabilities, one entry per class.
using Probs = std::vector<double>;

// Error taxonomy. The CLI maps the first five to exit code 1 (user error)
// and the last two to exit code 2 (runtime failure).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ClientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Index of the largest entry; ties go to the lowest index.
inline int argmax(std::span<const double> p) {
    int best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

/// Throws ContractError unless `p` is a distribution over `classes` entries
/// (non-negative, finite, summing to 1 within `tol`).
void check_distribution(std::span<const double> p, double tol = 1e-6,
                        int classes = kNumClasses);
bool is_distribution(std::span<const double> p, double tol = 1e-6);

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Mixes a base seed with any number of stream identifiers.
template <typename... Ts>
std::uint64_t derive_seed(std::uint64_t base, Ts... parts) {
    std::uint64_t h = splitmix64(base);
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(parts))), ...);
    return h;
}

std::uint64_t fnv1a64(std::string_view bytes);

/// Seeded generator. Built on mt19937_64 (bit-exact by the standard) with
/// hand-rolled distributions so sequences do not depend on the standard
/// library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace rkd
