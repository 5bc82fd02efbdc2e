#include "robustkd/common.hpp"

#include <cmath>
#include <sstream>

namespace rkd {

bool is_distribution(std::span<const double> p, double tol) {
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) return false;
        sum += v;
    }
    return !p.empty() && std::abs(sum - 1.0) <= tol;
}

void check_distribution(std::span<const double> p, double tol, int classes) {
    if (static_cast<int>(p.size()) != classes) {
        std::ostringstream os;
        os << "expected " << classes << " class probabilities, got " << p.size();
        throw ContractError(os.str());
    }
    if (!is_distribution(p, tol)) {
        std::ostringstream os;
        os << "not a probability distribution: [";
        for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
        os << "]";
        throw ContractError(os.str());
    }
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::below requires n > 0");
    // Lemire's multiply-shift with rejection: unbiased, no division on the fast path.
    std::uint64_t x = engine_();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            x = engine_();
            m = static_cast<unsigned __int128>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace rkd
