#include "robustkd/distill.hpp"

#include <cmath>

namespace rkd {

LossGrad sq_distill_loss(std::span<const double> p, std::span<const double> q) {
    check_distribution(p, 1e-6, static_cast<int>(p.size()));
    check_distribution(q, 1e-6, static_cast<int>(p.size()));
    LossGrad out;
    out.dl_dp.resize(p.size());
    for (std::size_t c = 0; c < p.size(); ++c) {
        const double d = p[c] - q[c];
        out.loss += d * d;
        out.dl_dp[c] = 2.0 * d;
    }
    return out;
}

Probs ensemble_target(std::span<const Probs> qs) {
    if (qs.empty()) throw ContractError("ensemble target needs at least one teacher");
    const std::size_t C = qs[0].size();
    Probs mean(C, 0.0);
    for (const auto& q : qs) {
        check_distribution(q, 1e-6, static_cast<int>(C));
        for (std::size_t c = 0; c < C; ++c) mean[c] += q[c];
    }
    const double e = static_cast<double>(qs.size());
    for (auto& m : mean) m /= e;
    return mean;
}

std::string_view to_string(GateReason r) {
    switch (r) {
        case GateReason::teacher_correct: return "teacher_correct";
        case GateReason::teacher_better_on_gold: return "teacher_better_on_gold";
        case GateReason::excluded: return "excluded";
        case GateReason::unlabelled_always: return "unlabelled_always";
    }
    return "excluded";
}

GateDecision gate(int gold, std::span<const double> p, std::span<const double> q) {
    if (gold < 0 || static_cast<std::size_t>(gold) >= q.size() || p.size() != q.size())
        throw ContractError("gate: gold label out of range or class-count mismatch");
    const auto g = static_cast<std::size_t>(gold);
    if (argmax(q) == gold) return {true, GateReason::teacher_correct};
    if (q[g] > p[g]) return {true, GateReason::teacher_better_on_gold};
    return {false, GateReason::excluded};
}

Probs smooth_teacher(std::span<const double> q, double power) {
    if (!(power > 0.0)) throw ContractError("smoothing power must be positive");
    check_distribution(q, 1e-6, static_cast<int>(q.size()));
    Probs out(q.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < q.size(); ++c) {
        out[c] = q[c] == 0.0 ? 0.0 : std::pow(q[c], power);
        sum += out[c];
    }
    for (auto& v : out) v /= sum;
    return out;
}

LossGrad cross_entropy(std::span<const double> p, int gold) {
    if (gold < 0 || static_cast<std::size_t>(gold) >= p.size())
        throw ContractError("cross_entropy: gold label out of range");
    const double pg = std::max(p[static_cast<std::size_t>(gold)], kCrossEntropyFloor);
    LossGrad out;
    out.loss = -std::log(pg);
    out.dl_dp.assign(p.size(), 0.0);
    out.dl_dp[static_cast<std::size_t>(gold)] = -1.0 / pg;
    return out;
}

}  // namespace rkd
