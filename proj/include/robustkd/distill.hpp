#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "robustkd/common.hpp"

namespace rkd {

struct LossGrad {
    double loss = 0.0;
    Probs dl_dp;
};

/// Squared-error distillation term for one example: sum_c (p_c - q_c)^2.
LossGrad sq_distill_loss(std::span<const double> p, std::span<const double> q);

/// Mean of the teachers' distributions (the ensemble target).
Probs ensemble_target(std::span<const Probs> qs);

enum class GateReason { teacher_correct, teacher_better_on_gold, excluded, unlabelled_always };
std::string_view to_string(GateReason r);

struct GateDecision {
    bool include = false;
    GateReason reason = GateReason::excluded;
};

/// Labelled-example gate: keep the distillation term when the teacher's
/// argmax is the gold class, or the teacher puts more mass on gold than the
/// student does.
GateDecision gate(int gold, std::span<const double> p, std::span<const double> q);
/// Decision used for unlabelled examples, which bypass the gate.
inline GateDecision ungated() { return {true, GateReason::unlabelled_always}; }

/// q_c^power / sum_k q_k^power, with 0 mapping to 0.
Probs smooth_teacher(std::span<const double> q, double power = 0.9);

inline constexpr double kCrossEntropyFloor = 1e-12;

/// -ln(max(p_gold, 1e-12)) and its gradient in p.
LossGrad cross_entropy(std::span<const double> p, int gold);

}  // namespace rkd
