// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#pragma once

#include <span>
#include <vector>

namespace microgrpo::grpo {

// Below this population standard deviation a reward group is treated as
// degenerate: it carries no learning signal and all advantages are zeroed
// instead of dividing by a vanishing std.
inline constexpr double kDegenerateStdThreshold = 1e-8;

// Group-normalized rewards: advantages[i] = (rewards[i] - mean) / std, with the
// population standard deviation. If std <= threshold, all advantages are zero.
struct AdvantageGroup {
  std::vector<double> rewards;
  std::vector<double> advantages;
  double mean = 0.0;
  double stddev = 0.0;
};

// Per-token log-probabilities of one sampled response under the three policies
// of the clipped objective. All vectors have one entry per response token and
// every entry is <= 0.
struct TokenLogProbs {
  std::vector<double> current;    // log pi_theta(o_t | q, o_<t)
  std::vector<double> old;        // log pi_theta_old(...)
  std::vector<double> reference;  // log pi_ref(...)
};

struct GrpoHyper {
  double clip_epsilon = 0.2;
  double kl_beta = 0.04;
  int group_size = 8;
  int inner_epochs = 1;
};

// The GRPO update unit: G rollouts for one question plus their normalized
// rewards. `advantages` must come from compute_advantages over the same group.
struct GroupBatch {
  std::vector<TokenLogProbs> rollouts;
  AdvantageGroup advantages;
};

struct GrpoLossResult {
  // Negated objective (-J), suitable for minimization and logging.
  double loss = 0.0;
  // token_weights[i][t] is the scalar that multiplies d log pi_theta(o_{i,t}) / d theta
  // in the ASCENT direction: grad J = sum_{i,t} w_{i,t} * d log pi / d theta.
  std::vector<std::vector<double>> token_weights;
  // Mean k3 KL estimate over all tokens in the batch (diagnostics).
  double mean_kl = 0.0;
  // Fraction of tokens whose surrogate gradient was zeroed by the clip.
  double clip_fraction = 0.0;
  // Rollouts with zero tokens, skipped in the group sum.
  int empty_rollouts_skipped = 0;
};

// Advantages per the group-relative rule. Throws GroupTooSmallError for fewer
// than two rewards and InvalidInputError on non-finite entries.
AdvantageGroup compute_advantages(std::span<const double> rewards);

// Per-token clipped surrogate values min(rho*A, clip(rho, 1-eps, 1+eps)*A),
// rho_t = exp(current_t - old_t).
std::vector<double> per_token_surrogate(const TokenLogProbs& logprobs, double advantage,
                                        const GrpoHyper& hyper);

// Per-token k3 estimator of KL(pi_theta || pi_ref):
//   exp(ref - cur) - (ref - cur) - 1,
// nonnegative, zero iff cur == ref.
std::vector<double> kl_penalty(const TokenLogProbs& logprobs);

// Full objective over a group: loss = -(1/G) sum_i (1/|o_i|) sum_t {surrogate - beta*k3}.
// Empty rollouts contribute nothing to the sum (the 1/G prefactor is kept) and
// are counted in empty_rollouts_skipped.
GrpoLossResult grpo_loss(const GroupBatch& batch, const GrpoHyper& hyper);

}  // namespace microgrpo::grpo
