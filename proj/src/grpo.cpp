// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#include "microgrpo/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "microgrpo/errors.hpp"

namespace microgrpo::grpo {

namespace {

void validate_logprobs(const TokenLogProbs& lp) {
  if (lp.current.size() != lp.old.size() || lp.current.size() != lp.reference.size()) {
    throw InvalidInputError("TokenLogProbs vectors are misaligned: current=" +
                            std::to_string(lp.current.size()) +
                            " old=" + std::to_string(lp.old.size()) +
                            " reference=" + std::to_string(lp.reference.size()));
  }
  for (const auto* v : {&lp.current, &lp.old, &lp.reference}) {
    for (double x : *v) {
      if (!std::isfinite(x) || x > 0.0) {
        throw InvalidInputError("log-probability entries must be finite and <= 0, got " +
                                std::to_string(x));
      }
    }
  }
}

// Gradient of min(rho*A, clip(rho)*A) w.r.t. the current log-prob. Equal to
// rho*A on the unclipped side and exactly 0 once rho crosses the clip boundary
// in the favorable direction (the dead zone includes the boundary itself).
double surrogate_grad(double ratio, double advantage, double eps) {
  if (advantage > 0.0) return ratio < 1.0 + eps ? ratio * advantage : 0.0;
  if (advantage < 0.0) return ratio > 1.0 - eps ? ratio * advantage : 0.0;
  return 0.0;
}

}  // namespace

AdvantageGroup compute_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw GroupTooSmallError("GRPO group needs at least 2 rollouts, got " +
                             std::to_string(rewards.size()));
  }
  for (double r : rewards) {
    if (!std::isfinite(r)) throw InvalidInputError("non-finite reward in group");
  }

  AdvantageGroup out;
  out.rewards.assign(rewards.begin(), rewards.end());
  const double n = static_cast<double>(rewards.size());

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;

  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;  // population variance
  const double stddev = std::sqrt(var);

  out.mean = mean;
  out.stddev = stddev;
  out.advantages.resize(rewards.size());
  if (stddev < kDegenerateStdThreshold) {
    std::fill(out.advantages.begin(), out.advantages.end(), 0.0);
  } else {
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      out.advantages[i] = (rewards[i] - mean) / stddev;
    }
  }
  return out;
}

std::vector<double> per_token_surrogate(const TokenLogProbs& logprobs, double advantage,
                                        const GrpoHyper& hyper) {
  validate_logprobs(logprobs);
  const double eps = hyper.clip_epsilon;
  std::vector<double> out(logprobs.current.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double ratio = std::exp(logprobs.current[t] - logprobs.old[t]);
    const double unclipped = ratio * advantage;
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
    out[t] = std::min(unclipped, clipped);
  }
  return out;
}

std::vector<double> kl_penalty(const TokenLogProbs& logprobs) {
  validate_logprobs(logprobs);
  std::vector<double> out(logprobs.current.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double delta = logprobs.reference[t] - logprobs.current[t];
    // exp(delta) - delta - 1 >= 0, equality iff delta == 0.
    out[t] = std::exp(delta) - delta - 1.0;
  }
  return out;
}

GrpoLossResult grpo_loss(const GroupBatch& batch, const GrpoHyper& hyper) {
  const std::size_t group = batch.rollouts.size();
  if (group < 2) {
    throw GroupTooSmallError("GroupBatch needs at least 2 rollouts, got " +
                             std::to_string(group));
  }
  if (batch.advantages.advantages.size() != group) {
    throw InvalidInputError("advantage vector does not match rollout count");
  }

  GrpoLossResult res;
  res.token_weights.resize(group);

  const double inv_g = 1.0 / static_cast<double>(group);
  double objective = 0.0;
  double kl_sum = 0.0;
  std::size_t token_count = 0;
  std::size_t clipped_tokens = 0;

  for (std::size_t i = 0; i < group; ++i) {
    const TokenLogProbs& lp = batch.rollouts[i];
    validate_logprobs(lp);
    const std::size_t len = lp.current.size();
    if (len == 0) {
      ++res.empty_rollouts_skipped;
      continue;
    }
    const double adv = batch.advantages.advantages[i];
    const double inv_len = 1.0 / static_cast<double>(len);
    auto& weights = res.token_weights[i];
    weights.resize(len);

    for (std::size_t t = 0; t < len; ++t) {
      const double ratio = std::exp(lp.current[t] - lp.old[t]);
      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, 1.0 - hyper.clip_epsilon,
                                        1.0 + hyper.clip_epsilon) * adv;
      const double delta = lp.reference[t] - lp.current[t];
      const double k3 = std::exp(delta) - delta - 1.0;

      objective += inv_g * inv_len * (std::min(unclipped, clipped) - hyper.kl_beta * k3);
      kl_sum += k3;
      ++token_count;

      const double sg = surrogate_grad(ratio, adv, hyper.clip_epsilon);
      if (sg == 0.0 && adv != 0.0) ++clipped_tokens;
      // d k3 / d cur = 1 - exp(ref - cur)
      const double kl_grad = 1.0 - std::exp(delta);
      weights[t] = inv_g * inv_len * (sg - hyper.kl_beta * kl_grad);
    }
  }

  res.loss = -objective;
  res.mean_kl = token_count > 0 ? kl_sum / static_cast<double>(token_count) : 0.0;
  res.clip_fraction =
      token_count > 0 ? static_cast<double>(clipped_tokens) / static_cast<double>(token_count)
                      : 0.0;
  return res;
}

}  // namespace microgrpo::grpo
