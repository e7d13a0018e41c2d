// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "microgrpo/vocab.hpp"

namespace microgrpo::reward {

// Reward knobs. The defaults are the vanilla rule set: +1 accuracy, +1 format,
// no length bonus. The length bonus (+0.001 per token when on) is the
// deliberately hackable variant used by the length-reward ablation.
struct RewardConfig {
  double accuracy_reward = 1.0;
  double format_reward = 1.0;
  double length_bonus_per_token = 0.001;
  bool accuracy_enabled = true;
  bool format_enabled = true;
  bool length_bonus_enabled = false;
};

// Result of parsing one response against the tag grammar. Spans are
// [begin, end) token index ranges into the response.
//
// The prompt template pre-seeds "<think>", so the response itself must not
// repeat it: a well-formed response is
//   ...think tokens... </think> ... <answer> ... </answer> ...
// with exactly one occurrence of each tag, in that order.
struct ParsedResponse {
  std::optional<std::pair<int, int>> think_span;
  std::optional<std::pair<int, int>> answer_span;
  bool well_formed = false;
  std::optional<int> extracted_choice;  // token id of the chosen option
  int n_tokens = 0;                     // full response length, tags and stop included
};

struct RewardBreakdown {
  double accuracy = 0.0;
  double format = 0.0;
  double length_bonus = 0.0;
  double total = 0.0;
};

// Parses tags and extracts the answered choice. `choices` are the question's
// valid option tokens. Malformed input never throws; it yields
// well_formed=false and, when possible, a choice via the fallback scan (last
// valid choice token after the last <answer>, or anywhere if no tag exists).
ParsedResponse parse_response(std::span<const int> tokens, const taskgen::Vocabulary& vocab,
                              std::span<const int> choices);

// Rule table: accuracy iff extracted choice equals gold, format iff well
// formed, plus the optional per-token bonus. total is always the sum.
RewardBreakdown score(const ParsedResponse& parsed, int gold_choice_token,
                      const RewardConfig& config);

// Element-wise score over a group of parsed responses, order preserving.
std::vector<RewardBreakdown> score_group(std::span<const ParsedResponse> parsed,
                                         int gold_choice_token, const RewardConfig& config);

}  // namespace microgrpo::reward
