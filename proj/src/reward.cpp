// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#include "microgrpo/reward.hpp"

#include <algorithm>

namespace microgrpo::reward {

namespace {

bool is_choice(int token, std::span<const int> choices) {
  return std::find(choices.begin(), choices.end(), token) != choices.end();
}

// Last valid choice token in [begin, end), or nullopt.
std::optional<int> last_choice_in(std::span<const int> tokens, int begin, int end,
                                  std::span<const int> choices) {
  for (int i = end - 1; i >= begin; --i) {
    if (is_choice(tokens[static_cast<std::size_t>(i)], choices)) {
      return tokens[static_cast<std::size_t>(i)];
    }
  }
  return std::nullopt;
}

}  // namespace

ParsedResponse parse_response(std::span<const int> tokens, const taskgen::Vocabulary& vocab,
                              std::span<const int> choices) {
  ParsedResponse out;
  const int n = static_cast<int>(tokens.size());
  out.n_tokens = n;

  int think_opens = 0;  // an extra "<think>" beyond the pre-seeded one
  int think_close = -1, think_closes = 0;
  int answer_open = -1, answer_opens = 0;
  int answer_close = -1, answer_closes = 0;
  int last_answer_open = -1;
  for (int i = 0; i < n; ++i) {
    const int t = tokens[static_cast<std::size_t>(i)];
    if (t == vocab.think_open()) ++think_opens;
    if (t == vocab.think_close()) {
      ++think_closes;
      if (think_close < 0) think_close = i;
    }
    if (t == vocab.answer_open()) {
      ++answer_opens;
      last_answer_open = i;
      if (answer_open < 0) answer_open = i;
    }
    if (t == vocab.answer_close()) {
      ++answer_closes;
      if (answer_close < 0) answer_close = i;
    }
  }

  out.well_formed = think_opens == 0 && think_closes == 1 && answer_opens == 1 &&
                    answer_closes == 1 && think_close < answer_open &&
                    answer_open < answer_close;

  // The think span starts at the response's first token (the opening tag lives
  // in the prompt). Without a closing tag the whole response is think content.
  out.think_span = std::make_pair(0, think_close >= 0 ? think_close : n);
  if (answer_open >= 0 && answer_close > answer_open) {
    out.answer_span = std::make_pair(answer_open + 1, answer_close);
  }

  if (out.well_formed) {
    out.extracted_choice = last_choice_in(tokens, out.answer_span->first,
                                          out.answer_span->second, choices);
  } else if (last_answer_open >= 0) {
    out.extracted_choice = last_choice_in(tokens, last_answer_open + 1, n, choices);
  } else {
    out.extracted_choice = last_choice_in(tokens, 0, n, choices);
  }
  return out;
}

RewardBreakdown score(const ParsedResponse& parsed, int gold_choice_token,
                      const RewardConfig& config) {
  RewardBreakdown b;
  if (config.accuracy_enabled && parsed.extracted_choice &&
      *parsed.extracted_choice == gold_choice_token) {
    b.accuracy = config.accuracy_reward;
  }
  if (config.format_enabled && parsed.well_formed) {
    b.format = config.format_reward;
  }
  if (config.length_bonus_enabled) {
    b.length_bonus = config.length_bonus_per_token * static_cast<double>(parsed.n_tokens);
  }
  b.total = b.accuracy + b.format + b.length_bonus;
  return b;
}

std::vector<RewardBreakdown> score_group(std::span<const ParsedResponse> parsed,
                                         int gold_choice_token, const RewardConfig& config) {
  std::vector<RewardBreakdown> out;
  out.reserve(parsed.size());
  for (const ParsedResponse& p : parsed) out.push_back(score(p, gold_choice_token, config));
  return out;
}

}  // namespace microgrpo::reward
