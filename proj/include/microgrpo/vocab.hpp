// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace microgrpo::taskgen {

// Closed word-level vocabulary shared by the task generator, the policy, and
// the reward parser. Token ids are frozen: the list order is the format.
//
// Detokenization rules (decode): tokens are joined with single spaces, except
//   - no space before . , : ; ? )
//   - no space after (
//   - no space between a closing punctuation mark and a following newline
// which is exactly what the chat template needs to round-trip byte-for-byte.
class Vocabulary {
 public:
  static constexpr int kVersion = 1;

  Vocabulary();

  int size() const { return static_cast<int>(tokens_.size()); }
  std::string_view token(int id) const;
  int id(std::string_view token) const;  // throws InvalidInputError if unknown
  bool contains(std::string_view token) const;

  // Word-level tokenizer over the closed vocabulary. Splits on whitespace;
  // punctuation marks are single-character tokens; "<...>" tags are one token.
  // Unknown tokens throw InvalidInputError.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  int think_open() const { return think_open_; }
  int think_close() const { return think_close_; }
  int answer_open() const { return answer_open_; }
  int answer_close() const { return answer_close_; }
  int stop() const { return stop_; }
  const std::vector<int>& reflection_markers() const { return reflection_markers_; }

  int digit(int value) const;  // token id for "0".."9"

  // FNV-1a over version and token list; identifies the vocabulary in dataset
  // and report files.
  std::uint64_t hash() const { return hash_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::vector<bool> attaches_left_;  // . , : ; ? )
  int think_open_ = -1, think_close_ = -1, answer_open_ = -1, answer_close_ = -1, stop_ = -1;
  int newline_ = -1, open_paren_ = -1;
  int digit0_ = -1;
  std::vector<int> reflection_markers_;
  std::uint64_t hash_ = 0;
};

// The process-wide vocabulary instance (version 1).
const Vocabulary& builtin_vocabulary();

}  // namespace microgrpo::taskgen
