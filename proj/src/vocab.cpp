// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#include "microgrpo/vocab.hpp"

#include <array>
#include <cctype>

#include "microgrpo/errors.hpp"

namespace microgrpo::taskgen {

namespace {

// Frozen token list, version 1. Appending is a version bump; reordering is a
// format break.
const std::array<const char*, 94> kTokens = {
    // tags
    "<think>", "</think>", "<answer>", "</answer>", "<eos>",
    // punctuation
    ".", ",", ":", ";", "?", "(", ")", "\n",
    // digits
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    // object categories
    "cube", "ball", "cone", "box", "star", "ring", "lamp", "tree", "car",
    // spatial relations
    "left", "right", "above", "below",
    // reflection markers
    "wait", "but", "recheck",
    // chat template words
    "A", "conversation", "between", "User", "and", "Assistant", "The", "user",
    "asks", "a", "question", "about", "the", "image", "solves", "it",
    "assistant", "first", "thinks", "reasoning", "process", "in", "mind",
    "then", "provides", "with", "answer", "Let", "me", "solve", "this",
    "step", "by",
    // question words
    "objects", "at", "depth", "How", "many", "are", "there", "Choices", "or",
    "Where", "is", "relative", "to", "Which", "of", "these", "closest",
    "camera", "nearest",
    // gold-trace words
    "than", "closer", "distance"};

bool is_punct_char(char c) {
  return c == '.' || c == ',' || c == ':' || c == ';' || c == '?' || c == '(' || c == ')';
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Vocabulary::Vocabulary() {
  tokens_.reserve(kTokens.size());
  for (const char* t : kTokens) tokens_.emplace_back(t);
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) ids_[tokens_[i]] = i;

  attaches_left_.assign(tokens_.size(), false);
  for (const char* p : {".", ",", ":", ";", "?", ")"}) attaches_left_[ids_.at(p)] = true;

  think_open_ = ids_.at("<think>");
  think_close_ = ids_.at("</think>");
  answer_open_ = ids_.at("<answer>");
  answer_close_ = ids_.at("</answer>");
  stop_ = ids_.at("<eos>");
  newline_ = ids_.at("\n");
  open_paren_ = ids_.at("(");
  digit0_ = ids_.at("0");
  for (const char* m : {"wait", "but", "recheck"}) reflection_markers_.push_back(ids_.at(m));

  hash_ = 0xcbf29ce484222325ULL;
  hash_ = fnv1a(hash_, "microgrpo.vocab.v1");
  for (const auto& t : tokens_) {
    hash_ = fnv1a(hash_, t);
    hash_ ^= 0x1f;
    hash_ *= 0x100000001b3ULL;
  }
}

std::string_view Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw InvalidInputError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) {
    throw InvalidInputError("unknown token: '" + std::string(token) + "'");
  }
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

int Vocabulary::digit(int value) const {
  if (value < 0 || value > 9) {
    throw InvalidInputError("digit out of range: " + std::to_string(value));
  }
  return digit0_ + value;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else if (c == '\n') {
      out.push_back(newline_);
      ++i;
    } else if (is_punct_char(c)) {
      out.push_back(id(text.substr(i, 1)));
      ++i;
    } else if (c == '<') {
      const std::size_t end = text.find('>', i);
      if (end == std::string_view::npos) {
        throw InvalidInputError("unterminated tag in text");
      }
      out.push_back(id(text.substr(i, end - i + 1)));
      i = end + 1;
    } else {
      std::size_t j = i;
      while (j < n && text[j] != ' ' && text[j] != '\t' && text[j] != '\r' &&
             text[j] != '\n' && !is_punct_char(text[j]) && text[j] != '<') {
        ++j;
      }
      out.push_back(id(text.substr(i, j - i)));
      i = j;
    }
  }
  return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  int prev = -1;
  for (int id : ids) {
    const std::string_view tok = token(id);
    if (prev >= 0) {
      bool space = true;
      if (attaches_left_[static_cast<std::size_t>(id)]) space = false;
      if (prev == open_paren_) space = false;
      if (id == newline_ && attaches_left_[static_cast<std::size_t>(prev)]) space = false;
      if (space) out += ' ';
    }
    out += tok;
    prev = id;
  }
  return out;
}

const Vocabulary& builtin_vocabulary() {
  static const Vocabulary vocab;
  return vocab;
}

}  // namespace microgrpo::taskgen
