// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "microgrpo/vocab.hpp"

namespace microgrpo::taskgen {

// One of the four CV-Bench-style question families.
enum class Category { kCount = 0, kRelation = 1, kDepth = 2, kDistance = 3 };

inline constexpr std::array<const char*, 4> kCategoryNames = {"count", "relation", "depth",
                                                              "distance"};
Category category_from_name(std::string_view name);

inline constexpr int kNumObjectCategories = 9;
// Indices into this array are SceneObject::category.
inline constexpr std::array<const char*, kNumObjectCategories> kObjectNouns = {
    "cube", "ball", "cone", "box", "star", "ring", "lamp", "tree", "car"};

struct SceneObject {
  int id = 0;        // position in Scene::objects
  int category = 0;  // index into kObjectNouns, unique within a scene
  int x = 0;         // grid column, 0-based
  int y = 0;         // grid row, 0-based; larger y is further up ("above")
  double depth = 0;  // distance from camera, smaller is closer
};

// Synthetic spatial world. Ground truth for every question asked about it.
// Invariants: 2 <= |objects| <= 9, positions unique, categories unique,
// depths pairwise separated by at least 0.1.
struct Scene {
  std::vector<SceneObject> objects;
  int grid_size = 0;
  std::uint64_t seed = 0;
};

struct Question {
  Category category = Category::kCount;
  Scene scene;
  std::vector<int> text_tokens;     // serialized scene + question + choice list
  std::vector<int> choice_tokens;   // answer options as single token ids
  int gold = 0;                     // index into choice_tokens
  std::uint64_t seed = 0;

  // Structured references so gold answers can be re-derived without parsing
  // the text back. Which ones are set depends on the category.
  std::array<int, 2> relation_pair = {-1, -1};  // subject, anchor (object ids)
  int ref_object = -1;                          // distance anchor
  std::vector<int> listed_objects;              // depth/distance choices as object ids
};

// Deterministic scene from a seed. Throws GenerationError when the request is
// infeasible (too many objects for the grid, out-of-range sizes).
Scene generate_scene(std::uint64_t seed, int grid_size, int n_objects);

// Whether a scene can host a question of the given category.
bool scene_supports(const Scene& scene, Category category);

// Deterministic question; gold is checked against verify_gold before return.
Question generate_question(const Scene& scene, Category category, std::uint64_t seed);

// Independent ground-truth check: evaluates every choice as a predicate over
// the scene and requires exactly one to hold, at index `gold`.
bool verify_gold(const Question& q);

// Chat template, applied verbatim around the question blob.
extern const char* const kPromptPrefixText;  // "...answer.\n User: "
extern const char* const kPromptSuffixText;  // " \n Assistant: ...\n <think>"

// Prompt token sequence: template prefix + question text + template suffix.
// The sequence always ends with the think-open token. If max_tokens > 0 and
// the prompt is longer, throws SequenceTooLongError.
std::vector<int> render_prompt(const Question& q, int max_tokens = 0);

// Supervision target for SFT: a one-sentence ground-truth comparison, closed
// think tag, answer span with the gold choice, and the stop token. The opening
// think tag is the one pre-seeded by the prompt, so it is not repeated here.
std::vector<int> gold_trace(const Question& q);

struct CategoryObjectRange {
  int min_objects = 2;
  int max_objects = 5;
};

struct SplitConfig {
  std::uint64_t train_seed_start = 1'000;
  int train_count = 4'000;
  std::uint64_t eval_seed_start = 5'000'000;
  int eval_count = 400;
  int grid_size = 5;
  // Per-category object counts. Depth and distance questions list four
  // options, so they need enough objects on stage.
  CategoryObjectRange count_range{2, 5};
  CategoryObjectRange relation_range{4, 5};
  CategoryObjectRange depth_range{4, 5};
  CategoryObjectRange distance_range{5, 5};
};

struct Splits {
  std::vector<Question> train;
  std::vector<Question> eval;
};

// Stratified train/eval sets from disjoint seed ranges. Categories cycle
// round-robin, so a count divisible by four is evenly stratified. Overlapping
// seed ranges are a ConfigError.
Splits make_splits(const SplitConfig& config);

// Single deterministic question record for a given question seed; retries
// scene seeds internally until the category's preconditions hold.
Question make_question_record(std::uint64_t question_seed, Category category,
                              const SplitConfig& config);

// ---- dataset files -------------------------------------------------------

inline constexpr int kDatasetSchemaVersion = 1;

struct DatasetMeta {
  int schema_version = kDatasetSchemaVersion;
  std::string split;
  int vocab_version = Vocabulary::kVersion;
  std::uint64_t vocab_hash = 0;
  int grid_size = 0;
  int count = 0;
};

// Line-delimited JSON: one meta line followed by one question per line.
void write_dataset(const std::filesystem::path& path, const std::vector<Question>& questions,
                   const std::string& split_name, int grid_size);

struct Dataset {
  DatasetMeta meta;
  std::vector<Question> questions;
};

// Loads and validates a dataset file against the built-in vocabulary.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace microgrpo::taskgen
