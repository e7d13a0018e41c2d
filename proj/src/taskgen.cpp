// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#include "microgrpo/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "microgrpo/errors.hpp"
#include "microgrpo/rng.hpp"

namespace microgrpo::taskgen {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kMinObjects = 2;
constexpr int kMaxObjects = 9;
constexpr int kMaxGrid = 9;  // single-digit coordinates
constexpr int kMaxDepth = 9;

int manhattan(const SceneObject& a, const SceneObject& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

std::vector<int> encode_words(std::initializer_list<std::string_view> words) {
  const Vocabulary& v = builtin_vocabulary();
  std::vector<int> out;
  out.reserve(words.size());
  for (auto w : words) out.push_back(v.id(w));
  return out;
}

void append(std::vector<int>& dst, const std::vector<int>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

// Digits of a nonnegative integer as tokens, most significant first.
void append_number(std::vector<int>& dst, int value) {
  const Vocabulary& v = builtin_vocabulary();
  if (value == 0) {
    dst.push_back(v.digit(0));
    return;
  }
  std::vector<int> digits;
  for (int x = value; x > 0; x /= 10) digits.push_back(v.digit(x % 10));
  dst.insert(dst.end(), digits.rbegin(), digits.rend());
}

// "objects: cube at (1, 2) depth 3; ball at (4, 0) depth 7."
std::vector<int> scene_tokens(const Scene& scene) {
  const Vocabulary& v = builtin_vocabulary();
  std::vector<int> out;
  out.push_back(v.id("objects"));
  out.push_back(v.id(":"));
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& o = scene.objects[i];
    out.push_back(v.id(kObjectNouns[static_cast<std::size_t>(o.category)]));
    out.push_back(v.id("at"));
    out.push_back(v.id("("));
    append_number(out, o.x);
    out.push_back(v.id(","));
    append_number(out, o.y);
    out.push_back(v.id(")"));
    out.push_back(v.id("depth"));
    append_number(out, static_cast<int>(std::lround(o.depth)));
    out.push_back(v.id(i + 1 == scene.objects.size() ? "." : ";"));
  }
  return out;
}

int noun_id(const SceneObject& o) {
  return builtin_vocabulary().id(kObjectNouns[static_cast<std::size_t>(o.category)]);
}

std::vector<std::pair<int, int>> aligned_pairs(const Scene& scene) {
  std::vector<std::pair<int, int>> pairs;
  const auto& objs = scene.objects;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    for (std::size_t j = i + 1; j < objs.size(); ++j) {
      if (objs[i].x == objs[j].x || objs[i].y == objs[j].y) {
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return pairs;
}

void append_choice_list(std::vector<int>& text, const std::vector<int>& choice_tokens) {
  const Vocabulary& v = builtin_vocabulary();
  text.push_back(v.id("Choices"));
  text.push_back(v.id(":"));
  for (std::size_t i = 0; i < choice_tokens.size(); ++i) {
    if (i > 0) text.push_back(v.id("or"));
    text.push_back(choice_tokens[i]);
  }
}

int choice_value(const Vocabulary& v, int token_id) {
  // Numeric value of a digit token, or -1.
  const std::string_view tok = v.token(token_id);
  if (tok.size() == 1 && tok[0] >= '0' && tok[0] <= '9') return tok[0] - '0';
  return -1;
}

}  // namespace

Category category_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (name == kCategoryNames[i]) return static_cast<Category>(i);
  }
  throw ConfigError("unknown question category: '" + std::string(name) + "'");
}

Scene generate_scene(std::uint64_t seed, int grid_size, int n_objects) {
  if (grid_size < 2 || grid_size > kMaxGrid) {
    throw GenerationError("grid_size must be in [2, 9], got " + std::to_string(grid_size));
  }
  if (n_objects < kMinObjects || n_objects > kMaxObjects) {
    throw GenerationError("n_objects must be in [2, 9], got " + std::to_string(n_objects));
  }
  if (n_objects > grid_size * grid_size) {
    throw GenerationError("cannot place " + std::to_string(n_objects) + " objects on a " +
                          std::to_string(grid_size) + "x" + std::to_string(grid_size) + " grid");
  }

  Rng rng(derive_seed(seed, 0x5ce9eULL));

  // Distinct categories.
  std::vector<int> cats(kNumObjectCategories);
  std::iota(cats.begin(), cats.end(), 0);
  rng.shuffle(std::span<int>(cats));

  // Distinct cells.
  std::vector<int> cells(static_cast<std::size_t>(grid_size) * grid_size);
  std::iota(cells.begin(), cells.end(), 0);
  rng.shuffle(std::span<int>(cells));

  // Distinct integer depths in [1, 9]; integer spacing satisfies the 0.1
  // separation rule and keeps every depth a single token.
  std::vector<int> depths(kMaxDepth);
  std::iota(depths.begin(), depths.end(), 1);
  rng.shuffle(std::span<int>(depths));

  Scene scene;
  scene.grid_size = grid_size;
  scene.seed = seed;
  scene.objects.resize(static_cast<std::size_t>(n_objects));
  for (int i = 0; i < n_objects; ++i) {
    SceneObject& o = scene.objects[static_cast<std::size_t>(i)];
    o.id = i;
    o.category = cats[static_cast<std::size_t>(i)];
    o.x = cells[static_cast<std::size_t>(i)] % grid_size;
    o.y = cells[static_cast<std::size_t>(i)] / grid_size;
    o.depth = static_cast<double>(depths[static_cast<std::size_t>(i)]);
  }
  return scene;
}

bool scene_supports(const Scene& scene, Category category) {
  const int n = static_cast<int>(scene.objects.size());
  switch (category) {
    case Category::kCount:
      return n >= kMinObjects;
    case Category::kRelation:
      return !aligned_pairs(scene).empty();
    case Category::kDepth:
      return n >= 2;
    case Category::kDistance:
      return n >= 3;  // anchor plus at least two options
  }
  return false;
}

Question generate_question(const Scene& scene, Category category, std::uint64_t seed) {
  if (!scene_supports(scene, category)) {
    throw GenerationError(std::string("scene does not support category '") +
                          kCategoryNames[static_cast<std::size_t>(category)] + "'");
  }
  const Vocabulary& v = builtin_vocabulary();
  const int n = static_cast<int>(scene.objects.size());
  Rng rng(derive_seed(seed, 0x9ULL, static_cast<std::uint64_t>(category)));
  Question q;
  q.category = category;
  q.scene = scene;
  q.seed = seed;
  q.text_tokens = scene_tokens(scene);

  switch (category) {
    case Category::kCount: {
      const int lo = std::clamp(n - rng.uniform_int(0, 3), kMinObjects, kMaxObjects - 3);
      for (int c = lo; c < lo + 4; ++c) q.choice_tokens.push_back(v.digit(c));
      q.gold = n - lo;
      append(q.text_tokens, encode_words({"How", "many", "objects", "are", "there", "?"}));
      append_choice_list(q.text_tokens, q.choice_tokens);
      break;
    }
    case Category::kRelation: {
      const auto pairs = aligned_pairs(scene);
      auto [i, j] = pairs[rng.uniform_below(pairs.size())];
      if (rng.uniform() < 0.5) std::swap(i, j);  // orientation
      const SceneObject& a = scene.objects[static_cast<std::size_t>(i)];
      const SceneObject& b = scene.objects[static_cast<std::size_t>(j)];
      q.relation_pair = {i, j};
      q.choice_tokens = encode_words({"left", "right", "above", "below"});
      if (a.y == b.y) {
        q.gold = a.x < b.x ? 0 : 1;
      } else {
        q.gold = a.y > b.y ? 2 : 3;
      }
      append(q.text_tokens, encode_words({"Where", "is", "the"}));
      q.text_tokens.push_back(noun_id(a));
      append(q.text_tokens, encode_words({"relative", "to", "the"}));
      q.text_tokens.push_back(noun_id(b));
      q.text_tokens.push_back(v.id("?"));
      append_choice_list(q.text_tokens, q.choice_tokens);
      break;
    }
    case Category::kDepth: {
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span<int>(order));
      const int listed = std::min(4, n);
      q.listed_objects.assign(order.begin(), order.begin() + listed);
      int best = 0;
      for (int k = 1; k < listed; ++k) {
        const auto& objs = scene.objects;
        if (objs[static_cast<std::size_t>(q.listed_objects[static_cast<std::size_t>(k)])].depth <
            objs[static_cast<std::size_t>(q.listed_objects[static_cast<std::size_t>(best)])].depth) {
          best = k;
        }
      }
      q.gold = best;
      for (int idx : q.listed_objects) {
        q.choice_tokens.push_back(noun_id(scene.objects[static_cast<std::size_t>(idx)]));
      }
      append(q.text_tokens, encode_words({"Which", "of", "these", "objects", "is", "the",
                                          "closest", "to", "the", "camera", "?"}));
      append_choice_list(q.text_tokens, q.choice_tokens);
      break;
    }
    case Category::kDistance: {
      // Redraw until the nearest listed object is unique.
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 64) {
          throw GenerationError("could not find a distance question with a unique answer");
        }
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<int>(order));
        const int ref = order[0];
        const int listed = std::min(4, n - 1);
        std::vector<int> candidates(order.begin() + 1, order.begin() + 1 + listed);
        const SceneObject& anchor = scene.objects[static_cast<std::size_t>(ref)];
        int best = 0;
        bool tie = false;
        for (int k = 1; k < listed; ++k) {
          const int dk = manhattan(scene.objects[static_cast<std::size_t>(candidates[static_cast<std::size_t>(k)])], anchor);
          const int db = manhattan(scene.objects[static_cast<std::size_t>(candidates[static_cast<std::size_t>(best)])], anchor);
          if (dk < db) {
            best = k;
            tie = false;
          } else if (dk == db) {
            tie = true;
          }
        }
        if (tie) continue;
        q.ref_object = ref;
        q.listed_objects = candidates;
        q.gold = best;
        for (int idx : candidates) {
          q.choice_tokens.push_back(noun_id(scene.objects[static_cast<std::size_t>(idx)]));
        }
        append(q.text_tokens, encode_words({"Which", "of", "these", "objects", "is", "the",
                                            "nearest", "to", "the"}));
        q.text_tokens.push_back(noun_id(anchor));
        q.text_tokens.push_back(v.id("?"));
        append_choice_list(q.text_tokens, q.choice_tokens);
        break;
      }
      break;
    }
  }

  if (!verify_gold(q)) {
    throw GenerationError("generated question failed its own ground-truth check");
  }
  return q;
}

bool verify_gold(const Question& q) {
  const Vocabulary& v = builtin_vocabulary();
  const auto& objs = q.scene.objects;
  const int n_choices = static_cast<int>(q.choice_tokens.size());
  if (q.gold < 0 || q.gold >= n_choices) return false;

  // Evaluate every choice as a predicate over the scene; exactly one may hold.
  int true_count = 0;
  int true_index = -1;
  for (int c = 0; c < n_choices; ++c) {
    bool holds = false;
    switch (q.category) {
      case Category::kCount:
        holds = choice_value(v, q.choice_tokens[static_cast<std::size_t>(c)]) ==
                static_cast<int>(objs.size());
        break;
      case Category::kRelation: {
        const SceneObject& a = objs[static_cast<std::size_t>(q.relation_pair[0])];
        const SceneObject& b = objs[static_cast<std::size_t>(q.relation_pair[1])];
        const std::string_view dir = v.token(q.choice_tokens[static_cast<std::size_t>(c)]);
        if (dir == "left") holds = a.y == b.y && a.x < b.x;
        if (dir == "right") holds = a.y == b.y && a.x > b.x;
        if (dir == "above") holds = a.x == b.x && a.y > b.y;
        if (dir == "below") holds = a.x == b.x && a.y < b.y;
        break;
      }
      case Category::kDepth: {
        const SceneObject& o = objs[static_cast<std::size_t>(q.listed_objects[static_cast<std::size_t>(c)])];
        holds = true;
        for (int other : q.listed_objects) {
          if (other != o.id && objs[static_cast<std::size_t>(other)].depth <= o.depth) holds = false;
        }
        break;
      }
      case Category::kDistance: {
        const SceneObject& anchor = objs[static_cast<std::size_t>(q.ref_object)];
        const SceneObject& o = objs[static_cast<std::size_t>(q.listed_objects[static_cast<std::size_t>(c)])];
        holds = true;
        for (int other : q.listed_objects) {
          if (other != o.id &&
              manhattan(objs[static_cast<std::size_t>(other)], anchor) <= manhattan(o, anchor)) {
            holds = false;
          }
        }
        break;
      }
    }
    if (holds) {
      ++true_count;
      true_index = c;
    }
  }
  return true_count == 1 && true_index == q.gold;
}

const char* const kPromptPrefixText =
    "A conversation between User and Assistant. The user asks a question about the image, "
    "and the Assistant solves it. The assistant first thinks about the reasoning process in "
    "the mind and then provides the user with the answer.\n User: ";
const char* const kPromptSuffixText = " \n Assistant: Let me solve this step by step.\n <think>";

namespace {

const std::vector<int>& prompt_prefix_tokens() {
  static const std::vector<int> toks = builtin_vocabulary().encode(kPromptPrefixText);
  return toks;
}

const std::vector<int>& prompt_suffix_tokens() {
  static const std::vector<int> toks = builtin_vocabulary().encode(kPromptSuffixText);
  return toks;
}

}  // namespace

std::vector<int> render_prompt(const Question& q, int max_tokens) {
  std::vector<int> out = prompt_prefix_tokens();
  append(out, q.text_tokens);
  append(out, prompt_suffix_tokens());
  if (max_tokens > 0 && static_cast<int>(out.size()) > max_tokens) {
    throw SequenceTooLongError("prompt needs " + std::to_string(out.size()) +
                               " tokens, limit is " + std::to_string(max_tokens));
  }
  return out;
}

std::vector<int> gold_trace(const Question& q) {
  const Vocabulary& v = builtin_vocabulary();
  const auto& objs = q.scene.objects;
  std::vector<int> out;

  switch (q.category) {
    case Category::kCount: {
      append(out, encode_words({"there", "are"}));
      append_number(out, static_cast<int>(objs.size()));
      out.push_back(v.id("objects"));
      break;
    }
    case Category::kRelation: {
      const SceneObject& a = objs[static_cast<std::size_t>(q.relation_pair[0])];
      const SceneObject& b = objs[static_cast<std::size_t>(q.relation_pair[1])];
      out.push_back(v.id("the"));
      out.push_back(noun_id(a));
      append(out, encode_words({"at", "("}));
      append_number(out, a.x);
      out.push_back(v.id(","));
      append_number(out, a.y);
      out.push_back(v.id(")"));
      out.push_back(v.id("is"));
      out.push_back(q.choice_tokens[static_cast<std::size_t>(q.gold)]);
      append(out, encode_words({"of", "the"}));
      out.push_back(noun_id(b));
      append(out, encode_words({"at", "("}));
      append_number(out, b.x);
      out.push_back(v.id(","));
      append_number(out, b.y);
      out.push_back(v.id(")"));
      break;
    }
    case Category::kDepth:
    case Category::kDistance: {
      // Compare the winner with the runner-up among the listed objects.
      const bool is_depth = q.category == Category::kDepth;
      const SceneObject* anchor =
          is_depth ? nullptr : &objs[static_cast<std::size_t>(q.ref_object)];
      auto metric = [&](int obj_idx) {
        const SceneObject& o = objs[static_cast<std::size_t>(obj_idx)];
        return is_depth ? o.depth : static_cast<double>(manhattan(o, *anchor));
      };
      const int winner = q.listed_objects[static_cast<std::size_t>(q.gold)];
      int runner = -1;
      for (int idx : q.listed_objects) {
        if (idx == winner) continue;
        if (runner < 0 || metric(idx) < metric(runner)) runner = idx;
      }
      const char* noun = is_depth ? "depth" : "distance";
      const char* cmp = is_depth ? "closer" : "nearer";
      out.push_back(v.id("the"));
      out.push_back(noun_id(objs[static_cast<std::size_t>(winner)]));
      out.push_back(v.id(noun));
      append_number(out, static_cast<int>(std::lround(metric(winner))));
      out.push_back(v.id("is"));
      out.push_back(v.id(cmp));
      out.push_back(v.id("than"));
      out.push_back(v.id("the"));
      out.push_back(noun_id(objs[static_cast<std::size_t>(runner)]));
      out.push_back(v.id(noun));
      append_number(out, static_cast<int>(std::lround(metric(runner))));
      break;
    }
  }

  out.push_back(v.think_close());
  out.push_back(v.answer_open());
  out.push_back(q.choice_tokens[static_cast<std::size_t>(q.gold)]);
  out.push_back(v.answer_close());
  out.push_back(v.stop());
  return out;
}

Question make_question_record(std::uint64_t question_seed, Category category,
                              const SplitConfig& config) {
  const CategoryObjectRange range = [&] {
    switch (category) {
      case Category::kCount: return config.count_range;
      case Category::kRelation: return config.relation_range;
      case Category::kDepth: return config.depth_range;
      case Category::kDistance: return config.distance_range;
    }
    return CategoryObjectRange{};
  }();

  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng pick(derive_seed(question_seed, 0x9a11, attempt));
    const int n = pick.uniform_int(range.min_objects, range.max_objects);
    const std::uint64_t scene_seed = derive_seed(question_seed, 0x5ce9e5eedULL, attempt);
    Scene scene = generate_scene(scene_seed, config.grid_size, n);
    if (!scene_supports(scene, category)) continue;
    try {
      return generate_question(scene, category, derive_seed(question_seed, 0x9e57, attempt));
    } catch (const GenerationError&) {
      continue;
    }
  }
  throw GenerationError("exhausted attempts generating a question for seed " +
                        std::to_string(question_seed));
}

Splits make_splits(const SplitConfig& config) {
  if (config.train_count <= 0 || config.eval_count <= 0) {
    throw ConfigError("split sizes must be positive");
  }
  const std::uint64_t train_end = config.train_seed_start + static_cast<std::uint64_t>(config.train_count);
  const std::uint64_t eval_end = config.eval_seed_start + static_cast<std::uint64_t>(config.eval_count);
  const bool overlap =
      config.train_seed_start < eval_end && config.eval_seed_start < train_end;
  if (overlap) {
    throw ConfigError("train and eval seed ranges overlap");
  }

  Splits splits;
  splits.train.reserve(static_cast<std::size_t>(config.train_count));
  splits.eval.reserve(static_cast<std::size_t>(config.eval_count));
  for (int i = 0; i < config.train_count; ++i) {
    splits.train.push_back(make_question_record(config.train_seed_start + static_cast<std::uint64_t>(i),
                                                static_cast<Category>(i % 4), config));
  }
  for (int i = 0; i < config.eval_count; ++i) {
    splits.eval.push_back(make_question_record(config.eval_seed_start + static_cast<std::uint64_t>(i),
                                               static_cast<Category>(i % 4), config));
  }
  return splits;
}

// ---- dataset files ---------------------------------------------------------

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ordered_json question_to_json(const Question& q) {
  ordered_json rec;
  rec["seed"] = q.seed;
  rec["category"] = kCategoryNames[static_cast<std::size_t>(q.category)];
  rec["gold"] = q.gold;
  ordered_json choices = ordered_json::array();
  for (int t : q.choice_tokens) choices.push_back(std::string(builtin_vocabulary().token(t)));
  rec["choices"] = choices;
  rec["text"] = q.text_tokens;
  ordered_json scene;
  scene["seed"] = q.scene.seed;
  scene["grid_size"] = q.scene.grid_size;
  ordered_json objects = ordered_json::array();
  for (const SceneObject& o : q.scene.objects) {
    ordered_json obj;
    obj["id"] = o.id;
    obj["category"] = kObjectNouns[static_cast<std::size_t>(o.category)];
    obj["x"] = o.x;
    obj["y"] = o.y;
    obj["depth"] = o.depth;
    objects.push_back(obj);
  }
  scene["objects"] = objects;
  rec["scene"] = scene;
  rec["relation_pair"] = q.relation_pair;
  rec["ref_object"] = q.ref_object;
  rec["listed_objects"] = q.listed_objects;
  return rec;
}

int object_category_from_name(const std::string& name) {
  for (int i = 0; i < kNumObjectCategories; ++i) {
    if (name == kObjectNouns[static_cast<std::size_t>(i)]) return i;
  }
  throw InvalidInputError("unknown object category: '" + name + "'");
}

Question question_from_json(const ordered_json& rec) {
  Question q;
  q.seed = rec.at("seed").get<std::uint64_t>();
  q.category = category_from_name(rec.at("category").get<std::string>());
  q.gold = rec.at("gold").get<int>();
  for (const auto& c : rec.at("choices")) {
    q.choice_tokens.push_back(builtin_vocabulary().id(c.get<std::string>()));
  }
  q.text_tokens = rec.at("text").get<std::vector<int>>();
  const auto& scene = rec.at("scene");
  q.scene.seed = scene.at("seed").get<std::uint64_t>();
  q.scene.grid_size = scene.at("grid_size").get<int>();
  for (const auto& obj : scene.at("objects")) {
    SceneObject o;
    o.id = obj.at("id").get<int>();
    o.category = object_category_from_name(obj.at("category").get<std::string>());
    o.x = obj.at("x").get<int>();
    o.y = obj.at("y").get<int>();
    o.depth = obj.at("depth").get<double>();
    q.scene.objects.push_back(o);
  }
  const auto& pair = rec.at("relation_pair");
  q.relation_pair = {pair.at(0).get<int>(), pair.at(1).get<int>()};
  q.ref_object = rec.at("ref_object").get<int>();
  q.listed_objects = rec.at("listed_objects").get<std::vector<int>>();
  return q;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const std::vector<Question>& questions,
                   const std::string& split_name, int grid_size) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open dataset file for writing: " + path.string());

  ordered_json meta;
  meta["schema_version"] = kDatasetSchemaVersion;
  meta["kind"] = "microgrpo.dataset";
  meta["split"] = split_name;
  meta["vocab_version"] = Vocabulary::kVersion;
  meta["vocab_hash"] = hash_hex(builtin_vocabulary().hash());
  meta["grid_size"] = grid_size;
  meta["count"] = questions.size();
  out << meta.dump() << '\n';
  for (const Question& q : questions) {
    out << question_to_json(q).dump() << '\n';
  }
  if (!out) throw Error("failed writing dataset file: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error("empty dataset file: " + path.string());
  ordered_json meta = ordered_json::parse(line);
  if (meta.value("kind", "") != "microgrpo.dataset") {
    throw IncompatibilityError("not a microgrpo dataset: " + path.string());
  }
  if (meta.at("schema_version").get<int>() != kDatasetSchemaVersion) {
    throw IncompatibilityError("unsupported dataset schema version in " + path.string());
  }
  if (meta.at("vocab_hash").get<std::string>() != hash_hex(builtin_vocabulary().hash())) {
    throw IncompatibilityError("dataset was generated with a different vocabulary: " +
                               path.string());
  }

  Dataset ds;
  ds.meta.schema_version = meta.at("schema_version").get<int>();
  ds.meta.split = meta.value("split", "");
  ds.meta.vocab_version = meta.at("vocab_version").get<int>();
  ds.meta.grid_size = meta.at("grid_size").get<int>();
  ds.meta.count = meta.at("count").get<int>();
  ds.meta.vocab_hash = builtin_vocabulary().hash();

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.questions.push_back(question_from_json(ordered_json::parse(line)));
  }
  if (static_cast<int>(ds.questions.size()) != ds.meta.count) {
    throw IncompatibilityError("dataset record count does not match meta line in " +
                               path.string());
  }
  return ds;
}

}  // namespace microgrpo::taskgen
