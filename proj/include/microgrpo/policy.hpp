// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace microgrpo::policy {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Architecture and init of the autoregressive policy: a decoder-only
// transformer with one attention head, learned positional embeddings, and an
// MLP hidden width of 4*d_model. All math is double precision so that
// finite-difference gradient checks are meaningful.
struct PolicyConfig {
  int vocab_size = 0;
  int context_window = 0;
  int d_model = 64;
  int n_layers = 2;
  std::uint64_t seed = 0;
  double init_std = 0.08;

  bool operator==(const PolicyConfig&) const = default;
};

// One sampled response: realized tokens plus their log-probabilities under the
// sampling policy (model log-probs, i.e. temperature 1, which is what the
// ratio and KL terms consume).
struct Rollout {
  std::vector<int> tokens;
  std::vector<double> logprobs;
};

struct SamplingConfig {
  double temperature = 1.0;  // below 1e-6 switches to greedy argmax
  int max_len = 64;
  int stop_token = -1;
};

// Named half of the trainable parameters, as a contiguous [begin, end) range
// of the flat parameter vector. "encoder" covers the embeddings and the lower
// half of the layer stack, "head" the upper half plus the output projection.
struct ParamGroup {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Index ranges excluded from optimizer updates.
using FreezeRanges = std::vector<std::pair<std::size_t, std::size_t>>;

struct PolicySnapshot {
  static constexpr int kFormatVersion = 1;
  int format_version = kFormatVersion;
  PolicyConfig config;
  std::vector<double> parameters;
};

class DecodeState;
struct ForwardTrace;

class Policy {
 public:
  // Deterministic initialization from config.seed. Throws ConfigError for
  // vocab_size < 4 or otherwise unusable dimensions.
  explicit Policy(const PolicyConfig& config);

  const PolicyConfig& config() const { return config_; }
  std::size_t n_params() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters_mut() { return params_; }

  std::array<ParamGroup, 2> param_groups() const;
  FreezeRanges freeze_ranges(std::span<const std::string> group_names) const;

  // Teacher-forced log-probabilities of every response token given the prompt.
  // Throws SequenceTooLongError if prompt+response exceeds the context window.
  std::vector<double> log_probs(std::span<const int> prompt,
                                std::span<const int> response) const;

  // Log-softmax over the next token after `context` (context must be
  // non-empty). Exposed for tests and sampling oracles.
  std::vector<double> next_log_distribution(std::span<const int> context) const;

  // Autoregressive sampling; deterministic given rng_seed. Stops after
  // emitting cfg.stop_token or cfg.max_len tokens, whichever comes first; the
  // stop token is part of the returned rollout.
  Rollout sample(std::span<const int> prompt, const SamplingConfig& cfg,
                 std::uint64_t rng_seed) const;

  // Incremental decode with KV caches, for sharing prompt work across a group.
  DecodeState prefill(std::span<const int> prompt) const;
  Rollout sample_from(const DecodeState& prompt_state, const SamplingConfig& cfg,
                      std::uint64_t rng_seed) const;
  // Log-probs of a fixed response continued from a prefilled state.
  std::vector<double> teacher_logprobs_from(const DecodeState& prompt_state,
                                            std::span<const int> response) const;

  // Full forward pass with saved activations; response log-probs can be read
  // off the trace and a weighted log-prob gradient pushed back through it.
  ForwardTrace forward_for_gradient(std::span<const int> prompt,
                                    std::span<const int> response) const;
  // Adds  sum_t coeffs[t] * d log pi(response[t]) / d theta  into grad
  // (ascent direction). grad must have n_params() entries.
  void backward_logprob_gradient(const ForwardTrace& trace, std::span<const double> coeffs,
                                 std::span<double> grad) const;

  PolicySnapshot save_snapshot() const;
  static Policy load_snapshot(const PolicySnapshot& snapshot);

 private:
  friend class DecodeState;
  struct Layout;
  const Layout& layout() const;

  PolicyConfig config_;
  std::vector<double> params_;
};

// ---- optimizer -------------------------------------------------------------

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Ascent-direction optimizer over the flat parameter vector. Frozen ranges are
// skipped entirely: neither the parameters nor the Adam moments move, so
// frozen groups stay bit-identical.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, std::size_t n_params);

  // Throws GradientError (with the offending index) on non-finite entries;
  // parameters are untouched in that case.
  void step(std::span<double> params, std::span<const double> grad,
            const FreezeRanges& frozen);

  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

// Accumulates the group's weighted log-prob gradient and applies one ascent
// step: theta += lr-scaled update along sum_{i,t} w[i][t] * d log pi / d theta.
// Rollout i pairs prompts/responses/weights by index.
void apply_gradient(Policy& policy, Optimizer& optimizer,
                    std::span<const std::vector<int>> prompts,
                    std::span<const std::vector<int>> responses,
                    std::span<const std::vector<double>> token_weights,
                    std::span<const std::string> freeze_groups);

// ---- snapshot files --------------------------------------------------------

// Binary container, little-endian, FNV-1a checksummed; layout documented in
// docs/formats.md. Corruption or a version mismatch throws SnapshotError.
void write_snapshot_file(const std::filesystem::path& path, const Policy& policy);
Policy read_snapshot_file(const std::filesystem::path& path);

// ---- incremental decoding ---------------------------------------------------

class DecodeState {
 public:
  // Logits over the vocabulary for the next position.
  const Vector& logits() const { return logits_; }
  // Model log-prob (temperature 1) that `token` comes next.
  double logprob_of(int token) const;
  // Feeds one token. Throws SequenceTooLongError past the context window.
  void advance(int token);
  int position() const { return position_; }

 private:
  friend class Policy;
  DecodeState(const Policy& policy, std::span<const int> prompt);

  const Policy* policy_;
  int position_ = 0;
  std::vector<Matrix> k_cache_;  // per layer, context_window x d
  std::vector<Matrix> v_cache_;
  Vector logits_;
  double logsumexp_ = 0.0;
};

// Saved activations of one teacher-forced forward pass.
struct ForwardTrace {
  std::vector<int> fed;        // prompt + response[:-1]
  std::vector<int> response;   // the tokens whose log-probs are on the trace
  int prompt_len = 0;
  std::vector<double> response_logprobs;

  // Internals consumed by backward_logprob_gradient.
  Matrix x0;
  struct LayerActs {
    Matrix xhat1, n1, q, k, v, probs, attn_out, x1;
    Matrix xhat2, n2, f1, gelu_out, x2;
    Vector inv_std1, inv_std2;
  };
  std::vector<LayerActs> layers;
  Matrix xhat_f, hf;
  Vector inv_std_f;
  Matrix logits;
  Vector logsumexp;
};

}  // namespace microgrpo::policy
