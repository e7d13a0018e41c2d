// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#include "microgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "microgrpo/errors.hpp"
#include "microgrpo/rng.hpp"

namespace microgrpo::policy {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGreedyTemperature = 1e-6;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

double logsumexp_of(const Vector& logits) {
  const double m = logits.maxCoeff();
  double s = 0.0;
  for (int i = 0; i < logits.size(); ++i) s += std::exp(logits[i] - m);
  return m + std::log(s);
}

}  // namespace

// ---- parameter layout -------------------------------------------------------

struct Policy::Layout {
  int V = 0, L = 0, d = 0, h = 0, n_layers = 0;
  struct Layer {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::size_t tok_emb = 0, pos_emb = 0;
  std::vector<Layer> layers;
  std::size_t lnf_g = 0, lnf_b = 0, w_out = 0, b_out = 0;
  std::size_t total = 0;
  std::size_t encoder_end = 0;  // embeddings + lower half of the layer stack

  explicit Layout(const PolicyConfig& c) {
    V = c.vocab_size;
    L = c.context_window;
    d = c.d_model;
    h = 4 * d;
    n_layers = c.n_layers;

    std::size_t off = 0;
    auto take = [&off](std::size_t n) {
      const std::size_t at = off;
      off += n;
      return at;
    };
    const auto sV = static_cast<std::size_t>(V);
    const auto sL = static_cast<std::size_t>(L);
    const auto sd = static_cast<std::size_t>(d);
    const auto sh = static_cast<std::size_t>(h);

    tok_emb = take(sV * sd);
    pos_emb = take(sL * sd);
    layers.resize(static_cast<std::size_t>(n_layers));
    for (int l = 0; l < n_layers; ++l) {
      if (l == n_layers / 2) encoder_end = off;
      Layer& ly = layers[static_cast<std::size_t>(l)];
      ly.ln1_g = take(sd);
      ly.ln1_b = take(sd);
      ly.wq = take(sd * sd);
      ly.bq = take(sd);
      ly.wk = take(sd * sd);
      ly.bk = take(sd);
      ly.wv = take(sd * sd);
      ly.bv = take(sd);
      ly.wo = take(sd * sd);
      ly.bo = take(sd);
      ly.ln2_g = take(sd);
      ly.ln2_b = take(sd);
      ly.w1 = take(sd * sh);
      ly.b1 = take(sh);
      ly.w2 = take(sh * sd);
      ly.b2 = take(sd);
    }
    if (n_layers / 2 == n_layers) encoder_end = off;  // unreachable for n_layers >= 1
    lnf_g = take(sd);
    lnf_b = take(sd);
    w_out = take(sd * sV);
    b_out = take(sV);
    total = off;
  }
};

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;
using MutVecMap = Eigen::Map<Vector>;

struct LayerWeights {
  ConstVecMap ln1_g, ln1_b;
  ConstMap wq, wk, wv, wo;
  ConstVecMap bq, bk, bv, bo;
  ConstVecMap ln2_g, ln2_b;
  ConstMap w1, w2;
  ConstVecMap b1, b2;
};

struct Weights {
  ConstMap tok_emb, pos_emb;
  std::vector<LayerWeights> layers;
  ConstVecMap lnf_g, lnf_b;
  ConstMap w_out;
  ConstVecMap b_out;
};

Weights map_weights(const double* p, const Policy::Layout& lo) {
  Weights w{ConstMap(p + lo.tok_emb, lo.V, lo.d), ConstMap(p + lo.pos_emb, lo.L, lo.d),
            {},
            ConstVecMap(p + lo.lnf_g, lo.d), ConstVecMap(p + lo.lnf_b, lo.d),
            ConstMap(p + lo.w_out, lo.d, lo.V), ConstVecMap(p + lo.b_out, lo.V)};
  w.layers.reserve(lo.layers.size());
  for (const auto& ly : lo.layers) {
    w.layers.push_back(LayerWeights{
        ConstVecMap(p + ly.ln1_g, lo.d), ConstVecMap(p + ly.ln1_b, lo.d),
        ConstMap(p + ly.wq, lo.d, lo.d), ConstMap(p + ly.wk, lo.d, lo.d),
        ConstMap(p + ly.wv, lo.d, lo.d), ConstMap(p + ly.wo, lo.d, lo.d),
        ConstVecMap(p + ly.bq, lo.d), ConstVecMap(p + ly.bk, lo.d),
        ConstVecMap(p + ly.bv, lo.d), ConstVecMap(p + ly.bo, lo.d),
        ConstVecMap(p + ly.ln2_g, lo.d), ConstVecMap(p + ly.ln2_b, lo.d),
        ConstMap(p + ly.w1, lo.d, lo.h), ConstMap(p + ly.w2, lo.h, lo.d),
        ConstVecMap(p + ly.b1, lo.h), ConstVecMap(p + ly.b2, lo.d)});
  }
  return w;
}

// Row-wise layer norm over X; fills xhat and inv_std, returns gamma*xhat+beta.
Matrix layer_norm(const Matrix& x, const ConstVecMap& gamma, const ConstVecMap& beta,
                  Matrix& xhat, Vector& inv_std) {
  const auto T = x.rows();
  const auto d = x.cols();
  xhat.resize(T, d);
  inv_std.resize(T);
  Matrix out(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double mu = x.row(t).mean();
    const double var = (x.row(t).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_std[t] = is;
    xhat.row(t) = (x.row(t).array() - mu) * is;
    out.row(t) = xhat.row(t).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  return out;
}

// Backward through layer norm; accumulates into g_gamma/g_beta, returns dX.
Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Vector& inv_std,
                           const ConstVecMap& gamma, MutVecMap g_gamma, MutVecMap g_beta) {
  const auto T = dy.rows();
  const auto d = dy.cols();
  Matrix dx(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto gy = dy.row(t).cwiseProduct(gamma.transpose());
    const double m1 = gy.mean();
    const double m2 = gy.cwiseProduct(xhat.row(t)).mean();
    dx.row(t) = (gy.array() - m1 - xhat.row(t).array() * m2) * inv_std[t];
    g_gamma += dy.row(t).cwiseProduct(xhat.row(t)).transpose();
    g_beta += dy.row(t).transpose();
  }
  return dx;
}

Vector layer_norm_vec(const Vector& x, const ConstVecMap& gamma, const ConstVecMap& beta) {
  const double mu = x.mean();
  const double var = (x.array() - mu).square().mean();
  const double is = 1.0 / std::sqrt(var + kLnEps);
  return (((x.array() - mu) * is) * gamma.array()).matrix() + beta;
}

}  // namespace

const Policy::Layout& Policy::layout() const {
  // Layout is deterministic in the config; cache per policy instance.
  static thread_local PolicyConfig cached_config;
  static thread_local std::unique_ptr<Layout> cached;
  if (!cached || !(cached_config == config_)) {
    cached = std::make_unique<Layout>(config_);
    cached_config = config_;
  }
  return *cached;
}

Policy::Policy(const PolicyConfig& config) : config_(config) {
  if (config.vocab_size < 4) {
    throw ConfigError("vocab_size must be >= 4, got " + std::to_string(config.vocab_size));
  }
  if (config.context_window < 2) {
    throw ConfigError("context_window must be >= 2, got " +
                      std::to_string(config.context_window));
  }
  if (config.d_model < 2 || config.n_layers < 1) {
    throw ConfigError("d_model must be >= 2 and n_layers >= 1");
  }
  if (!(config.init_std > 0.0) || !std::isfinite(config.init_std)) {
    throw ConfigError("init_std must be positive and finite");
  }

  const Layout lo(config_);
  params_.assign(lo.total, 0.0);
  Rng rng(derive_seed(config.seed, 0x1417ULL));

  auto fill_normal = [&](std::size_t off, std::size_t n, double std) {
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = rng.normal(0.0, std);
  };
  auto fill_const = [&](std::size_t off, std::size_t n, double v) {
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = v;
  };

  const auto sV = static_cast<std::size_t>(lo.V);
  const auto sL = static_cast<std::size_t>(lo.L);
  const auto sd = static_cast<std::size_t>(lo.d);
  const auto sh = static_cast<std::size_t>(lo.h);
  const double s = config.init_std;
  // Residual-branch output projections get a depth-scaled init.
  const double s_resid = s / std::sqrt(2.0 * static_cast<double>(lo.n_layers));

  fill_normal(lo.tok_emb, sV * sd, s);
  fill_normal(lo.pos_emb, sL * sd, s);
  for (const auto& ly : lo.layers) {
    fill_const(ly.ln1_g, sd, 1.0);
    fill_normal(ly.wq, sd * sd, s);
    fill_normal(ly.wk, sd * sd, s);
    fill_normal(ly.wv, sd * sd, s);
    fill_normal(ly.wo, sd * sd, s_resid);
    fill_const(ly.ln2_g, sd, 1.0);
    fill_normal(ly.w1, sd * sh, s);
    fill_normal(ly.w2, sh * sd, s_resid);
  }
  fill_const(lo.lnf_g, sd, 1.0);
  fill_normal(lo.w_out, sd * sV, s);
}

std::array<ParamGroup, 2> Policy::param_groups() const {
  const Layout& lo = layout();
  return {ParamGroup{"encoder", 0, lo.encoder_end},
          ParamGroup{"head", lo.encoder_end, lo.total}};
}

FreezeRanges Policy::freeze_ranges(std::span<const std::string> group_names) const {
  FreezeRanges out;
  const auto groups = param_groups();
  for (const std::string& name : group_names) {
    bool known = false;
    for (const ParamGroup& g : groups) {
      if (g.name == name) {
        out.emplace_back(g.begin, g.end);
        known = true;
      }
    }
    if (!known) throw ConfigError("unknown parameter group: '" + name + "'");
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---- forward ----------------------------------------------------------------

ForwardTrace Policy::forward_for_gradient(std::span<const int> prompt,
                                          std::span<const int> response) const {
  const Layout& lo = layout();
  if (prompt.empty()) throw InvalidInputError("prompt must be non-empty");
  const int P = static_cast<int>(prompt.size());
  const int R = static_cast<int>(response.size());
  if (P + R > lo.L) {
    throw SequenceTooLongError("sequence of " + std::to_string(P + R) +
                               " tokens exceeds context window " + std::to_string(lo.L));
  }
  for (int t : prompt) {
    if (t < 0 || t >= lo.V) throw InvalidInputError("prompt token out of range");
  }
  for (int t : response) {
    if (t < 0 || t >= lo.V) throw InvalidInputError("response token out of range");
  }

  ForwardTrace tr;
  tr.prompt_len = P;
  tr.response.assign(response.begin(), response.end());
  tr.fed.assign(prompt.begin(), prompt.end());
  if (R > 1) tr.fed.insert(tr.fed.end(), response.begin(), response.end() - 1);

  const int T = static_cast<int>(tr.fed.size());
  const Weights w = map_weights(params_.data(), lo);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(lo.d));

  tr.x0.resize(T, lo.d);
  for (int t = 0; t < T; ++t) {
    tr.x0.row(t) = w.tok_emb.row(tr.fed[static_cast<std::size_t>(t)]) + w.pos_emb.row(t);
  }

  tr.layers.resize(static_cast<std::size_t>(lo.n_layers));
  const Matrix* x = &tr.x0;
  for (int l = 0; l < lo.n_layers; ++l) {
    auto& acts = tr.layers[static_cast<std::size_t>(l)];
    const LayerWeights& lw = w.layers[static_cast<std::size_t>(l)];

    acts.n1 = layer_norm(*x, lw.ln1_g, lw.ln1_b, acts.xhat1, acts.inv_std1);
    acts.q = (acts.n1 * lw.wq).rowwise() + lw.bq.transpose();
    acts.k = (acts.n1 * lw.wk).rowwise() + lw.bk.transpose();
    acts.v = (acts.n1 * lw.wv).rowwise() + lw.bv.transpose();

    Matrix scores = acts.q * acts.k.transpose() * inv_sqrt_d;
    acts.probs = Matrix::Zero(T, T);
    for (int t = 0; t < T; ++t) {
      auto row = scores.row(t).head(t + 1);
      const double m = row.maxCoeff();
      Eigen::RowVectorXd e = (row.array() - m).exp();
      acts.probs.row(t).head(t + 1) = e / e.sum();
    }
    acts.attn_out = acts.probs * acts.v;
    acts.x1 = *x + ((acts.attn_out * lw.wo).rowwise() + lw.bo.transpose());

    acts.n2 = layer_norm(acts.x1, lw.ln2_g, lw.ln2_b, acts.xhat2, acts.inv_std2);
    acts.f1 = (acts.n2 * lw.w1).rowwise() + lw.b1.transpose();
    acts.gelu_out = acts.f1.unaryExpr([](double v) { return gelu(v); });
    acts.x2 = acts.x1 + ((acts.gelu_out * lw.w2).rowwise() + lw.b2.transpose());
    x = &acts.x2;
  }

  tr.hf = layer_norm(*x, w.lnf_g, w.lnf_b, tr.xhat_f, tr.inv_std_f);
  tr.logits = (tr.hf * w.w_out).rowwise() + w.b_out.transpose();
  tr.logsumexp.resize(T);
  for (int t = 0; t < T; ++t) {
    const double m = tr.logits.row(t).maxCoeff();
    tr.logsumexp[t] = m + std::log((tr.logits.row(t).array() - m).exp().sum());
  }

  tr.response_logprobs.resize(static_cast<std::size_t>(R));
  for (int t = 0; t < R; ++t) {
    const int row = P - 1 + t;
    tr.response_logprobs[static_cast<std::size_t>(t)] =
        tr.logits(row, response[static_cast<std::size_t>(t)]) - tr.logsumexp[row];
  }
  return tr;
}

std::vector<double> Policy::log_probs(std::span<const int> prompt,
                                      std::span<const int> response) const {
  if (response.empty()) {
    if (prompt.empty()) throw InvalidInputError("prompt must be non-empty");
    return {};
  }
  return forward_for_gradient(prompt, response).response_logprobs;
}

std::vector<double> Policy::next_log_distribution(std::span<const int> context) const {
  if (context.empty()) throw InvalidInputError("context must be non-empty");
  DecodeState state(*this, context);
  const Vector& logits = state.logits();
  const double lse = logsumexp_of(logits);
  std::vector<double> out(static_cast<std::size_t>(logits.size()));
  for (int i = 0; i < logits.size(); ++i) out[static_cast<std::size_t>(i)] = logits[i] - lse;
  return out;
}

// ---- backward ---------------------------------------------------------------

void Policy::backward_logprob_gradient(const ForwardTrace& tr, std::span<const double> coeffs,
                                       std::span<double> grad) const {
  const Layout& lo = layout();
  if (grad.size() != lo.total) throw InvalidInputError("gradient buffer size mismatch");
  if (coeffs.size() != tr.response.size()) {
    throw InvalidInputError("coefficient count does not match response length");
  }
  const int T = static_cast<int>(tr.fed.size());
  const int R = static_cast<int>(tr.response.size());
  if (R == 0) return;

  const Weights w = map_weights(params_.data(), lo);
  double* g = grad.data();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(lo.d));

  // d/dlogits of sum_t c_t * (logit[y_t] - lse_t), nonzero only at response rows.
  Matrix dlogits = Matrix::Zero(T, lo.V);
  for (int t = 0; t < R; ++t) {
    const double c = coeffs[static_cast<std::size_t>(t)];
    if (c == 0.0) continue;
    const int row = tr.prompt_len - 1 + t;
    dlogits.row(row) -= c * (tr.logits.row(row).array() - tr.logsumexp[row]).exp().matrix();
    dlogits(row, tr.response[static_cast<std::size_t>(t)]) += c;
  }

  MutMap g_wout(g + lo.w_out, lo.d, lo.V);
  MutVecMap g_bout(g + lo.b_out, lo.V);
  g_wout += tr.hf.transpose() * dlogits;
  g_bout += dlogits.colwise().sum().transpose();
  Matrix dhf = dlogits * w.w_out.transpose();

  Matrix dx = layer_norm_backward(dhf, tr.xhat_f, tr.inv_std_f, w.lnf_g,
                                  MutVecMap(g + lo.lnf_g, lo.d), MutVecMap(g + lo.lnf_b, lo.d));

  for (int l = lo.n_layers - 1; l >= 0; --l) {
    const auto& acts = tr.layers[static_cast<std::size_t>(l)];
    const auto& lw = w.layers[static_cast<std::size_t>(l)];
    const auto& off = lo.layers[static_cast<std::size_t>(l)];

    // MLP block: x2 = x1 + gelu(n2*w1 + b1)*w2 + b2
    Matrix df2 = dx;  // gradient w.r.t. the MLP output
    MutMap g_w2(g + off.w2, lo.h, lo.d);
    MutVecMap g_b2(g + off.b2, lo.d);
    g_w2 += acts.gelu_out.transpose() * df2;
    g_b2 += df2.colwise().sum().transpose();
    Matrix dgelu = df2 * lw.w2.transpose();
    Matrix df1 = dgelu.cwiseProduct(acts.f1.unaryExpr([](double v) { return gelu_grad(v); }));
    MutMap g_w1(g + off.w1, lo.d, lo.h);
    MutVecMap g_b1(g + off.b1, lo.h);
    g_w1 += acts.n2.transpose() * df1;
    g_b1 += df1.colwise().sum().transpose();
    Matrix dn2 = df1 * lw.w1.transpose();
    Matrix dx1 = dx + layer_norm_backward(dn2, acts.xhat2, acts.inv_std2, lw.ln2_g,
                                          MutVecMap(g + off.ln2_g, lo.d),
                                          MutVecMap(g + off.ln2_b, lo.d));

    // Attention block: x1 = x0 + (probs * v) * wo + bo
    MutMap g_wo(g + off.wo, lo.d, lo.d);
    MutVecMap g_bo(g + off.bo, lo.d);
    g_wo += acts.attn_out.transpose() * dx1;
    g_bo += dx1.colwise().sum().transpose();
    Matrix dattn = dx1 * lw.wo.transpose();
    Matrix dprobs = dattn * acts.v.transpose();
    Matrix dv = acts.probs.transpose() * dattn;

    Matrix dscores = Matrix::Zero(T, T);
    for (int t = 0; t < T; ++t) {
      auto p = acts.probs.row(t).head(t + 1);
      auto dp = dprobs.row(t).head(t + 1);
      const double dot = p.cwiseProduct(dp).sum();
      dscores.row(t).head(t + 1) = p.cwiseProduct(dp.array() - dot);
    }
    Matrix dq = dscores * acts.k * inv_sqrt_d;
    Matrix dk = dscores.transpose() * acts.q * inv_sqrt_d;

    MutMap g_wq(g + off.wq, lo.d, lo.d);
    MutMap g_wk(g + off.wk, lo.d, lo.d);
    MutMap g_wv(g + off.wv, lo.d, lo.d);
    MutVecMap g_bq(g + off.bq, lo.d);
    MutVecMap g_bk(g + off.bk, lo.d);
    MutVecMap g_bv(g + off.bv, lo.d);
    g_wq += acts.n1.transpose() * dq;
    g_wk += acts.n1.transpose() * dk;
    g_wv += acts.n1.transpose() * dv;
    g_bq += dq.colwise().sum().transpose();
    g_bk += dk.colwise().sum().transpose();
    g_bv += dv.colwise().sum().transpose();

    Matrix dn1 = dq * lw.wq.transpose() + dk * lw.wk.transpose() + dv * lw.wv.transpose();
    dx = dx1 + layer_norm_backward(dn1, acts.xhat1, acts.inv_std1, lw.ln1_g,
                                   MutVecMap(g + off.ln1_g, lo.d),
                                   MutVecMap(g + off.ln1_b, lo.d));
  }

  MutMap g_tok(g + lo.tok_emb, lo.V, lo.d);
  MutMap g_pos(g + lo.pos_emb, lo.L, lo.d);
  for (int t = 0; t < T; ++t) {
    g_tok.row(tr.fed[static_cast<std::size_t>(t)]) += dx.row(t);
    g_pos.row(t) += dx.row(t);
  }
}

namespace {

void gelu_unused() {}  // keeps clang-tidy quiet about the header-only helpers

}  // namespace

// ---- incremental decoding ----------------------------------------------------

DecodeState::DecodeState(const Policy& policy, std::span<const int> prompt)
    : policy_(&policy) {
  const auto& lo = policy.layout();
  k_cache_.assign(static_cast<std::size_t>(lo.n_layers), Matrix::Zero(lo.L, lo.d));
  v_cache_.assign(static_cast<std::size_t>(lo.n_layers), Matrix::Zero(lo.L, lo.d));
  logits_.resize(lo.V);
  if (prompt.empty()) throw InvalidInputError("prompt must be non-empty");
  for (int t : prompt) advance(t);
}

double DecodeState::logprob_of(int token) const {
  if (token < 0 || token >= logits_.size()) {
    throw InvalidInputError("token out of range: " + std::to_string(token));
  }
  return logits_[token] - logsumexp_;
}

void DecodeState::advance(int token) {
  const Policy& policy = *policy_;
  const auto& lo = policy.layout();
  if (token < 0 || token >= lo.V) {
    throw InvalidInputError("token out of range: " + std::to_string(token));
  }
  if (position_ >= lo.L) {
    throw SequenceTooLongError("decode position " + std::to_string(position_) +
                               " exceeds context window " + std::to_string(lo.L));
  }
  const Weights w = map_weights(policy.parameters().data(), lo);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(lo.d));
  const int pos = position_;

  Vector x = w.tok_emb.row(token).transpose() + w.pos_emb.row(pos).transpose();
  for (int l = 0; l < lo.n_layers; ++l) {
    const LayerWeights& lw = w.layers[static_cast<std::size_t>(l)];
    Matrix& kc = k_cache_[static_cast<std::size_t>(l)];
    Matrix& vc = v_cache_[static_cast<std::size_t>(l)];

    const Vector n1 = layer_norm_vec(x, lw.ln1_g, lw.ln1_b);
    const Vector q = lw.wq.transpose() * n1 + lw.bq;
    kc.row(pos) = (lw.wk.transpose() * n1 + lw.bk).transpose();
    vc.row(pos) = (lw.wv.transpose() * n1 + lw.bv).transpose();

    Vector scores = kc.topRows(pos + 1) * q * inv_sqrt_d;
    const double m = scores.maxCoeff();
    Vector alpha = (scores.array() - m).exp();
    alpha /= alpha.sum();
    const Vector attn = vc.topRows(pos + 1).transpose() * alpha;
    const Vector x1 = x + lw.wo.transpose() * attn + lw.bo;

    const Vector n2 = layer_norm_vec(x1, lw.ln2_g, lw.ln2_b);
    Vector f1 = lw.w1.transpose() * n2 + lw.b1;
    for (int i = 0; i < f1.size(); ++i) f1[i] = gelu(f1[i]);
    x = x1 + lw.w2.transpose() * f1 + lw.b2;
  }

  const Vector hf = layer_norm_vec(x, w.lnf_g, w.lnf_b);
  logits_ = w.w_out.transpose() * hf + w.b_out;
  logsumexp_ = logsumexp_of(logits_);
  ++position_;
}

DecodeState Policy::prefill(std::span<const int> prompt) const {
  return DecodeState(*this, prompt);
}

Rollout Policy::sample_from(const DecodeState& prompt_state, const SamplingConfig& cfg,
                            std::uint64_t rng_seed) const {
  if (cfg.max_len < 0) throw ConfigError("max_len must be >= 0");
  if (cfg.stop_token < 0 || cfg.stop_token >= config_.vocab_size) {
    throw ConfigError("stop_token out of range");
  }
  if (!(cfg.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (prompt_state.position() + cfg.max_len > config_.context_window) {
    throw SequenceTooLongError("prompt (" + std::to_string(prompt_state.position()) +
                               ") plus max_len (" + std::to_string(cfg.max_len) +
                               ") exceeds context window " +
                               std::to_string(config_.context_window));
  }

  DecodeState state = prompt_state;
  Rng rng(derive_seed(rng_seed, 0x5a3eULL));
  const bool greedy = cfg.temperature < kGreedyTemperature;

  Rollout out;
  out.tokens.reserve(static_cast<std::size_t>(cfg.max_len));
  out.logprobs.reserve(static_cast<std::size_t>(cfg.max_len));
  std::vector<double> probs(static_cast<std::size_t>(config_.vocab_size));

  for (int i = 0; i < cfg.max_len; ++i) {
    const Vector& logits = state.logits();
    int tok = 0;
    if (greedy) {
      Eigen::Index arg = 0;
      logits.maxCoeff(&arg);
      tok = static_cast<int>(arg);
    } else {
      const Vector scaled = logits / cfg.temperature;
      const double m = scaled.maxCoeff();
      double z = 0.0;
      for (int v = 0; v < scaled.size(); ++v) {
        probs[static_cast<std::size_t>(v)] = std::exp(scaled[v] - m);
        z += probs[static_cast<std::size_t>(v)];
      }
      for (double& p : probs) p /= z;
      tok = rng.categorical(probs);
    }
    out.tokens.push_back(tok);
    out.logprobs.push_back(state.logprob_of(tok));
    if (tok == cfg.stop_token || i + 1 == cfg.max_len) break;
    state.advance(tok);
  }
  return out;
}

Rollout Policy::sample(std::span<const int> prompt, const SamplingConfig& cfg,
                       std::uint64_t rng_seed) const {
  return sample_from(prefill(prompt), cfg, rng_seed);
}

std::vector<double> Policy::teacher_logprobs_from(const DecodeState& prompt_state,
                                                  std::span<const int> response) const {
  if (prompt_state.position() + static_cast<int>(response.size()) > config_.context_window) {
    throw SequenceTooLongError("prompt plus response exceeds context window");
  }
  DecodeState state = prompt_state;
  std::vector<double> out;
  out.reserve(response.size());
  for (std::size_t i = 0; i < response.size(); ++i) {
    out.push_back(state.logprob_of(response[i]));
    if (i + 1 < response.size()) state.advance(response[i]);
  }
  return out;
}

// ---- snapshots ----------------------------------------------------------------

PolicySnapshot Policy::save_snapshot() const {
  PolicySnapshot snap;
  snap.config = config_;
  snap.parameters = params_;
  return snap;
}

Policy Policy::load_snapshot(const PolicySnapshot& snapshot) {
  if (snapshot.format_version != PolicySnapshot::kFormatVersion) {
    throw SnapshotError("incompatible snapshot format version " +
                        std::to_string(snapshot.format_version));
  }
  Policy policy(snapshot.config);
  if (snapshot.parameters.size() != policy.n_params()) {
    throw SnapshotError("snapshot parameter count " +
                        std::to_string(snapshot.parameters.size()) +
                        " does not match architecture (" +
                        std::to_string(policy.n_params()) + ")");
  }
  policy.params_ = snapshot.parameters;
  return policy;
}

// ---- optimizer -----------------------------------------------------------------

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t n_params) : config_(config) {
  if (config.kind == OptimizerKind::kAdam) {
    m_.assign(n_params, 0.0);
    v_.assign(n_params, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad,
                     const FreezeRanges& frozen) {
  if (params.size() != grad.size()) throw InvalidInputError("param/grad size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw GradientError("non-finite gradient at parameter " + std::to_string(i) + ": " +
                          std::to_string(grad[i]));
    }
  }

  // Complement of the frozen ranges (frozen is sorted, non-overlapping).
  std::vector<std::pair<std::size_t, std::size_t>> active;
  std::size_t cursor = 0;
  for (const auto& [b, e] : frozen) {
    if (b > cursor) active.emplace_back(cursor, b);
    cursor = std::max(cursor, e);
  }
  if (cursor < params.size()) active.emplace_back(cursor, params.size());

  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    for (const auto& [b, e] : active) {
      for (std::size_t i = b; i < e; ++i) params[i] += lr * grad[i];
    }
    return;
  }

  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& [b, e] : active) {
    for (std::size_t i = b; i < e; ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] += lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void apply_gradient(Policy& policy, Optimizer& optimizer,
                    std::span<const std::vector<int>> prompts,
                    std::span<const std::vector<int>> responses,
                    std::span<const std::vector<double>> token_weights,
                    std::span<const std::string> freeze_groups) {
  if (prompts.size() != responses.size() || prompts.size() != token_weights.size()) {
    throw InvalidInputError("prompts/responses/weights must align");
  }
  std::vector<double> grad(policy.n_params(), 0.0);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (responses[i].empty()) continue;
    if (token_weights[i].size() != responses[i].size()) {
      throw InvalidInputError("token weights misaligned with response " + std::to_string(i));
    }
    const ForwardTrace tr = policy.forward_for_gradient(prompts[i], responses[i]);
    policy.backward_logprob_gradient(tr, token_weights[i], grad);
  }
  const FreezeRanges frozen = policy.freeze_ranges(freeze_groups);
  optimizer.step(policy.parameters_mut(), grad, frozen);
}

// ---- snapshot files -------------------------------------------------------------

namespace {

constexpr char kSnapshotMagic[4] = {'M', 'G', 'P', 'S'};

std::uint64_t fnv1a_bytes(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& buf, const T& value) {
  const char* p = reinterpret_cast<const char*>(&value);
  buf.append(p, sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size()) throw SnapshotError("snapshot file truncated");
  T value;
  std::memcpy(&value, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return value;
}

}  // namespace

void write_snapshot_file(const std::filesystem::path& path, const Policy& policy) {
  const PolicyConfig& c = policy.config();
  std::string body;
  put<std::uint32_t>(body, PolicySnapshot::kFormatVersion);
  put<std::int32_t>(body, c.vocab_size);
  put<std::int32_t>(body, c.context_window);
  put<std::int32_t>(body, c.d_model);
  put<std::int32_t>(body, c.n_layers);
  put<std::uint64_t>(body, c.seed);
  put<double>(body, c.init_std);
  put<std::uint64_t>(body, policy.n_params());
  const auto params = policy.parameters();
  body.append(reinterpret_cast<const char*>(params.data()), params.size() * sizeof(double));

  const std::uint64_t checksum =
      fnv1a_bytes(reinterpret_cast<const unsigned char*>(body.data()), body.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw SnapshotError("cannot open snapshot file for writing: " + path.string());
  out.write(kSnapshotMagic, sizeof kSnapshotMagic);
  out.write(reinterpret_cast<const char*>(&checksum), sizeof checksum);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw SnapshotError("failed writing snapshot file: " + path.string());
}

Policy read_snapshot_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot open snapshot file: " + path.string());
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (contents.size() < sizeof(kSnapshotMagic) + sizeof(std::uint64_t) ||
      std::memcmp(contents.data(), kSnapshotMagic, sizeof kSnapshotMagic) != 0) {
    throw SnapshotError("not a microgrpo snapshot: " + path.string());
  }
  std::uint64_t checksum = 0;
  std::memcpy(&checksum, contents.data() + sizeof kSnapshotMagic, sizeof checksum);
  const std::string body = contents.substr(sizeof kSnapshotMagic + sizeof checksum);
  if (fnv1a_bytes(reinterpret_cast<const unsigned char*>(body.data()), body.size()) !=
      checksum) {
    throw SnapshotError("snapshot checksum mismatch (corrupt file): " + path.string());
  }

  std::size_t off = 0;
  PolicySnapshot snap;
  snap.format_version = static_cast<int>(get<std::uint32_t>(body, off));
  if (snap.format_version != PolicySnapshot::kFormatVersion) {
    throw SnapshotError("unsupported snapshot format version " +
                        std::to_string(snap.format_version) + " in " + path.string());
  }
  snap.config.vocab_size = get<std::int32_t>(body, off);
  snap.config.context_window = get<std::int32_t>(body, off);
  snap.config.d_model = get<std::int32_t>(body, off);
  snap.config.n_layers = get<std::int32_t>(body, off);
  snap.config.seed = get<std::uint64_t>(body, off);
  snap.config.init_std = get<double>(body, off);
  const std::uint64_t n = get<std::uint64_t>(body, off);
  if (off + n * sizeof(double) != body.size()) {
    throw SnapshotError("snapshot parameter block has unexpected size: " + path.string());
  }
  snap.parameters.resize(n);
  std::memcpy(snap.parameters.data(), body.data() + off, n * sizeof(double));
  return Policy::load_snapshot(snap);
}

}  // namespace microgrpo::policy
