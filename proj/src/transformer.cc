// Copyright 2026 The zomem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zomem/transformer.h"

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>
#include <string>

#include "zomem/error.h"
#include "zomem/noise.h"

namespace zomem {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;

struct Dims {
  std::int64_t batch, seq, rows;  // rows = batch * seq
  std::int64_t hidden, heads, kv_heads, head_dim, kv_dim, ffn, vocab, layers;
  std::int64_t num_mlps;
};

Dims make_dims(const ModelConfig& cfg, std::int64_t batch, std::int64_t seq) {
  return Dims{batch,
              seq,
              batch * seq,
              cfg.hidden_dim,
              cfg.num_heads,
              cfg.kv_heads,
              cfg.head_dim(),
              cfg.kv_dim(),
              ffn_hidden_dim(cfg),
              cfg.vocab_size,
              cfg.num_layers,
              cfg.num_mlps};
}

std::string layer_name(std::int64_t layer, const char* leaf) {
  return "layers." + std::to_string(layer) + "." + leaf;
}

// Segment offsets resolved once per call.
struct LayerOffsets {
  std::size_t attn_norm, wq, wk, wv, wo, ffn_norm, w_gate, w_up, w_down;
};

struct Layout {
  std::size_t embed, final_norm, lm_head;
  std::vector<LayerOffsets> layers;
};

Layout resolve_layout(const ModelConfig& cfg, const ParameterVector& w) {
  Layout layout;
  layout.embed = w.segment_info("embed").offset;
  layout.final_norm = w.segment_info("final_norm").offset;
  layout.lm_head = w.segment_info("lm_head").offset;
  for (std::int64_t l = 0; l < cfg.num_layers; ++l) {
    LayerOffsets o{};
    o.attn_norm = w.segment_info(layer_name(l, "attn_norm")).offset;
    o.wq = w.segment_info(layer_name(l, "wq")).offset;
    o.wk = w.segment_info(layer_name(l, "wk")).offset;
    o.wv = w.segment_info(layer_name(l, "wv")).offset;
    o.wo = w.segment_info(layer_name(l, "wo")).offset;
    o.ffn_norm = w.segment_info(layer_name(l, "ffn_norm")).offset;
    if (cfg.num_mlps == 3) {
      o.w_gate = w.segment_info(layer_name(l, "w_gate")).offset;
    }
    o.w_up = w.segment_info(layer_name(l, "w_up")).offset;
    o.w_down = w.segment_info(layer_name(l, "w_down")).offset;
    layout.layers.push_back(o);
  }
  return layout;
}

ConstMatMap cmat(const ParameterVector& w, std::size_t offset, std::int64_t r,
                 std::int64_t c) {
  return ConstMatMap(w.values().data() + offset, r, c);
}

MatMap mmat(ParameterVector& w, std::size_t offset, std::int64_t r,
            std::int64_t c) {
  return MatMap(w.values().data() + offset, r, c);
}

ConstVecMap cvec(const ParameterVector& w, std::size_t offset,
                 std::int64_t n) {
  return ConstVecMap(w.values().data() + offset, n);
}

VecMap mvec(ParameterVector& w, std::size_t offset, std::int64_t n) {
  return VecMap(w.values().data() + offset, n);
}

// ---------------------------------------------------------------------------
// Elementwise pieces.

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double gelu(double u) {
  return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u)));
}

double gelu_grad(double u) {
  const double t = std::tanh(kGeluC * (u + kGeluA * u * u * u));
  return 0.5 * (1.0 + t) +
         0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double silu(double u) { return u * sigmoid(u); }

double silu_grad(double u) {
  const double s = sigmoid(u);
  return s * (1.0 + u * (1.0 - s));
}

RowMat rms_norm(const RowMat& x, const ConstVecMap& gain) {
  RowMat y(x.rows(), x.cols());
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double rms = std::sqrt(x.row(r).squaredNorm() * inv_d + kRmsNormEps);
    y.row(r) = (x.row(r) / rms).cwiseProduct(gain);
  }
  return y;
}

// Accumulates into dx and dgain given dy = dL/d(rms_norm(x)).
void rms_norm_backward(const RowMat& x, const ConstVecMap& gain,
                       const RowMat& dy, RowMat& dx, VecMap dgain) {
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double rms = std::sqrt(x.row(r).squaredNorm() * inv_d + kRmsNormEps);
    const Eigen::RowVectorXd n = x.row(r) / rms;
    dgain += dy.row(r).cwiseProduct(n);
    const Eigen::RowVectorXd dn = dy.row(r).cwiseProduct(gain);
    dx.row(r) += (dn - n * (dn.dot(n) * inv_d)) / rms;
  }
}

struct RopeTable {
  RowMat cos, sin;  // seq x head_dim / 2
};

RopeTable make_rope(std::int64_t seq, std::int64_t head_dim) {
  const std::int64_t half = head_dim / 2;
  RopeTable t{RowMat(seq, half), RowMat(seq, half)};
  for (std::int64_t p = 0; p < seq; ++p) {
    for (std::int64_t i = 0; i < half; ++i) {
      const double freq = std::pow(
          kRopeBase, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
      const double angle = static_cast<double>(p) * freq;
      t.cos(p, i) = std::cos(angle);
      t.sin(p, i) = std::sin(angle);
    }
  }
  return t;
}

// Rotates pairs (2i, 2i+1) of every head by +angle (sign = 1) or -angle
// (sign = -1, the transpose used by the backward pass).
void apply_rope(RowMat& m, std::int64_t heads, std::int64_t head_dim,
                std::int64_t seq, const RopeTable& rope, double sign) {
  const std::int64_t half = head_dim / 2;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const std::int64_t pos = r % seq;
    for (std::int64_t h = 0; h < heads; ++h) {
      double* base = m.row(r).data() + h * head_dim;
      for (std::int64_t i = 0; i < half; ++i) {
        const double c = rope.cos(pos, i);
        const double s = sign * rope.sin(pos, i);
        const double a = base[2 * i];
        const double b = base[2 * i + 1];
        base[2 * i] = a * c - b * s;
        base[2 * i + 1] = a * s + b * c;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Forward pass with per-layer caches.

struct LayerCache {
  RowMat x1, x_out;     // norm inputs: after attention, after FFN
  RowMat q, k, v, o;    // q, k after RoPE; o is pre-W_O
  RowMat probs;         // (batch * heads * seq) x seq, causal softmax
  RowMat ffn_pre;       // up projection (GELU) or gate (SwiGLU)
  RowMat ffn_up;        // SwiGLU only
  RowMat ffn_act;

  std::int64_t norm_elements() const { return x1.size() + x_out.size(); }
  std::int64_t proj_elements() const {
    return q.size() + k.size() + v.size() + o.size();
  }
  std::int64_t score_elements() const { return probs.size(); }
  std::int64_t ffn_elements() const {
    return ffn_pre.size() + ffn_up.size() + ffn_act.size();
  }
};

struct ForwardState {
  RowMat x0;        // embedding output
  RowMat logits;
  std::vector<LayerCache> layers;  // all layers in BP mode
  ActivationLedger ledger;
};

void check_input(const ModelConfig& cfg, const ParameterVector& w,
                 const TokenBatch& input) {
  validate_toy_config(cfg);
  if (input.batch < 1 || input.seq_len < 1 ||
      input.seq_len > cfg.context_length) {
    throw Error(ErrorCode::kShapeMismatch,
                "batch must be >= 1 and seq_len in [1, context_length], got " +
                    std::to_string(input.batch) + " x " +
                    std::to_string(input.seq_len));
  }
  if (static_cast<std::int64_t>(input.tokens.size()) !=
      input.batch * input.seq_len) {
    throw Error(ErrorCode::kShapeMismatch,
                "token buffer holds " + std::to_string(input.tokens.size()) +
                    " entries, expected " +
                    std::to_string(input.batch * input.seq_len));
  }
  for (const std::int32_t t : input.tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw Error(ErrorCode::kTokenOutOfRange,
                  "token " + std::to_string(t) + " outside [0, " +
                      std::to_string(cfg.vocab_size) + ")");
    }
  }
  const std::size_t expected =
      static_cast<std::size_t>(trainable_elements(cfg));
  if (w.size() != expected) {
    throw Error(ErrorCode::kShapeMismatch,
                "weights hold " + std::to_string(w.size()) +
                    " elements, config needs " + std::to_string(expected));
  }
}

LayerCache layer_forward(const Dims& d, const ParameterVector& w,
                         const LayerOffsets& o, const RowMat& x,
                         const RopeTable& rope) {
  LayerCache c;
  const RowMat a = rms_norm(x, cvec(w, o.attn_norm, d.hidden));
  c.q = a * cmat(w, o.wq, d.hidden, d.hidden);
  c.k = a * cmat(w, o.wk, d.hidden, d.kv_dim);
  c.v = a * cmat(w, o.wv, d.hidden, d.kv_dim);
  apply_rope(c.q, d.heads, d.head_dim, d.seq, rope, 1.0);
  apply_rope(c.k, d.kv_heads, d.head_dim, d.seq, rope, 1.0);

  const double scale = 1.0 / std::sqrt(static_cast<double>(d.head_dim));
  const std::int64_t group = d.heads / d.kv_heads;
  c.o = RowMat::Zero(d.rows, d.hidden);
  c.probs = RowMat::Zero(d.batch * d.heads * d.seq, d.seq);
  for (std::int64_t b = 0; b < d.batch; ++b) {
    for (std::int64_t h = 0; h < d.heads; ++h) {
      const std::int64_t kh = h / group;
      const auto q = c.q.block(b * d.seq, h * d.head_dim, d.seq, d.head_dim);
      const auto k = c.k.block(b * d.seq, kh * d.head_dim, d.seq, d.head_dim);
      const auto v = c.v.block(b * d.seq, kh * d.head_dim, d.seq, d.head_dim);
      RowMat s = (q * k.transpose()) * scale;
      auto p = c.probs.block((b * d.heads + h) * d.seq, 0, d.seq, d.seq);
      for (std::int64_t t = 0; t < d.seq; ++t) {
        const double m = s.row(t).head(t + 1).maxCoeff();
        double sum = 0.0;
        for (std::int64_t j = 0; j <= t; ++j) {
          p(t, j) = std::exp(s(t, j) - m);
          sum += p(t, j);
        }
        p.row(t).head(t + 1) /= sum;
      }
      c.o.block(b * d.seq, h * d.head_dim, d.seq, d.head_dim) = p * v;
    }
  }
  c.x1 = x + c.o * cmat(w, o.wo, d.hidden, d.hidden);

  const RowMat bn = rms_norm(c.x1, cvec(w, o.ffn_norm, d.hidden));
  if (d.num_mlps == 3) {
    c.ffn_pre = bn * cmat(w, o.w_gate, d.hidden, d.ffn);
    c.ffn_up = bn * cmat(w, o.w_up, d.hidden, d.ffn);
    c.ffn_act = c.ffn_pre.unaryExpr(&silu).cwiseProduct(c.ffn_up);
  } else {
    c.ffn_pre = bn * cmat(w, o.w_up, d.hidden, d.ffn);
    c.ffn_act = c.ffn_pre.unaryExpr(&gelu);
  }
  c.x_out = c.x1 + c.ffn_act * cmat(w, o.w_down, d.ffn, d.hidden);
  return c;
}

void count_layer(ActivationLedger& ledger, const LayerCache& c) {
  ledger.norm_elements += c.norm_elements();
  ledger.attention_proj_elements += c.proj_elements();
  ledger.attention_scores_elements += c.score_elements();
  ledger.ffn_elements += c.ffn_elements();
  ++ledger.retained_layers;
}

ForwardState run_forward(const ModelConfig& cfg, const ParameterVector& w,
                         const TokenBatch& input, LedgerMode mode) {
  check_input(cfg, w, input);
  const Dims d = make_dims(cfg, input.batch, input.seq_len);
  const Layout layout = resolve_layout(cfg, w);
  const RopeTable rope = make_rope(d.seq, d.head_dim);

  ForwardState st;
  st.ledger.mode = mode;
  const ConstMatMap embed = cmat(w, layout.embed, d.vocab, d.hidden);
  st.x0.resize(d.rows, d.hidden);
  for (std::int64_t r = 0; r < d.rows; ++r) {
    st.x0.row(r) = embed.row(input.tokens[static_cast<std::size_t>(r)]);
  }
  st.ledger.embeddings_elements = st.x0.size();

  const auto capacity = static_cast<std::size_t>(std::ceil(cfg.stored_layers));
  std::deque<LayerCache> buffered;
  RowMat x = st.x0;
  for (std::int64_t l = 0; l < d.layers; ++l) {
    LayerCache c = layer_forward(d, w, layout.layers[l], x, rope);
    x = c.x_out;
    if (mode == LedgerMode::kBp) {
      st.layers.push_back(std::move(c));
    } else if (capacity > 0) {
      buffered.push_back(std::move(c));
      if (buffered.size() > capacity) {
        buffered.pop_front();
      }
    }
  }
  if (mode == LedgerMode::kBp) {
    for (const LayerCache& c : st.layers) {
      count_layer(st.ledger, c);
    }
  } else {
    for (const LayerCache& c : buffered) {
      count_layer(st.ledger, c);
    }
  }

  const RowMat nf = rms_norm(x, cvec(w, layout.final_norm, d.hidden));
  st.logits = nf * cmat(w, layout.lm_head, d.vocab, d.hidden).transpose();
  st.ledger.logits_elements = st.logits.size();
  return st;
}

std::int64_t count_targets(std::span<const std::int32_t> targets,
                           std::int64_t vocab) {
  std::int64_t count = 0;
  for (const std::int32_t t : targets) {
    if (t == kIgnoreTarget) {
      continue;
    }
    if (t < 0 || t >= vocab) {
      throw Error(ErrorCode::kTokenOutOfRange,
                  "target " + std::to_string(t) + " outside [0, " +
                      std::to_string(vocab) + ")");
    }
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorCode::kShapeMismatch, "no position has a target");
  }
  return count;
}

}  // namespace

void validate_toy_config(const ModelConfig& cfg) {
  validate(cfg);
  if (cfg.head_dim() % 2 != 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "hidden_dim / num_heads must be even for RoPE, got " +
                    std::to_string(cfg.head_dim()));
  }
  if (cfg.num_mlps != 2 && cfg.num_mlps != 3) {
    throw Error(ErrorCode::kInvalidConfig,
                "num_mlps must be 2 (GELU MLP) or 3 (SwiGLU), got " +
                    std::to_string(cfg.num_mlps));
  }
  ffn_hidden_dim(cfg);
}

std::int64_t norm_gain_elements(const ModelConfig& cfg) {
  return (2 * cfg.num_layers + 1) * cfg.hidden_dim;
}

ParameterVector make_transformer_parameters(const ModelConfig& cfg) {
  validate_toy_config(cfg);
  const auto D = static_cast<std::size_t>(cfg.hidden_dim);
  const auto kv = static_cast<std::size_t>(cfg.kv_dim());
  const auto F = static_cast<std::size_t>(ffn_hidden_dim(cfg));
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  ParameterVector w;
  w.add_segment("embed", V * D);
  for (std::int64_t l = 0; l < cfg.num_layers; ++l) {
    w.add_segment(layer_name(l, "attn_norm"), D);
    w.add_segment(layer_name(l, "wq"), D * D);
    w.add_segment(layer_name(l, "wk"), D * kv);
    w.add_segment(layer_name(l, "wv"), D * kv);
    w.add_segment(layer_name(l, "wo"), D * D);
    w.add_segment(layer_name(l, "ffn_norm"), D);
    if (cfg.num_mlps == 3) {
      w.add_segment(layer_name(l, "w_gate"), D * F);
    }
    w.add_segment(layer_name(l, "w_up"), D * F);
    w.add_segment(layer_name(l, "w_down"), F * D);
  }
  w.add_segment("final_norm", D);
  w.add_segment("lm_head", V * D);
  return w;
}

std::int64_t trainable_elements(const ModelConfig& cfg) {
  const std::int64_t D = cfg.hidden_dim;
  const std::int64_t per_layer = 2 * D * D + 2 * D * cfg.kv_dim() +
                                 cfg.num_mlps * D * ffn_hidden_dim(cfg);
  return cfg.num_layers * per_layer + 2 * cfg.vocab_size * D +
         norm_gain_elements(cfg);
}

void init_transformer_weights(ParameterVector& weights, const ModelConfig& cfg,
                              std::uint64_t seed) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  std::uint64_t index = 0;
  for (const Segment& s : weights.segments()) {
    auto values = weights.values().subspan(s.offset, s.length);
    const bool is_gain = s.name.ends_with("norm");
    if (is_gain) {
      std::fill(values.begin(), values.end(), 1.0);
    } else {
      NoiseStream stream(PerturbationSeed{seed, index});
      for (double& v : values) {
        v = scale * stream.next();
      }
    }
    ++index;
  }
}

ForwardResult forward(const ModelConfig& cfg, const ParameterVector& weights,
                      const TokenBatch& input, LedgerMode mode) {
  ForwardState st = run_forward(cfg, weights, input, mode);
  ForwardResult out;
  out.logits.assign(st.logits.data(), st.logits.data() + st.logits.size());
  out.ledger = st.ledger;
  return out;
}

std::vector<double> attention_probabilities(const ModelConfig& cfg,
                                            const ParameterVector& weights,
                                            const TokenBatch& input,
                                            std::int64_t layer) {
  if (layer < 0 || layer >= cfg.num_layers) {
    throw Error(ErrorCode::kInvalidArgument,
                "layer " + std::to_string(layer) + " outside [0, " +
                    std::to_string(cfg.num_layers) + ")");
  }
  const ForwardState st = run_forward(cfg, weights, input, LedgerMode::kBp);
  const RowMat& p = st.layers[static_cast<std::size_t>(layer)].probs;
  return std::vector<double>(p.data(), p.data() + p.size());
}

double cross_entropy(std::span<const double> logits, std::int64_t vocab_size,
                     std::span<const std::int32_t> targets) {
  if (vocab_size < 1 ||
      logits.size() != targets.size() * static_cast<std::size_t>(vocab_size)) {
    throw Error(ErrorCode::kShapeMismatch,
                "logits hold " + std::to_string(logits.size()) +
                    " values for " + std::to_string(targets.size()) +
                    " targets of vocab " + std::to_string(vocab_size));
  }
  const std::int64_t count = count_targets(targets, vocab_size);
  double total = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] == kIgnoreTarget) {
      continue;
    }
    const auto row = logits.subspan(r * static_cast<std::size_t>(vocab_size),
                                    static_cast<std::size_t>(vocab_size));
    double m = row[0];
    for (const double v : row) {
      m = std::max(m, v);
    }
    double sum = 0.0;
    for (const double v : row) {
      sum += std::exp(v - m);
    }
    total += m + std::log(sum) - row[static_cast<std::size_t>(targets[r])];
  }
  return total / static_cast<double>(count);
}

BackwardResult backward(const ModelConfig& cfg, const ParameterVector& weights,
                        const TokenBatch& input,
                        std::span<const std::int32_t> targets) {
  ForwardState st = run_forward(cfg, weights, input, LedgerMode::kBp);
  const Dims d = make_dims(cfg, input.batch, input.seq_len);
  if (static_cast<std::int64_t>(targets.size()) != d.rows) {
    throw Error(ErrorCode::kShapeMismatch,
                "got " + std::to_string(targets.size()) + " targets for " +
                    std::to_string(d.rows) + " positions");
  }
  const Layout layout = resolve_layout(cfg, weights);
  const RopeTable rope = make_rope(d.seq, d.head_dim);

  BackwardResult out;
  out.ledger = st.ledger;
  out.loss = cross_entropy(
      std::span<const double>(st.logits.data(),
                              static_cast<std::size_t>(st.logits.size())),
      d.vocab, targets);
  out.gradient = weights.zeros_like();
  ParameterVector& g = out.gradient;

  // dL/dlogits = (softmax - onehot) / count on scored rows.
  const double inv_count =
      1.0 / static_cast<double>(count_targets(targets, d.vocab));
  RowMat dlogits = RowMat::Zero(d.rows, d.vocab);
  for (std::int64_t r = 0; r < d.rows; ++r) {
    const std::int32_t target = targets[static_cast<std::size_t>(r)];
    if (target == kIgnoreTarget) {
      continue;
    }
    const double m = st.logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (st.logits.row(r).array() - m).exp();
    e /= e.sum();
    e(target) -= 1.0;
    dlogits.row(r) = e * inv_count;
  }

  const RowMat& x_last = d.layers > 0 ? st.layers.back().x_out : st.x0;
  const ConstMatMap head = cmat(weights, layout.lm_head, d.vocab, d.hidden);
  const RowMat nf = rms_norm(x_last, cvec(weights, layout.final_norm, d.hidden));
  mmat(g, layout.lm_head, d.vocab, d.hidden) += dlogits.transpose() * nf;
  const RowMat dnf = dlogits * head;
  RowMat dx = RowMat::Zero(d.rows, d.hidden);
  rms_norm_backward(x_last, cvec(weights, layout.final_norm, d.hidden), dnf,
                    dx, mvec(g, layout.final_norm, d.hidden));

  const double scale = 1.0 / std::sqrt(static_cast<double>(d.head_dim));
  const std::int64_t group = d.heads / d.kv_heads;
  for (std::int64_t l = d.layers - 1; l >= 0; --l) {
    const LayerCache& c = st.layers[static_cast<std::size_t>(l)];
    const LayerOffsets& o = layout.layers[static_cast<std::size_t>(l)];
    const RowMat& x_in = l == 0 ? st.x0 : st.layers[l - 1].x_out;

    // FFN, dx is dL/dx_out.
    const RowMat bn = rms_norm(c.x1, cvec(weights, o.ffn_norm, d.hidden));
    mmat(g, o.w_down, d.ffn, d.hidden) += c.ffn_act.transpose() * dx;
    const RowMat dact =
        dx * cmat(weights, o.w_down, d.ffn, d.hidden).transpose();
    RowMat dbn;
    if (d.num_mlps == 3) {
      const RowMat dup = dact.cwiseProduct(c.ffn_pre.unaryExpr(&silu));
      const RowMat dgate = dact.cwiseProduct(c.ffn_up).cwiseProduct(
          c.ffn_pre.unaryExpr(&silu_grad));
      mmat(g, o.w_gate, d.hidden, d.ffn) += bn.transpose() * dgate;
      mmat(g, o.w_up, d.hidden, d.ffn) += bn.transpose() * dup;
      dbn = dgate * cmat(weights, o.w_gate, d.hidden, d.ffn).transpose() +
            dup * cmat(weights, o.w_up, d.hidden, d.ffn).transpose();
    } else {
      const RowMat du = dact.cwiseProduct(c.ffn_pre.unaryExpr(&gelu_grad));
      mmat(g, o.w_up, d.hidden, d.ffn) += bn.transpose() * du;
      dbn = du * cmat(weights, o.w_up, d.hidden, d.ffn).transpose();
    }
    RowMat dx1 = dx;
    rms_norm_backward(c.x1, cvec(weights, o.ffn_norm, d.hidden), dbn, dx1,
                      mvec(g, o.ffn_norm, d.hidden));

    // Attention, dx1 is dL/dx1.
    mmat(g, o.wo, d.hidden, d.hidden) += c.o.transpose() * dx1;
    const RowMat dout =
        dx1 * cmat(weights, o.wo, d.hidden, d.hidden).transpose();
    RowMat dq = RowMat::Zero(d.rows, d.hidden);
    RowMat dk = RowMat::Zero(d.rows, d.kv_dim);
    RowMat dv = RowMat::Zero(d.rows, d.kv_dim);
    for (std::int64_t b = 0; b < d.batch; ++b) {
      for (std::int64_t h = 0; h < d.heads; ++h) {
        const std::int64_t kh = h / group;
        const auto q = c.q.block(b * d.seq, h * d.head_dim, d.seq, d.head_dim);
        const auto k =
            c.k.block(b * d.seq, kh * d.head_dim, d.seq, d.head_dim);
        const auto v =
            c.v.block(b * d.seq, kh * d.head_dim, d.seq, d.head_dim);
        const auto p = c.probs.block((b * d.heads + h) * d.seq, 0, d.seq, d.seq);
        const auto dob =
            dout.block(b * d.seq, h * d.head_dim, d.seq, d.head_dim);
        const RowMat dp = dob * v.transpose();
        dv.block(b * d.seq, kh * d.head_dim, d.seq, d.head_dim) +=
            p.transpose() * dob;
        const Eigen::VectorXd row_dot = dp.cwiseProduct(p).rowwise().sum();
        const RowMat ds =
            p.cwiseProduct(dp - row_dot.replicate(1, d.seq)) * scale;
        dq.block(b * d.seq, h * d.head_dim, d.seq, d.head_dim) = ds * k;
        dk.block(b * d.seq, kh * d.head_dim, d.seq, d.head_dim) +=
            ds.transpose() * q;
      }
    }
    apply_rope(dq, d.heads, d.head_dim, d.seq, rope, -1.0);
    apply_rope(dk, d.kv_heads, d.head_dim, d.seq, rope, -1.0);

    const RowMat a = rms_norm(x_in, cvec(weights, o.attn_norm, d.hidden));
    mmat(g, o.wq, d.hidden, d.hidden) += a.transpose() * dq;
    mmat(g, o.wk, d.hidden, d.kv_dim) += a.transpose() * dk;
    mmat(g, o.wv, d.hidden, d.kv_dim) += a.transpose() * dv;
    const RowMat da =
        dq * cmat(weights, o.wq, d.hidden, d.hidden).transpose() +
        dk * cmat(weights, o.wk, d.hidden, d.kv_dim).transpose() +
        dv * cmat(weights, o.wv, d.hidden, d.kv_dim).transpose();
    dx = dx1;
    rms_norm_backward(x_in, cvec(weights, o.attn_norm, d.hidden), da, dx,
                      mvec(g, o.attn_norm, d.hidden));
  }

  MatMap dembed = mmat(g, layout.embed, d.vocab, d.hidden);
  for (std::int64_t r = 0; r < d.rows; ++r) {
    dembed.row(input.tokens[static_cast<std::size_t>(r)]) += dx.row(r);
  }
  return out;
}

LedgerReport ledger_check(const ModelConfig& cfg,
                          const ActivationLedger& ledger) {
  LedgerReport report;
  const std::int64_t B = cfg.batch_size;
  const std::int64_t L = cfg.num_layers;
  const std::int64_t N = cfg.context_length;
  const std::int64_t D = cfg.hidden_dim;
  if (ledger.mode != LedgerMode::kBp) {
    throw Error(ErrorCode::kInvalidArgument,
                "ledger_check needs a BP-mode ledger");
  }
  if (ledger.retained_layers != L ||
      ledger.embeddings_elements != B * N * D) {
    throw Error(ErrorCode::kShapeMismatch,
                "ledger does not come from a forward pass of this config");
  }
  report.expected_scores_elements = B * L * cfg.num_heads * N * N;
  report.scores_exact =
      ledger.attention_scores_elements == report.expected_scores_elements;
  if (!report.scores_exact) {
    report.violations.push_back(
        "attention_scores_elements " +
        std::to_string(ledger.attention_scores_elements) + " != B L H N^2 = " +
        std::to_string(report.expected_scores_elements));
  }
  const std::int64_t blnd = B * L * N * D;
  const std::int64_t rest = ledger.attention_proj_elements +
                            ledger.ffn_elements + ledger.norm_elements;
  report.per_layer_constant =
      static_cast<double>(rest) / static_cast<double>(blnd);
  // Every non-score tensor holds one row per token.
  if (rest % (B * L * N) != 0) {
    report.violations.push_back(
        "non-score per-layer elements " + std::to_string(rest) +
        " are not a multiple of B L N = " + std::to_string(B * L * N));
  }
  return report;
}

LedgerReport ledger_scaling_check(const ModelConfig& base_cfg,
                                  const ActivationLedger& base,
                                  const ModelConfig& doubled_cfg,
                                  const ActivationLedger& doubled) {
  LedgerReport report = ledger_check(doubled_cfg, doubled);
  const LedgerReport base_report = ledger_check(base_cfg, base);
  report.violations.insert(report.violations.begin(),
                           base_report.violations.begin(),
                           base_report.violations.end());

  ModelConfig probe = base_cfg;
  std::int64_t score_factor = 0;
  if (doubled_cfg.context_length == 2 * base_cfg.context_length) {
    probe.context_length = doubled_cfg.context_length;
    score_factor = 4;
  } else if (doubled_cfg.hidden_dim == 2 * base_cfg.hidden_dim) {
    probe.hidden_dim = doubled_cfg.hidden_dim;
    score_factor = 1;
  }
  if (score_factor == 0 || !(probe == doubled_cfg)) {
    throw Error(ErrorCode::kInvalidArgument,
                "configs must differ by doubling exactly one of "
                "context_length or hidden_dim");
  }
  auto expect = [&](const char* name, std::int64_t before, std::int64_t after,
                    std::int64_t factor) {
    if (after != factor * before) {
      report.violations.push_back(std::string(name) + " scaled from " +
                                  std::to_string(before) + " to " +
                                  std::to_string(after) + ", expected x" +
                                  std::to_string(factor));
    }
  };
  expect("attention_scores_elements", base.attention_scores_elements,
         doubled.attention_scores_elements, score_factor);
  expect("attention_proj_elements", base.attention_proj_elements,
         doubled.attention_proj_elements, 2);
  expect("ffn_elements", base.ffn_elements, doubled.ffn_elements, 2);
  expect("norm_elements", base.norm_elements, doubled.norm_elements, 2);
  return report;
}

}  // namespace zomem
