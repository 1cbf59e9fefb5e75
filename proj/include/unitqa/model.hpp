// Copyright 2026 The UnitQA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Encoder-decoder transformer over the joint vocabulary, written directly
// against Eigen with hand-derived backward passes so gradients can be
// checked against finite differences.
//
// Encoder self-attention is local (radius r) plus transient global tokens:
// per-block means of the layer's normalized input, recomputed each layer,
// attendable by every position. Decoder self-attention is causal and
// cross-attention is dense over non-pad encoder positions. Pre-layer
// normalization, sinusoidal absolute positions, tied input/output
// embeddings scaled by sqrt(d_model).

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unitqa/errors.hpp"
#include "unitqa/rng.hpp"
#include "unitqa/unit_codec.hpp"

namespace unitqa {

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct ModelConfig {
  int d_model = 128;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int ffn_dim = 256;
  int local_window_radius = 16;
  int global_block_size = 16;
  bool use_transient_global = true;
  int max_len = 512;
  double dropout = 0.0;

  void validate() const {
    if (d_model < 1 || n_heads < 1 || n_enc_layers < 1 || n_dec_layers < 1 || ffn_dim < 1) {
      throw InvalidInputError("model dimensions must be positive");
    }
    if (d_model % n_heads != 0) throw InvalidInputError("d_model must be divisible by n_heads");
    if (local_window_radius < 1) throw InvalidInputError("local_window_radius must be positive");
    if (global_block_size < 1) throw InvalidInputError("global_block_size must be positive");
    if (max_len < 8) throw InvalidInputError("max_len must be >= 8");
    if (dropout < 0.0 || dropout >= 1.0) throw InvalidInputError("dropout must be in [0, 1)");
  }

  nlohmann::ordered_json to_json() const {
    return {{"d_model", d_model},
            {"n_heads", n_heads},
            {"n_enc_layers", n_enc_layers},
            {"n_dec_layers", n_dec_layers},
            {"ffn_dim", ffn_dim},
            {"local_window_radius", local_window_radius},
            {"global_block_size", global_block_size},
            {"use_transient_global", use_transient_global},
            {"max_len", max_len},
            {"dropout", dropout}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_enc_layers = j.at("n_enc_layers").get<int>();
    c.n_dec_layers = j.at("n_dec_layers").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.local_window_radius = j.at("local_window_radius").get<int>();
    c.global_block_size = j.at("global_block_size").get<int>();
    c.use_transient_global = j.at("use_transient_global").get<bool>();
    c.max_len = j.at("max_len").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.validate();
    return c;
  }

  bool operator==(const ModelConfig&) const = default;
};

// A named parameter matrix with its gradient accumulator.
template <typename S>
struct Tensor {
  std::string name;
  Mat<S> w;
  Mat<S> g;

  void init_normal(const std::string& n, Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev) {
    name = n;
    w.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = static_cast<S>(rng.normal(0.0, stddev));
    }
    g = Mat<S>::Zero(rows, cols);
  }

  void init_constant(const std::string& n, Eigen::Index rows, Eigen::Index cols, double value) {
    name = n;
    w = Mat<S>::Constant(rows, cols, static_cast<S>(value));
    g = Mat<S>::Zero(rows, cols);
  }
};

namespace nn {

constexpr double kInitStd = 0.02;

template <typename S>
struct Linear {
  Tensor<S> w;  // in x out
  Tensor<S> b;  // 1 x out

  void init(const std::string& name, int in, int out, Rng& rng) {
    w.init_normal(name + ".w", in, out, rng, kInitStd);
    b.init_constant(name + ".b", 1, out, 0.0);
  }

  Mat<S> forward(const Mat<S>& x) const { return ((x * w.w).rowwise() + b.w.row(0)).eval(); }

  Mat<S> backward(const Mat<S>& x, const Mat<S>& dy) {
    w.g.noalias() += x.transpose() * dy;
    b.g.row(0) += dy.colwise().sum();
    return dy * w.w.transpose();
  }

  void collect(std::vector<Tensor<S>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <typename S>
struct LayerNorm {
  Tensor<S> gamma;  // 1 x d
  Tensor<S> beta;   // 1 x d

  struct Cache {
    Mat<S> xhat;
    Vec<S> rstd;
  };

  void init(const std::string& name, int d) {
    gamma.init_constant(name + ".gamma", 1, d, 1.0);
    beta.init_constant(name + ".beta", 1, d, 0.0);
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache) const {
    const S eps = static_cast<S>(1e-5);
    const Eigen::Index n = x.rows(), d = x.cols();
    Mat<S> xhat(n, d);
    Vec<S> rstd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const S mu = x.row(i).mean();
      const auto centered = (x.row(i).array() - mu).eval();
      const S var = centered.square().mean();
      const S rs = S(1) / std::sqrt(var + eps);
      xhat.row(i) = centered * rs;
      rstd(i) = rs;
    }
    Mat<S> y = (xhat.array().rowwise() * gamma.w.row(0).array()).rowwise() + beta.w.row(0).array();
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->rstd = std::move(rstd);
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) {
    const Eigen::Index n = dy.rows(), d = dy.cols();
    gamma.g.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    beta.g.row(0) += dy.colwise().sum();
    Mat<S> dx(n, d);
    const S inv_d = S(1) / static_cast<S>(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto dxhat = (dy.row(i).array() * gamma.w.row(0).array()).eval();
      const S m1 = dxhat.sum() * inv_d;
      const S m2 = (dxhat * cache.xhat.row(i).array()).sum() * inv_d;
      dx.row(i) = (cache.rstd(i) * (dxhat - m1 - cache.xhat.row(i).array() * m2)).matrix();
    }
    return dx;
  }

  void collect(std::vector<Tensor<S>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

// Scaled dot-product attention over an explicit allowed-mask. The key/value
// input may carry extra rows (transient global tokens) beyond the query
// positions; the mask decides who sees what.
template <typename S>
struct MultiHeadAttention {
  int n_heads = 1;
  int d_head = 1;
  Linear<S> wq, wk, wv, wo;

  struct Cache {
    Mat<S> q_in, kv_in;
    Mat<S> q, k, v;
    std::vector<Mat<S>> probs;  // per head, n x m
    Mat<S> concat;
  };

  void init(const std::string& name, int d_model, int heads, Rng& rng) {
    n_heads = heads;
    d_head = d_model / heads;
    wq.init(name + ".wq", d_model, d_model, rng);
    wk.init(name + ".wk", d_model, d_model, rng);
    wv.init(name + ".wv", d_model, d_model, rng);
    wo.init(name + ".wo", d_model, d_model, rng);
  }

  Mat<S> forward(const Mat<S>& q_in, const Mat<S>& kv_in, const BoolMat& allowed, Cache* cache) const {
    const Eigen::Index n = q_in.rows(), m = kv_in.rows(), d = q_in.cols();
    const Mat<S> q = wq.forward(q_in);
    const Mat<S> k = wk.forward(kv_in);
    const Mat<S> v = wv.forward(kv_in);
    const S scale = S(1) / std::sqrt(static_cast<S>(d_head));
    const S neg = static_cast<S>(-1e30);

    Mat<S> concat(n, d);
    std::vector<Mat<S>> probs(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
      const auto qh = q.middleCols(h * d_head, d_head);
      const auto kh = k.middleCols(h * d_head, d_head);
      const auto vh = v.middleCols(h * d_head, d_head);
      Mat<S> scores = (qh * kh.transpose()) * scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
          if (!allowed(i, j)) scores(i, j) = neg;
        }
      }
      // Row softmax with max subtraction; fully masked entries underflow to 0.
      for (Eigen::Index i = 0; i < n; ++i) {
        const S mx = scores.row(i).maxCoeff();
        auto row = (scores.row(i).array() - mx).exp().eval();
        scores.row(i) = row / row.sum();
      }
      concat.middleCols(h * d_head, d_head).noalias() = scores * vh;
      probs[static_cast<std::size_t>(h)] = std::move(scores);
    }
    Mat<S> out = wo.forward(concat);
    if (cache) {
      cache->q_in = q_in;
      cache->kv_in = kv_in;
      cache->q = q;
      cache->k = k;
      cache->v = v;
      cache->probs = std::move(probs);
      cache->concat = std::move(concat);
    }
    return out;
  }

  // Accumulates input gradients into dq_in / dkv_in (already sized).
  void backward(const Mat<S>& dout, const Cache& cache, Mat<S>& dq_in, Mat<S>& dkv_in) {
    const Eigen::Index d = cache.q_in.cols();
    const S scale = S(1) / std::sqrt(static_cast<S>(d_head));

    const Mat<S> dconcat = wo.backward(cache.concat, dout);
    Mat<S> dq(cache.q.rows(), d), dk(cache.k.rows(), d), dv(cache.v.rows(), d);
    for (int h = 0; h < n_heads; ++h) {
      const auto vh = cache.v.middleCols(h * d_head, d_head);
      const auto qh = cache.q.middleCols(h * d_head, d_head);
      const auto kh = cache.k.middleCols(h * d_head, d_head);
      const Mat<S>& p = cache.probs[static_cast<std::size_t>(h)];
      const auto dch = dconcat.middleCols(h * d_head, d_head);

      const Mat<S> dp = dch * vh.transpose();
      dv.middleCols(h * d_head, d_head).noalias() = p.transpose() * dch;
      // Softmax backward: ds = p .* (dp - rowsum(dp .* p)).
      Mat<S> ds(p.rows(), p.cols());
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const S dot = p.row(i).dot(dp.row(i));
        ds.row(i) = p.row(i).cwiseProduct(dp.row(i).array().matrix() - Mat<S>::Constant(1, p.cols(), dot));
      }
      dq.middleCols(h * d_head, d_head).noalias() = (ds * kh) * scale;
      dk.middleCols(h * d_head, d_head).noalias() = (ds.transpose() * qh) * scale;
    }
    dq_in += wq.backward(cache.q_in, dq);
    dkv_in += wk.backward(cache.kv_in, dk);
    dkv_in += wv.backward(cache.kv_in, dv);
  }

  void collect(std::vector<Tensor<S>*>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
  }
};

template <typename S>
struct FeedForward {
  Linear<S> fc1, fc2;

  struct Cache {
    Mat<S> x;
    Mat<S> pre;  // pre-ReLU activations
  };

  void init(const std::string& name, int d_model, int ffn_dim, Rng& rng) {
    fc1.init(name + ".fc1", d_model, ffn_dim, rng);
    fc2.init(name + ".fc2", ffn_dim, d_model, rng);
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache) const {
    Mat<S> pre = fc1.forward(x);
    Mat<S> h = pre.cwiseMax(S(0));
    Mat<S> y = fc2.forward(h);
    if (cache) {
      cache->x = x;
      cache->pre = std::move(pre);
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) {
    const Mat<S> h = cache.pre.cwiseMax(S(0));
    Mat<S> dh = fc2.backward(h, dy);
    dh = (cache.pre.array() > S(0)).template cast<S>().matrix().cwiseProduct(dh);
    return fc1.backward(cache.x, dh);
  }

  void collect(std::vector<Tensor<S>*>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }
};

}  // namespace nn

// Optional dropout stream for a training forward pass. Null pointer (or
// rate 0) means evaluation mode.
template <typename S>
struct DropoutStream {
  Rng rng;
  double rate;

  DropoutStream(std::uint64_t seed, double r) : rng(seed), rate(r) {}

  Mat<S> mask(Eigen::Index rows, Eigen::Index cols) {
    Mat<S> m(rows, cols);
    const S keep_inv = static_cast<S>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform() < rate ? S(0) : keep_inv;
    }
    return m;
  }
};

namespace detail {

// Applies an optional cached dropout mask; identity when the mask is empty.
template <typename S>
inline Mat<S> apply_mask(const Mat<S>& x, const Mat<S>& mask) {
  return mask.size() == 0 ? x : x.cwiseProduct(mask).eval();
}

}  // namespace detail

template <typename S>
struct EncoderLayerCache {
  typename nn::LayerNorm<S>::Cache ln1c, ln2c;
  Mat<S> x_in, a_in;
  std::vector<bool> real_flags;
  std::vector<int> block_counts;  // real positions per global block (empty if disabled)
  typename nn::MultiHeadAttention<S>::Cache attnc;
  Mat<S> x2;
  typename nn::FeedForward<S>::Cache ffnc;
  Mat<S> drop_attn, drop_ffn;
};

template <typename S>
struct DecoderLayerCache {
  typename nn::LayerNorm<S>::Cache ln1c, ln2c, ln3c;
  Mat<S> x_in, x2, x3;
  typename nn::MultiHeadAttention<S>::Cache selfc, crossc;
  typename nn::FeedForward<S>::Cache ffnc;
  Mat<S> drop_self, drop_cross, drop_ffn;
};

template <typename S>
struct EncoderLayer {
  nn::LayerNorm<S> ln1, ln2;
  nn::MultiHeadAttention<S> attn;
  nn::FeedForward<S> ffn;

  void init(const std::string& name, const ModelConfig& cfg, Rng& rng) {
    ln1.init(name + ".ln1", cfg.d_model);
    attn.init(name + ".attn", cfg.d_model, cfg.n_heads, rng);
    ln2.init(name + ".ln2", cfg.d_model);
    ffn.init(name + ".ffn", cfg.d_model, cfg.ffn_dim, rng);
  }

  void collect(std::vector<Tensor<S>*>& out) {
    ln1.collect(out);
    attn.collect(out);
    ln2.collect(out);
    ffn.collect(out);
  }
};

template <typename S>
struct DecoderLayer {
  nn::LayerNorm<S> ln1, ln2, ln3;
  nn::MultiHeadAttention<S> self_attn, cross_attn;
  nn::FeedForward<S> ffn;

  void init(const std::string& name, const ModelConfig& cfg, Rng& rng) {
    ln1.init(name + ".ln1", cfg.d_model);
    self_attn.init(name + ".self", cfg.d_model, cfg.n_heads, rng);
    ln2.init(name + ".ln2", cfg.d_model);
    cross_attn.init(name + ".cross", cfg.d_model, cfg.n_heads, rng);
    ln3.init(name + ".ln3", cfg.d_model);
    ffn.init(name + ".ffn", cfg.d_model, cfg.ffn_dim, rng);
  }

  void collect(std::vector<Tensor<S>*>& out) {
    ln1.collect(out);
    self_attn.collect(out);
    ln2.collect(out);
    cross_attn.collect(out);
    ln3.collect(out);
    ffn.collect(out);
  }
};

template <typename S>
struct EncodeResult {
  Mat<S> h;                      // final normalized encoder states, L x d
  std::vector<bool> real;        // per-position: not padding
  std::vector<int> ids;
  Mat<S> x_embed;
  std::vector<EncoderLayerCache<S>> layers;
  typename nn::LayerNorm<S>::Cache final_ln;
  Mat<S> drop_embed;
};

template <typename S>
struct DecodeResult {
  Mat<S> h;  // final normalized decoder states, n x d
  std::vector<int> ids;
  Mat<S> x_embed;
  std::vector<DecoderLayerCache<S>> layers;
  typename nn::LayerNorm<S>::Cache final_ln;
  Mat<S> drop_embed;
};

template <typename S>
class Seq2SeqModel {
 public:
  ModelConfig config;
  Tensor<S> embedding;  // vocab x d_model, tied input/output
  std::vector<EncoderLayer<S>> enc_layers;
  std::vector<DecoderLayer<S>> dec_layers;
  nn::LayerNorm<S> enc_final, dec_final;
  long long steps_trained = 0;

  static Seq2SeqModel create(const ModelConfig& cfg, int vocab_size, std::uint64_t seed) {
    cfg.validate();
    if (vocab_size < 1) throw InvalidInputError("vocab_size must be positive");
    Seq2SeqModel m;
    m.config = cfg;
    Rng rng(seed);
    m.embedding.init_normal("embedding", vocab_size, cfg.d_model, rng, nn::kInitStd);
    m.enc_layers.resize(static_cast<std::size_t>(cfg.n_enc_layers));
    for (int l = 0; l < cfg.n_enc_layers; ++l) {
      m.enc_layers[static_cast<std::size_t>(l)].init("enc." + std::to_string(l), cfg, rng);
    }
    m.dec_layers.resize(static_cast<std::size_t>(cfg.n_dec_layers));
    for (int l = 0; l < cfg.n_dec_layers; ++l) {
      m.dec_layers[static_cast<std::size_t>(l)].init("dec." + std::to_string(l), cfg, rng);
    }
    m.enc_final.init("enc.final_ln", cfg.d_model);
    m.dec_final.init("dec.final_ln", cfg.d_model);
    m.build_positions();
    return m;
  }

  int vocab_size() const { return static_cast<int>(embedding.w.rows()); }

  std::vector<Tensor<S>*> parameters() {
    std::vector<Tensor<S>*> out;
    out.push_back(&embedding);
    for (auto& l : enc_layers) l.collect(out);
    for (auto& l : dec_layers) l.collect(out);
    enc_final.collect(out);
    dec_final.collect(out);
    return out;
  }

  void zero_grad() {
    for (Tensor<S>* t : parameters()) t->g.setZero();
  }

  // Grows the embedding table to `new_vocab_size` rows; new rows start at
  // N(0, 0.02). Used when unit tokens join a text-pretrained model.
  void extend_vocab(int new_vocab_size, std::uint64_t seed) {
    const int old_rows = vocab_size();
    if (new_vocab_size < old_rows) throw InvalidInputError("cannot shrink vocabulary");
    Mat<S> grown(new_vocab_size, config.d_model);
    grown.topRows(old_rows) = embedding.w;
    Rng rng(seed);
    for (int i = old_rows; i < new_vocab_size; ++i) {
      for (int j = 0; j < config.d_model; ++j) grown(i, j) = static_cast<S>(rng.normal(0.0, nn::kInitStd));
    }
    embedding.w = std::move(grown);
    embedding.g = Mat<S>::Zero(new_vocab_size, config.d_model);
  }

  EncodeResult<S> encode(const std::vector<int>& ids, int pad_id = -1,
                         DropoutStream<S>* drop = nullptr) const {
    const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
    if (n < 1) throw InvalidInputError("encoder input is empty");
    if (n > config.max_len) throw InvalidInputError("encoder input exceeds max_len");
    EncodeResult<S> r;
    r.ids = ids;
    r.real.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) r.real[i] = ids[i] != pad_id;

    Mat<S> x = embed(ids);
    if (drop && drop->rate > 0.0) {
      r.drop_embed = drop->mask(x.rows(), x.cols());
      x = x.cwiseProduct(r.drop_embed);
    }
    r.x_embed = x;

    r.layers.resize(enc_layers.size());
    for (std::size_t l = 0; l < enc_layers.size(); ++l) {
      x = encoder_layer_forward(enc_layers[l], x, r.real, r.layers[l], drop);
    }
    r.h = enc_final.forward(x, &r.final_ln);
    return r;
  }

  DecodeResult<S> decode(const Mat<S>& enc_h, const std::vector<bool>& enc_real,
                         const std::vector<int>& ids, DropoutStream<S>* drop = nullptr) const {
    const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
    if (n < 1) throw InvalidInputError("decoder input is empty");
    if (n > config.max_len) throw InvalidInputError("decoder input exceeds max_len");
    DecodeResult<S> r;
    r.ids = ids;

    Mat<S> y = embed(ids);
    if (drop && drop->rate > 0.0) {
      r.drop_embed = drop->mask(y.rows(), y.cols());
      y = y.cwiseProduct(r.drop_embed);
    }
    r.x_embed = y;

    const BoolMat causal = causal_mask(n);
    const BoolMat cross = cross_mask(n, enc_real);
    r.layers.resize(dec_layers.size());
    for (std::size_t l = 0; l < dec_layers.size(); ++l) {
      y = decoder_layer_forward(dec_layers[l], y, enc_h, causal, cross, r.layers[l], drop);
    }
    r.h = dec_final.forward(y, &r.final_ln);
    return r;
  }

  // Tied output projection: logits = H * E^T.
  Mat<S> logits(const Mat<S>& dec_h) const { return dec_h * embedding.w.transpose(); }

  // Backward through decoder, cross-attention and encoder. dlogits is the
  // gradient of the loss w.r.t. the logits matrix.
  void backward(EncodeResult<S>& enc, DecodeResult<S>& dec, const Mat<S>& dlogits) {
    // Tied projection.
    embedding.g.noalias() += dlogits.transpose() * dec.h;
    Mat<S> dh = dlogits * embedding.w;

    Mat<S> dy = dec_final.backward(dh, dec.final_ln);
    Mat<S> denc_h = Mat<S>::Zero(enc.h.rows(), enc.h.cols());
    for (std::size_t l = dec_layers.size(); l-- > 0;) {
      dy = decoder_layer_backward(dec_layers[l], dy, dec.layers[l], denc_h);
    }
    if (dec.drop_embed.size() != 0) dy = dy.cwiseProduct(dec.drop_embed);
    embed_backward(dec.ids, dy);

    Mat<S> dx = enc_final.backward(denc_h, enc.final_ln);
    for (std::size_t l = enc_layers.size(); l-- > 0;) {
      dx = encoder_layer_backward(enc_layers[l], dx, enc.layers[l]);
    }
    if (enc.drop_embed.size() != 0) dx = dx.cwiseProduct(enc.drop_embed);
    embed_backward(enc.ids, dx);
  }

  const Mat<S>& positions() const { return pos_; }
  void build_positions() {
    pos_.resize(config.max_len, config.d_model);
    for (int p = 0; p < config.max_len; ++p) {
      for (int i = 0; i < config.d_model; i += 2) {
        const double angle = p / std::pow(10000.0, static_cast<double>(i) / config.d_model);
        pos_(p, i) = static_cast<S>(std::sin(angle));
        if (i + 1 < config.d_model) pos_(p, i + 1) = static_cast<S>(std::cos(angle));
      }
    }
  }

 private:
  Mat<S> embed(const std::vector<int>& ids) const {
    const S scale = static_cast<S>(std::sqrt(static_cast<double>(config.d_model)));
    Mat<S> x(static_cast<Eigen::Index>(ids.size()), config.d_model);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= vocab_size()) {
        throw InvalidInputError("token ID " + std::to_string(ids[i]) + " outside vocabulary of " +
                                std::to_string(vocab_size()));
      }
      x.row(static_cast<Eigen::Index>(i)) =
          embedding.w.row(ids[i]) * scale + pos_.row(static_cast<Eigen::Index>(i));
    }
    return x;
  }

  void embed_backward(const std::vector<int>& ids, const Mat<S>& dx) {
    const S scale = static_cast<S>(std::sqrt(static_cast<double>(config.d_model)));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      embedding.g.row(ids[i]) += dx.row(static_cast<Eigen::Index>(i)) * scale;
    }
  }

  int num_blocks(Eigen::Index n) const {
    return static_cast<int>((n + config.global_block_size - 1) / config.global_block_size);
  }

  // Per-block means of the normalized layer input over non-pad positions.
  Mat<S> global_tokens(const Mat<S>& a_in, const std::vector<bool>& real,
                       std::vector<int>& counts) const {
    const Eigen::Index n = a_in.rows();
    const int nb = num_blocks(n);
    Mat<S> g = Mat<S>::Zero(nb, a_in.cols());
    counts.assign(static_cast<std::size_t>(nb), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!real[static_cast<std::size_t>(i)]) continue;
      const int blk = static_cast<int>(i) / config.global_block_size;
      g.row(blk) += a_in.row(i);
      ++counts[static_cast<std::size_t>(blk)];
    }
    for (int k = 0; k < nb; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) g.row(k) /= static_cast<S>(counts[static_cast<std::size_t>(k)]);
    }
    return g;
  }

  BoolMat encoder_mask(Eigen::Index n, const std::vector<bool>& real,
                       const std::vector<int>& block_counts) const {
    const int nb = static_cast<int>(block_counts.size());
    BoolMat allowed = BoolMat::Constant(n, n + nb, false);
    const int r = config.local_window_radius;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!real[static_cast<std::size_t>(i)]) {
        allowed(i, i) = true;  // keep the softmax defined; output is ignored
        continue;
      }
      const Eigen::Index lo = std::max<Eigen::Index>(0, i - r);
      const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + r);
      for (Eigen::Index j = lo; j <= hi; ++j) {
        if (real[static_cast<std::size_t>(j)]) allowed(i, j) = true;
      }
      for (int k = 0; k < nb; ++k) {
        if (block_counts[static_cast<std::size_t>(k)] > 0) allowed(i, n + k) = true;
      }
    }
    return allowed;
  }

  static BoolMat causal_mask(Eigen::Index n) {
    BoolMat allowed = BoolMat::Constant(n, n, false);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) allowed(i, j) = true;
    }
    return allowed;
  }

  static BoolMat cross_mask(Eigen::Index n, const std::vector<bool>& enc_real) {
    const Eigen::Index m = static_cast<Eigen::Index>(enc_real.size());
    BoolMat allowed = BoolMat::Constant(n, m, false);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) allowed(i, j) = enc_real[static_cast<std::size_t>(j)];
    }
    return allowed;
  }

  Mat<S> encoder_layer_forward(const EncoderLayer<S>& layer, const Mat<S>& x,
                               const std::vector<bool>& real, EncoderLayerCache<S>& cache,
                               DropoutStream<S>* drop) const {
    cache.x_in = x;
    cache.real_flags = real;
    Mat<S> a_in = layer.ln1.forward(x, &cache.ln1c);
    Mat<S> kv = a_in;
    if (config.use_transient_global) {
      const Mat<S> g = global_tokens(a_in, real, cache.block_counts);
      kv.conservativeResize(a_in.rows() + g.rows(), Eigen::NoChange);
      kv.bottomRows(g.rows()) = g;
    } else {
      cache.block_counts.clear();
    }
    const BoolMat allowed = encoder_mask(x.rows(), real, cache.block_counts);
    Mat<S> attn_out = layer.attn.forward(a_in, kv, allowed, &cache.attnc);
    if (drop && drop->rate > 0.0) cache.drop_attn = drop->mask(attn_out.rows(), attn_out.cols());
    cache.a_in = std::move(a_in);
    cache.x2 = x + detail::apply_mask(attn_out, cache.drop_attn);

    Mat<S> f_in = layer.ln2.forward(cache.x2, &cache.ln2c);
    Mat<S> ffn_out = layer.ffn.forward(f_in, &cache.ffnc);
    if (drop && drop->rate > 0.0) cache.drop_ffn = drop->mask(ffn_out.rows(), ffn_out.cols());
    return cache.x2 + detail::apply_mask(ffn_out, cache.drop_ffn);
  }

  Mat<S> encoder_layer_backward(EncoderLayer<S>& layer, const Mat<S>& dy,
                                EncoderLayerCache<S>& cache) {
    Mat<S> dffn_out = detail::apply_mask(dy, cache.drop_ffn);
    Mat<S> df_in = layer.ffn.backward(dffn_out, cache.ffnc);
    Mat<S> dx2 = dy + layer.ln2.backward(df_in, cache.ln2c);

    Mat<S> dattn_out = detail::apply_mask(dx2, cache.drop_attn);
    const Eigen::Index n = cache.x_in.rows();
    Mat<S> dq_in = Mat<S>::Zero(n, cache.x_in.cols());
    Mat<S> dkv = Mat<S>::Zero(cache.attnc.kv_in.rows(), cache.x_in.cols());
    layer.attn.backward(dattn_out, cache.attnc, dq_in, dkv);

    Mat<S> da_in = dq_in + dkv.topRows(n);
    if (config.use_transient_global && !cache.block_counts.empty()) {
      // Block means are linear; spread each global-token gradient evenly.
      const Mat<S> dg = dkv.bottomRows(static_cast<Eigen::Index>(cache.block_counts.size()));
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!cache.real_flags[static_cast<std::size_t>(i)]) continue;
        const int blk = static_cast<int>(i) / config.global_block_size;
        const int count = cache.block_counts[static_cast<std::size_t>(blk)];
        if (count > 0) da_in.row(i) += dg.row(blk) / static_cast<S>(count);
      }
    }
    return dx2 + layer.ln1.backward(da_in, cache.ln1c);
  }

  Mat<S> decoder_layer_forward(const DecoderLayer<S>& layer, const Mat<S>& y, const Mat<S>& enc_h,
                               const BoolMat& causal, const BoolMat& cross,
                               DecoderLayerCache<S>& cache, DropoutStream<S>* drop) const {
    cache.x_in = y;
    Mat<S> s_in = layer.ln1.forward(y, &cache.ln1c);
    Mat<S> self_out = layer.self_attn.forward(s_in, s_in, causal, &cache.selfc);
    if (drop && drop->rate > 0.0) cache.drop_self = drop->mask(self_out.rows(), self_out.cols());
    cache.x2 = y + detail::apply_mask(self_out, cache.drop_self);

    Mat<S> c_in = layer.ln2.forward(cache.x2, &cache.ln2c);
    Mat<S> cross_out = layer.cross_attn.forward(c_in, enc_h, cross, &cache.crossc);
    if (drop && drop->rate > 0.0) cache.drop_cross = drop->mask(cross_out.rows(), cross_out.cols());
    cache.x3 = cache.x2 + detail::apply_mask(cross_out, cache.drop_cross);

    Mat<S> f_in = layer.ln3.forward(cache.x3, &cache.ln3c);
    Mat<S> ffn_out = layer.ffn.forward(f_in, &cache.ffnc);
    if (drop && drop->rate > 0.0) cache.drop_ffn = drop->mask(ffn_out.rows(), ffn_out.cols());
    return cache.x3 + detail::apply_mask(ffn_out, cache.drop_ffn);
  }

  Mat<S> decoder_layer_backward(DecoderLayer<S>& layer, const Mat<S>& dy,
                                DecoderLayerCache<S>& cache, Mat<S>& denc_h) {
    Mat<S> dffn_out = detail::apply_mask(dy, cache.drop_ffn);
    Mat<S> df_in = layer.ffn.backward(dffn_out, cache.ffnc);
    Mat<S> dx3 = dy + layer.ln3.backward(df_in, cache.ln3c);

    Mat<S> dcross_out = detail::apply_mask(dx3, cache.drop_cross);
    Mat<S> dc_in = Mat<S>::Zero(cache.x2.rows(), cache.x2.cols());
    layer.cross_attn.backward(dcross_out, cache.crossc, dc_in, denc_h);
    Mat<S> dx2 = dx3 + layer.ln2.backward(dc_in, cache.ln2c);

    Mat<S> dself_out = detail::apply_mask(dx2, cache.drop_self);
    Mat<S> ds_in = Mat<S>::Zero(cache.x_in.rows(), cache.x_in.cols());
    Mat<S> ds_kv = Mat<S>::Zero(cache.x_in.rows(), cache.x_in.cols());
    layer.self_attn.backward(dself_out, cache.selfc, ds_in, ds_kv);
    ds_in += ds_kv;
    return dx2 + layer.ln1.backward(ds_in, cache.ln1c);
  }

  Mat<S> pos_;
};

// Convenience full forward: encode then teacher-forced decode, no padding.
template <typename S>
Mat<S> forward(const Seq2SeqModel<S>& model, const std::vector<int>& encoder_ids,
               const std::vector<int>& decoder_input_ids) {
  const auto enc = model.encode(encoder_ids);
  const auto dec = model.decode(enc.h, enc.real, decoder_input_ids);
  return model.logits(dec.h);
}

// Numerically careful row log-softmax (double accumulation regardless of S).
template <typename S>
std::vector<double> log_softmax_row(const Mat<S>& logits, Eigen::Index row) {
  const Eigen::Index v = logits.cols();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < v; ++j) mx = std::max(mx, static_cast<double>(logits(row, j)));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < v; ++j) sum += std::exp(static_cast<double>(logits(row, j)) - mx);
  const double lz = mx + std::log(sum);
  std::vector<double> out(static_cast<std::size_t>(v));
  for (Eigen::Index j = 0; j < v; ++j) out[static_cast<std::size_t>(j)] = static_cast<double>(logits(row, j)) - lz;
  return out;
}

struct LossResult {
  double value = 0.0;       // mean cross-entropy over non-pad targets
  double token_sum = 0.0;   // summed cross-entropy (for batch-level means)
  long long n_tokens = 0;
};

// Mean token-level cross-entropy over non-pad targets. When `dlogits` is
// non-null it receives softmax(logits) - onehot(target) on non-pad rows
// (unscaled; callers divide by their own token count).
template <typename S>
LossResult cross_entropy(const Mat<S>& logits, const std::vector<int>& targets, int pad_id,
                         Mat<S>* dlogits = nullptr) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw InvalidInputError("logits rows != target length");
  }
  if (dlogits) *dlogits = Mat<S>::Zero(logits.rows(), logits.cols());
  LossResult r;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t == pad_id) continue;
    if (t < 0 || t >= logits.cols()) throw InvalidInputError("target ID outside vocabulary");
    const auto lp = log_softmax_row(logits, i);
    r.token_sum -= lp[static_cast<std::size_t>(t)];
    ++r.n_tokens;
    if (dlogits) {
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        (*dlogits)(i, j) = static_cast<S>(std::exp(lp[static_cast<std::size_t>(j)]));
      }
      (*dlogits)(i, t) -= S(1);
    }
  }
  if (r.n_tokens == 0) throw InvalidInputError("all targets are padding");
  r.value = r.token_sum / static_cast<double>(r.n_tokens);
  return r;
}

}  // namespace unitqa
