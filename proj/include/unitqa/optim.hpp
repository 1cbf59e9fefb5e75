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

// AdamW optimizer (decoupled weight decay, lr-scaled) and the batched
// seq2seq training step. Batch loss is the token-level mean of summed
// cross-entropy across the whole batch; examples are run one at a time and
// gradients accumulated, so padding never enters the loss.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "unitqa/errors.hpp"
#include "unitqa/model.hpp"

namespace unitqa {

template <typename S>
class AdamW {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // One update over the registered parameters:
  //   p <- p - lr * (mhat / (sqrt(vhat) + eps) + weight_decay * p)
  void step(std::vector<Tensor<S>*>& params, double lr, double weight_decay) {
    if (m_.empty()) {
      m_.reserve(params.size());
      v_.reserve(params.size());
      for (Tensor<S>* t : params) {
        m_.push_back(Mat<S>::Zero(t->w.rows(), t->w.cols()));
        v_.push_back(Mat<S>::Zero(t->w.rows(), t->w.cols()));
      }
    }
    if (m_.size() != params.size()) throw InvalidStateError("optimizer state does not match parameters");
    ++t_;
    const S bc1 = static_cast<S>(1.0 - std::pow(beta1, static_cast<double>(t_)));
    const S bc2 = static_cast<S>(1.0 - std::pow(beta2, static_cast<double>(t_)));
    const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
    const S lr_s = static_cast<S>(lr), wd = static_cast<S>(weight_decay), e = static_cast<S>(eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat<S>& m = m_[i];
      Mat<S>& v = v_[i];
      const Mat<S>& g = params[i]->g;
      m = b1 * m + (S(1) - b1) * g;
      v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
      const Mat<S> mhat = m / bc1;
      const Mat<S> vhat = v / bc2;
      Mat<S>& p = params[i]->w;
      p -= lr_s * ((mhat.array() / (vhat.array().sqrt() + e)).matrix() + wd * p);
    }
  }

  long long steps() const { return t_; }

 private:
  long long t_ = 0;
  std::vector<Mat<S>> m_;
  std::vector<Mat<S>> v_;
};

// One teacher-forced training example: encoder input, decoder input
// (BOS-shifted) and targets (ending in EOS, padded with pad_id).
struct TrainExample {
  std::vector<int> encoder_ids;
  std::vector<int> decoder_input_ids;
  std::vector<int> target_ids;
};

template <typename S>
struct Trainer {
  Seq2SeqModel<S>* model = nullptr;
  AdamW<S> opt;
  double grad_clip = 1.0;  // global-norm clip; <= 0 disables

  explicit Trainer(Seq2SeqModel<S>* m) : model(m) {}

  // Forward+backward over the batch, one AdamW step. Returns the batch loss
  // (summed token cross-entropy / total non-pad target tokens). Throws
  // TrainingDivergedError on non-finite loss or gradients.
  double train_step(const std::vector<TrainExample>& batch, double lr, double weight_decay,
                    int pad_id, DropoutStream<S>* drop = nullptr) {
    if (batch.empty()) throw InvalidInputError("empty training batch");
    model->zero_grad();

    struct Pass {
      EncodeResult<S> enc;
      DecodeResult<S> dec;
      Mat<S> dlogits;  // unscaled: softmax - onehot per non-pad row
    };
    std::vector<Pass> passes;
    passes.reserve(batch.size());
    double loss_sum = 0.0;
    long long total_tokens = 0;
    for (const TrainExample& ex : batch) {
      if (ex.decoder_input_ids.size() != ex.target_ids.size()) {
        throw InvalidInputError("decoder input and target lengths differ");
      }
      Pass p;
      p.enc = model->encode(ex.encoder_ids, pad_id, drop);
      p.dec = model->decode(p.enc.h, p.enc.real, ex.decoder_input_ids, drop);
      const Mat<S> lg = model->logits(p.dec.h);
      const LossResult lr_ex = cross_entropy(lg, ex.target_ids, pad_id, &p.dlogits);
      loss_sum += lr_ex.token_sum;
      total_tokens += lr_ex.n_tokens;
      passes.push_back(std::move(p));
    }
    const double batch_loss = loss_sum / static_cast<double>(total_tokens);
    if (!std::isfinite(batch_loss)) throw TrainingDivergedError("non-finite training loss");

    const S inv = static_cast<S>(1.0 / static_cast<double>(total_tokens));
    for (std::size_t i = 0; i < passes.size(); ++i) {
      const Mat<S> scaled = passes[i].dlogits * inv;
      model->backward(passes[i].enc, passes[i].dec, scaled);
    }

    auto params = model->parameters();
    double sq = 0.0;
    for (Tensor<S>* t : params) {
      const double n = static_cast<double>(t->g.template cast<double>().squaredNorm());
      if (!std::isfinite(n)) throw TrainingDivergedError("non-finite gradient");
      sq += n;
    }
    const double gnorm = std::sqrt(sq);
    if (grad_clip > 0.0 && gnorm > grad_clip) {
      const S f = static_cast<S>(grad_clip / gnorm);
      for (Tensor<S>* t : params) t->g *= f;
    }

    opt.step(params, lr, weight_decay);
    ++model->steps_trained;
    return batch_loss;
  }
};

}  // namespace unitqa
