#pragma once

// The full pipeline: frame encoding, subtitle memory (optional), answer
// scoring, and the analytic gradient of the loss with respect to W_l.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "lmn/answering.hpp"
#include "lmn/error.hpp"
#include "lmn/frame_encoder.hpp"
#include "lmn/subtitle_memory.hpp"
#include "lmn/types.hpp"
#include "lmn/word_memory.hpp"

namespace lmn {

struct ModelConfig {
  std::size_t swm_hops = 1;
  std::size_t um_hops = 1;
  bool question_guided = false;
  bool normalize_sentences = true;
  bool average_clip = false;
  bool carry_frames = false;

  void validate() const {
    if (swm_hops < 1) throw Error("config: swm_hops must be >= 1");
    if (um_hops < 1) throw Error("config: um_hops must be >= 1");
  }

  ClipOptions clip_options() const { return {um_hops, question_guided, carry_frames}; }
};

struct ModelParams {
  ProjectionWeights projection;
  ModelConfig config;
};

// One question with everything the model consumes already embedded.
struct Example {
  std::string qid;
  ClipFeatures features;
  std::optional<SubtitleMemory> subtitles;  // absent in video-only mode
  Vector question;
  AnswerMatrix answers;
  std::optional<int> label;
};

inline Example prepare_example(const StaticWordMemory& mem, const QAItem& item, ClipFeatures features,
                               std::optional<SubtitleMemory> subtitles, bool normalize_sentences) {
  Example ex;
  ex.qid = item.qid;
  ex.features = std::move(features);
  ex.subtitles = std::move(subtitles);
  ex.question = embed_sentence(mem, item.question, normalize_sentences).vector;
  ex.answers.resize(kNumAnswers, mem.dim());
  for (int h = 0; h < kNumAnswers; ++h) {
    ex.answers.row(h) = embed_sentence(mem, item.answers[static_cast<std::size_t>(h)], normalize_sentences)
                            .vector.transpose();
  }
  ex.label = item.correct_index;
  return ex;
}

class Model {
 public:
  struct Pass {
    FrameEncoder::Trace frame_trace;
    FrameRepresentations frames;
    ClipTrace clip_trace;
    Vector clip;  // the v fed to the answer scorer
    AnswerDistribution dist;
  };

  explicit Model(const StaticWordMemory& mem) : encoder_(mem) {}

  const FrameEncoder& encoder() const noexcept { return encoder_; }

  AnswerDistribution infer(const ModelParams& params, const Example& ex, Pass* pass = nullptr) const {
    params.config.validate();
    Pass local;
    Pass& p = pass ? *pass : local;
    p.frames = encoder_.encode(ex.features, params.projection, params.config.swm_hops, &p.frame_trace);
    if (ex.subtitles) {
      p.clip = encode_clip(p.frames.matrix, *ex.subtitles, ex.question, params.config.clip_options(), nullptr,
                           &p.clip_trace)
                   .vector;
    } else {
      p.clip = p.frames.sum();
    }
    if (params.config.average_clip) p.clip /= static_cast<double>(p.frames.frames());
    p.dist = score_answers(p.clip, ex.question, ex.answers);
    return p.dist;
  }

  std::pair<double, AnswerDistribution> forward(const ModelParams& params, const Example& ex) const {
    const int label = require_label(ex);
    auto dist = infer(params, ex);
    return {cross_entropy(dist, label), std::move(dist)};
  }

  // dL/dW_l for one example; optionally reports the loss of the same pass.
  Matrix backward(const ModelParams& params, const Example& ex, double* loss_out = nullptr) const {
    const int label = require_label(ex);
    Pass pass;
    infer(params, ex, &pass);
    if (loss_out) *loss_out = cross_entropy(pass.dist, label);

    Vector logit_grad = pass.dist.probs;
    logit_grad(label) -= 1.0;
    Vector clip_grad = ex.answers.transpose() * logit_grad;
    if (params.config.average_clip) clip_grad /= static_cast<double>(pass.frames.frames());

    Matrix frame_grad;
    if (ex.subtitles) {
      frame_grad = encode_clip_backward(pass.clip_trace, clip_grad);
    } else {
      frame_grad = clip_grad.transpose().replicate(pass.frames.frames(), 1);
    }
    return encoder_.backward(ex.features, pass.frame_trace, frame_grad);
  }

 private:
  static int require_label(const Example& ex) {
    if (!ex.label) throw Error("item '" + ex.qid + "' has no correct_index");
    return *ex.label;
  }

  FrameEncoder encoder_;
};

/// Loss and answer distribution for one labeled item.
inline std::pair<double, AnswerDistribution> forward(const ModelParams& params, const StaticWordMemory& mem,
                                                     const QAItem& item, const ClipFeatures& features,
                                                     const std::optional<SubtitleMemory>& sub) {
  const Example ex = prepare_example(mem, item, features, sub, params.config.normalize_sentences);
  return Model(mem).forward(params, ex);
}

/// Analytic dL/dW_l for one labeled item.
inline Matrix backward(const ModelParams& params, const StaticWordMemory& mem, const QAItem& item,
                       const ClipFeatures& features, const std::optional<SubtitleMemory>& sub) {
  const Example ex = prepare_example(mem, item, features, sub, params.config.normalize_sentences);
  return Model(mem).backward(params, ex);
}

}  // namespace lmn
