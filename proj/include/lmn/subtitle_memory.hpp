#pragma once

// Dynamic Subtitle Memory: per-movie sentence embeddings, clip-level
// attention over them, the ReLU update mechanism and question-guided
// reweighting.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lmn/error.hpp"
#include "lmn/frame_encoder.hpp"
#include "lmn/types.hpp"
#include "lmn/word_memory.hpp"

namespace lmn {

// N x d, row n = s_n. Hop operations return fresh memories; each hop scales
// row n by a nonnegative scalar.
struct SubtitleMemory {
  Matrix rows;
  std::vector<std::string> sentences;
  std::string movie_id;

  Eigen::Index size() const noexcept { return rows.rows(); }
  Eigen::Index dim() const noexcept { return rows.cols(); }

  SubtitleMemory with_rows(Matrix new_rows) const { return {std::move(new_rows), sentences, movie_id}; }
};

struct ClipRepresentation {
  Vector vector;       // v = sum_i v_i
  Matrix per_frame;    // T x d, post-attention v_i
  Matrix beta;         // T x N similarities of the final pass
};

struct ClipOptions {
  std::size_t um_hops = 1;
  bool question_guided = false;
  // Recompute each update hop from the previous hop's reattended frames
  // rather than from the frame encoder output.
  bool carry_frames = false;
};

inline SubtitleMemory build_memory(const std::vector<std::string>& sentences, const StaticWordMemory& mem,
                                   bool normalize = true, std::string movie_id = {}) {
  if (sentences.empty()) throw Error("build_memory: empty sentence list");
  Matrix rows(static_cast<Eigen::Index>(sentences.size()), mem.dim());
  for (std::size_t n = 0; n < sentences.size(); ++n) {
    rows.row(static_cast<Eigen::Index>(n)) = embed_sentence(mem, sentences[n], normalize).vector.transpose();
  }
  return {std::move(rows), sentences, std::move(movie_id)};
}

/// beta_i^n = v_i . s_n, v_i := sum_n beta_i^n s_n, v = sum_i v_i.
inline ClipRepresentation subtitle_attend(const Matrix& frames, const SubtitleMemory& sub) {
  require_dims(frames.cols() == sub.dim(), "subtitle_attend: frame vs subtitle dimension");
  ClipRepresentation out;
  out.beta = frames * sub.rows.transpose();
  out.per_frame = out.beta * sub.rows;
  out.vector = out.per_frame.colwise().sum().transpose();
  return out;
}

inline ClipRepresentation subtitle_attend(const FrameRepresentations& frames, const SubtitleMemory& sub) {
  return subtitle_attend(frames.matrix, sub);
}

/// gamma_n = ReLU(v . s_n); s_n' = gamma_n s_n.
inline SubtitleMemory update_hop(const SubtitleMemory& sub, const Vector& clip_vector) {
  require_dims(clip_vector.size() == sub.dim(), "update_hop: clip vector vs subtitle dimension");
  const Vector gate = (sub.rows * clip_vector).cwiseMax(0.0);
  return sub.with_rows(gate.asDiagonal() * sub.rows);
}

/// Max-shifted softmax.
inline Vector softmax(const Vector& logits) {
  const double shift = logits.maxCoeff();
  Vector e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

/// q = softmax_n(u . s_n); s_n := q_n s_n.
inline SubtitleMemory question_guide(const SubtitleMemory& sub, const Vector& question) {
  require_dims(question.size() == sub.dim(), "question_guide: question vs subtitle dimension");
  if (sub.size() < 1) throw Error("question_guide: empty memory");
  const Vector weights = softmax(sub.rows * question);
  return sub.with_rows(weights.asDiagonal() * sub.rows);
}

// Records every attention pass of encode_clip so gradients can flow back to
// the frame representations.
struct ClipTrace {
  enum class Transition { kConstruction, kUpdate, kQuestionGuide };

  struct Stage {
    Transition transition = Transition::kConstruction;
    Matrix memory;          // memory used by this pass
    Matrix base;            // T x d frames fed to this pass
    ClipRepresentation output;
    Vector transition_input;  // gate pre-activations or question logits
    Vector transition_weights;  // gamma or q
  };

  bool carry_frames = false;
  Vector question;
  std::vector<Stage> stages;
};

/// Base attention pass, then um_hops - 1 update hops (each followed by a fresh
/// pass), then an optional question-guided reweighting and final pass.
inline ClipRepresentation encode_clip(const Matrix& frames, const SubtitleMemory& sub, const Vector& question,
                                      const ClipOptions& options, SubtitleMemory* final_memory = nullptr,
                                      ClipTrace* trace = nullptr) {
  if (options.um_hops < 1) throw Error("encode_clip: um_hops must be >= 1");
  require_dims(frames.cols() == sub.dim(), "encode_clip: frame vs subtitle dimension");
  if (options.question_guided) {
    require_dims(question.size() == sub.dim(), "encode_clip: question vs subtitle dimension");
  }

  if (trace) {
    trace->carry_frames = options.carry_frames;
    trace->question = question;
    trace->stages.clear();
  }

  SubtitleMemory memory = sub;
  ClipRepresentation rep = subtitle_attend(frames, memory);
  if (trace) {
    trace->stages.push_back({ClipTrace::Transition::kConstruction, memory.rows, frames, rep, {}, {}});
  }

  for (std::size_t t = 1; t < options.um_hops; ++t) {
    const Vector pre = memory.rows * rep.vector;
    memory = update_hop(memory, rep.vector);
    const Matrix base = options.carry_frames ? rep.per_frame : frames;
    rep = subtitle_attend(base, memory);
    if (trace) {
      trace->stages.push_back(
          {ClipTrace::Transition::kUpdate, memory.rows, base, rep, pre, pre.cwiseMax(0.0)});
    }
  }

  if (options.question_guided) {
    const Vector logits = memory.rows * question;
    memory = question_guide(memory, question);
    const Matrix base = options.carry_frames ? rep.per_frame : frames;
    rep = subtitle_attend(base, memory);
    if (trace) {
      trace->stages.push_back(
          {ClipTrace::Transition::kQuestionGuide, memory.rows, base, rep, logits, softmax(logits)});
    }
  }

  if (final_memory) *final_memory = std::move(memory);
  return rep;
}

inline ClipRepresentation encode_clip(const FrameRepresentations& frames, const SubtitleMemory& sub,
                                      const Vector& question, const ClipOptions& options) {
  return encode_clip(frames.matrix, sub, question, options);
}

/// Reverse pass of encode_clip. Given dL/dv for the final clip vector, returns
/// dL/d(frames) (T x d). The construction memory and question are frozen.
inline Matrix encode_clip_backward(const ClipTrace& trace, const Vector& clip_grad) {
  const std::size_t count = trace.stages.size();
  const Eigen::Index frames = trace.stages.front().base.rows();
  const Eigen::Index dim = trace.stages.front().base.cols();

  std::vector<Vector> vector_grad(count, Vector::Zero(dim));
  std::vector<Matrix> output_grad(count, Matrix::Zero(frames, dim));
  std::vector<Matrix> memory_grad(count);
  for (std::size_t s = 0; s < count; ++s) {
    memory_grad[s] = Matrix::Zero(trace.stages[s].memory.rows(), dim);
  }
  vector_grad[count - 1] = clip_grad;
  Matrix frame_grad = Matrix::Zero(frames, dim);

  for (std::size_t s = count; s-- > 0;) {
    const auto& stage = trace.stages[s];
    const Matrix& m = stage.memory;
    const Matrix& base = stage.base;

    // v = sum_i y_i, so every y_i receives dL/dv.
    Matrix dy = output_grad[s];
    dy.rowwise() += vector_grad[s].transpose();

    // y_i = M^T M b_i.
    const Matrix base_grad = dy * (m.transpose() * m);
    memory_grad[s] += (m * base.transpose()) * dy + (m * dy.transpose()) * base;

    if (s == 0 || !trace.carry_frames) {
      frame_grad += base_grad;
    } else {
      output_grad[s - 1] += base_grad;
    }

    if (stage.transition == ClipTrace::Transition::kConstruction) continue;

    const Matrix& prev = trace.stages[s - 1].memory;
    const Vector& weights = stage.transition_weights;
    const Vector weight_grad = (prev.cwiseProduct(memory_grad[s])).rowwise().sum();
    memory_grad[s - 1] += weights.asDiagonal() * memory_grad[s];

    if (stage.transition == ClipTrace::Transition::kUpdate) {
      // ReLU subgradient is 0 at the kink.
      Vector pre_grad(weight_grad.size());
      for (Eigen::Index n = 0; n < pre_grad.size(); ++n) {
        pre_grad(n) = stage.transition_input(n) > 0.0 ? weight_grad(n) : 0.0;
      }
      const Vector& gate_vector = trace.stages[s - 1].output.vector;
      memory_grad[s - 1] += pre_grad * gate_vector.transpose();
      vector_grad[s - 1] += prev.transpose() * pre_grad;
    } else {
      const double mean = weights.dot(weight_grad);
      const Vector logit_grad = weights.cwiseProduct((weight_grad.array() - mean).matrix());
      memory_grad[s - 1] += logit_grad * trace.question.transpose();
    }
  }
  return frame_grad;
}

struct RankedSubtitle {
  std::size_t index;  // 0-based
  double similarity;
};

/// Subtitles by descending v_i . s_n, ties by ascending index.
inline std::vector<RankedSubtitle> rank_subtitles(const Vector& frame, const SubtitleMemory& sub) {
  require_dims(frame.size() == sub.dim(), "rank_subtitles: frame vs subtitle dimension");
  if (sub.size() < 1) throw Error("rank_subtitles: empty memory");
  const Vector beta = sub.rows * frame;
  std::vector<RankedSubtitle> ranked;
  ranked.reserve(static_cast<std::size_t>(beta.size()));
  for (Eigen::Index n = 0; n < beta.size(); ++n) ranked.push_back({static_cast<std::size_t>(n), beta(n)});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedSubtitle& a, const RankedSubtitle& b) { return a.similarity > b.similarity; });
  return ranked;
}

}  // namespace lmn
