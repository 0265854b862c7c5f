#pragma once

// Five-way answer scoring: logits (v + u) . g_h, softmax, loss and accuracy.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lmn/error.hpp"
#include "lmn/subtitle_memory.hpp"
#include "lmn/types.hpp"

namespace lmn {

struct QAItem {
  std::string qid;
  std::string question;
  std::array<std::string, kNumAnswers> answers;
  std::optional<int> correct_index;
  std::string movie_id;
  std::vector<std::string> clip_ids;
};

struct AnswerDistribution {
  Vector logits;  // 5
  Vector probs;   // 5
};

// 5 x d, row h = g_h.
using AnswerMatrix = Eigen::Matrix<double, kNumAnswers, Eigen::Dynamic>;

inline AnswerDistribution score_answers(const Vector& clip, const Vector& question, const AnswerMatrix& answers) {
  require_dims(clip.size() == question.size(), "score_answers: clip vs question dimension");
  require_dims(answers.cols() == clip.size(), "score_answers: answer vs clip dimension");
  AnswerDistribution out;
  out.logits = answers * (clip + question);
  if (!out.logits.allFinite()) throw Error("score_answers: non-finite logits");
  out.probs = softmax(out.logits);
  return out;
}

inline double log_sum_exp(const Vector& logits) {
  const double shift = logits.maxCoeff();
  return shift + std::log((logits.array() - shift).exp().sum());
}

/// -log p[correct], evaluated in log space from the logits.
inline double cross_entropy(const AnswerDistribution& dist, int correct) {
  if (correct < 0 || correct >= dist.logits.size()) {
    throw Error("cross_entropy: correct index " + std::to_string(correct) + " out of range");
  }
  return std::max(0.0, log_sum_exp(dist.logits) - dist.logits(correct));
}

/// Argmax of the logits; ties go to the lowest index.
inline int predict(const AnswerDistribution& dist) {
  int best = 0;
  for (int h = 1; h < dist.logits.size(); ++h) {
    if (dist.logits(h) > dist.logits(best)) best = h;
  }
  return best;
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw Error("accuracy: length mismatch");
  if (predictions.empty()) throw Error("accuracy: empty lists");
  std::size_t hits = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) hits += predictions[k] == labels[k];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace lmn
