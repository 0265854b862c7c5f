#pragma once

// Minibatch SGD on W_l with dev-set early stopping, and a central-difference
// gradient checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lmn/answering.hpp"
#include "lmn/error.hpp"
#include "lmn/model.hpp"
#include "lmn/parallel.hpp"
#include "lmn/random.hpp"
#include "lmn/types.hpp"

namespace lmn {

/// Uniform on [-a, a] with a = sqrt(6 / (d + C)).
inline ProjectionWeights init_projection(Eigen::Index word_dim, Eigen::Index channels, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(word_dim + channels));
  ProjectionWeights w{Matrix(word_dim, channels)};
  for (Eigen::Index r = 0; r < word_dim; ++r)
    for (Eigen::Index c = 0; c < channels; ++c) w.matrix(r, c) = rng.uniform(-bound, bound);
  return w;
}

inline ProjectionWeights sgd_step(const ProjectionWeights& weights, const Matrix& gradient, double learning_rate) {
  require_dims(weights.matrix.rows() == gradient.rows() && weights.matrix.cols() == gradient.cols(),
               "sgd_step: gradient shape");
  if (!(learning_rate > 0.0)) throw Error("sgd_step: learning rate must be positive");
  return {weights.matrix - learning_rate * gradient};
}

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double dev_fraction = 0.1;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be positive");
    if (batch_size < 1) throw Error("train: batch_size must be >= 1");
    if (patience < 1) throw Error("train: patience must be >= 1");
    if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw Error("train: dev_fraction must lie in (0, 1)");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_acc = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_dev_acc = 0.0;
  std::string params_digest;
};

inline nlohmann::json to_json(const TrainReport& report) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_acc", e.dev_acc}});
  }
  return {{"epochs", std::move(epochs)}, {"best_epoch", report.best_epoch}, {"best_dev_acc", report.best_dev_acc}};
}

/// FNV-1a over the raw bytes of W_l; identifies a parameter snapshot.
inline std::string params_digest(const ProjectionWeights& weights) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(weights.matrix.data());
  const std::size_t n = static_cast<std::size_t>(weights.matrix.size()) * sizeof(double);
  for (std::size_t k = 0; k < n; ++k) {
    h ^= bytes[k];
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Mean gradient over the listed examples, summed in list order so the
/// result is independent of the worker count. Adds the summed loss to
/// `loss_sum` when given.
inline Matrix batch_gradient(const Model& model, const ModelParams& params, std::span<const Example> examples,
                             std::span<const std::size_t> indices, std::size_t workers, double* loss_sum = nullptr) {
  if (indices.empty()) throw Error("batch_gradient: empty batch");
  std::vector<Matrix> grads(indices.size());
  std::vector<double> losses(indices.size(), 0.0);
  parallel_for(indices.size(), workers, [&](std::size_t k) {
    grads[k] = model.backward(params, examples[indices[k]], &losses[k]);
  });
  Matrix total = grads[0];
  for (std::size_t k = 1; k < grads.size(); ++k) total += grads[k];
  if (loss_sum) {
    for (double l : losses) *loss_sum += l;
  }
  return total / static_cast<double>(indices.size());
}

inline std::vector<AnswerDistribution> infer_all(const Model& model, const ModelParams& params,
                                                 std::span<const Example> examples,
                                                 std::span<const std::size_t> indices, std::size_t workers) {
  std::vector<AnswerDistribution> out(indices.size());
  parallel_for(indices.size(), workers, [&](std::size_t k) { out[k] = model.infer(params, examples[indices[k]]); });
  return out;
}

inline double labeled_accuracy(const Model& model, const ModelParams& params, std::span<const Example> examples,
                               std::span<const std::size_t> indices, std::size_t workers) {
  const auto dists = infer_all(model, params, examples, indices, workers);
  std::vector<int> predictions, labels;
  predictions.reserve(indices.size());
  labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    predictions.push_back(predict(dists[k]));
    labels.push_back(*examples[indices[k]].label);
  }
  return accuracy(predictions, labels);
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

/// Seeded shuffle, dev split, minibatch SGD, per-epoch dev accuracy, and
/// early stopping after `patience` epochs without improvement. Returns the
/// parameters of the best dev epoch (ties keep the earlier epoch).
inline std::pair<ModelParams, TrainReport> train(std::span<const Example> dataset, const StaticWordMemory& mem,
                                                 const TrainConfig& config, const ModelParams& initial) {
  config.validate();
  initial.config.validate();
  if (dataset.empty()) throw Error("train: empty dataset");
  for (const auto& ex : dataset) {
    if (!ex.label) throw Error("train: item '" + ex.qid + "' is unlabeled");
  }

  TrainReport report;
  if (config.max_epochs == 0) {
    report.params_digest = params_digest(initial.projection);
    return {initial, std::move(report)};
  }
  if (dataset.size() < 2) throw Error("train: need at least 2 items to split off a dev set");

  Rng rng(config.seed);
  auto order = all_indices(dataset.size());
  rng.shuffle(std::span<std::size_t>(order));
  const auto dev_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.dev_fraction * static_cast<double>(dataset.size()))), 1,
      dataset.size() - 1);
  const std::vector<std::size_t> dev(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(dev_count));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(dev_count), order.end());

  const Model model(mem);
  ModelParams params = initial;
  ModelParams best = initial;
  bool have_best = false;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(train_idx));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, train_idx.size() - start);
      const std::span<const std::size_t> batch(train_idx.data() + start, len);
      const Matrix grad = batch_gradient(model, params, dataset, batch, config.workers, &loss_sum);
      params.projection = sgd_step(params.projection, grad, config.learning_rate);
    }
    const double dev_acc = labeled_accuracy(model, params, dataset, dev, config.workers);
    report.epochs.push_back({epoch, loss_sum / static_cast<double>(train_idx.size()), dev_acc});

    if (!have_best || dev_acc > report.best_dev_acc) {
      have_best = true;
      report.best_dev_acc = dev_acc;
      report.best_epoch = epoch;
      best = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  report.params_digest = params_digest(best.projection);
  return {std::move(best), std::move(report)};
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares `analytic` with central differences of `loss` at `point`, over
/// every entry or, when the matrix has more than `max_entries` entries, a
/// seeded random subset of `max_entries` of them. Relative error is
/// |a - n| / max(1e-8, |a| + |n|).
inline GradcheckResult finite_difference_check(const std::function<double(const Matrix&)>& loss,
                                               const Matrix& point, const Matrix& analytic, double step,
                                               std::size_t max_entries = 256, std::uint64_t seed = 0) {
  if (!(step > 0.0)) throw Error("gradcheck: step must be positive");
  require_dims(point.rows() == analytic.rows() && point.cols() == analytic.cols(), "gradcheck: gradient shape");
  auto entries = all_indices(static_cast<std::size_t>(point.size()));
  if (entries.size() > max_entries) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(entries));
    entries.resize(max_entries);
    std::sort(entries.begin(), entries.end());
  }
  GradcheckResult result;
  Matrix probe = point;
  for (std::size_t e : entries) {
    const auto idx = static_cast<Eigen::Index>(e);
    const double original = probe(idx);
    probe(idx) = original + step;
    const double up = loss(probe);
    probe(idx) = original - step;
    const double down = loss(probe);
    probe(idx) = original;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic(idx);
    const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.entries_checked;
  }
  return result;
}

inline GradcheckResult gradcheck(const Model& model, const ModelParams& params, const Example& ex, double step,
                                 std::size_t max_entries = 256, std::uint64_t seed = 0) {
  const Matrix analytic = model.backward(params, ex);
  ModelParams probe = params;
  auto loss = [&](const Matrix& w) {
    probe.projection.matrix = w;
    return model.forward(probe, ex).first;
  };
  return finite_difference_check(loss, params.projection.matrix, analytic, step, max_entries, seed);
}

/// Max relative error between backward() and central differences.
inline double gradcheck(const ModelParams& params, const StaticWordMemory& mem, const QAItem& item,
                        const ClipFeatures& features, const std::optional<SubtitleMemory>& sub, double step) {
  const Example ex = prepare_example(mem, item, features, sub, params.config.normalize_sentences);
  return gradcheck(Model(mem), params, ex, step).max_relative_error;
}

}  // namespace lmn
