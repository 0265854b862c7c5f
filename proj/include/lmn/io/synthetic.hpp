#pragma once

// Planted-signal synthetic corpus. Each question's correct answer is written
// into half of its regional features through a hidden linear map M (word
// space -> feature channels) and into exactly one of its subtitles. A model
// can only beat chance by learning W_l to undo M.

#include <cmath>
#include <cstdio>
#include <span>
#include <sstream>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lmn/answering.hpp"
#include "lmn/error.hpp"
#include "lmn/frame_encoder.hpp"
#include "lmn/io/binary.hpp"
#include "lmn/io/files.hpp"
#include "lmn/io/qa_jsonl.hpp"
#include "lmn/io/subtitles.hpp"
#include "lmn/random.hpp"
#include "lmn/word_memory.hpp"

namespace lmn::io {

struct SyntheticSpec {
  std::size_t vocab_size = 50;
  std::size_t dim = 16;
  std::size_t channels = 24;
  std::size_t frames = 4;
  std::size_t height = 3;
  std::size_t width = 3;
  std::size_t n_subtitles = 5;
  std::size_t n_train = 500;
  std::size_t n_eval = 200;
  double noise_sigma = 0.05;
  // Ratio of the largest to the smallest singular value of M.
  double condition = 4.0;
  std::uint64_t seed = 1;

  // Words used by one item: 2 per answer, 2 for the question, 2 per
  // distractor subtitle.
  std::size_t words_per_item() const { return 2 * kNumAnswers + 2 + 2 * (n_subtitles - 1); }

  void validate() const {
    if (dim < 1 || channels < 1 || frames < 1 || height < 1 || width < 1 || n_subtitles < 1 || n_train < 1 ||
        n_eval < 1) {
      throw Error("synthetic spec: every size must be positive");
    }
    if (channels < dim) throw Error("synthetic spec: channels must be >= dim for a full-rank hidden map");
    if (vocab_size < words_per_item()) {
      throw Error("synthetic spec: vocab_size must be >= " + std::to_string(words_per_item()));
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("synthetic spec: noise_sigma must be >= 0");
    if (!(condition >= 1.0 && condition <= 100.0)) throw Error("synthetic spec: condition must lie in [1, 100]");
  }
};

struct SyntheticDataset {
  StaticWordMemory memory;
  std::vector<QAItem> train;
  std::vector<QAItem> eval;
  std::map<std::string, ClipFeatures> features;   // by clip id
  std::map<std::string, SubtitleFile> subtitles;  // by movie id
  std::map<std::string, std::size_t> planted_subtitle;  // by movie id
  Matrix hidden_map;  // C x d
};

namespace detail {

inline Vector gaussian_vector(Rng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = rng.normal();
  return v;
}

inline Vector random_unit(Rng& rng, Eigen::Index n) {
  Vector v = gaussian_vector(rng, n);
  while (v.norm() == 0.0) v = gaussian_vector(rng, n);
  return v / v.norm();
}

inline Matrix orthonormal_columns(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix g(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) g.col(c) = gaussian_vector(rng, rows);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

// U diag(s) V^T with log-spaced singular values in [1, condition].
inline Matrix hidden_map(Rng& rng, Eigen::Index channels, Eigen::Index dim, double condition) {
  const Matrix u = orthonormal_columns(rng, channels, dim);
  const Matrix v = orthonormal_columns(rng, dim, dim);
  Vector s(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double frac = dim == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(dim - 1);
    s(k) = std::pow(condition, frac);
  }
  return u * s.asDiagonal() * v.transpose();
}

inline std::vector<std::string> random_words(Rng& rng, std::size_t count) {
  std::vector<std::string> words;
  std::map<std::string, bool> seen;
  while (words.size() < count) {
    std::string w;
    for (int k = 0; k < 6; ++k) w.push_back(static_cast<char>('a' + rng.below(26)));
    if (seen.emplace(w, true).second) words.push_back(std::move(w));
  }
  return words;
}

inline std::string id_with_number(const std::string& prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", n);
  return prefix + buf;
}

}  // namespace detail

/// Deterministic in `spec` (including the seed). Feature values are rounded to
/// 32-bit floats so the in-memory corpus equals what LMNF files hold.
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto c = static_cast<Eigen::Index>(spec.channels);

  auto vocab = detail::random_words(rng, spec.vocab_size);
  Matrix embeddings(static_cast<Eigen::Index>(spec.vocab_size), d);
  for (Eigen::Index k = 0; k < embeddings.rows(); ++k) embeddings.row(k) = detail::random_unit(rng, d).transpose();
  StaticWordMemory memory(vocab, embeddings);

  SyntheticDataset out{std::move(memory), {}, {}, {}, {}, {}, detail::hidden_map(rng, c, d, spec.condition)};
  const std::size_t regions = spec.height * spec.width;
  const std::size_t total_regions = spec.frames * regions;

  auto make_items = [&](const std::string& split, std::size_t count, std::vector<QAItem>& items) {
    for (std::size_t n = 1; n <= count; ++n) {
      QAItem item;
      item.qid = detail::id_with_number(split + "-q", n);
      item.movie_id = detail::id_with_number(split + "-m", n);
      item.clip_ids = {detail::id_with_number(split + "-c", n)};
      const int correct = static_cast<int>(rng.below(kNumAnswers));
      item.correct_index = correct;

      std::vector<std::size_t> perm(spec.vocab_size);
      for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
      rng.shuffle(std::span<std::size_t>(perm));
      auto pair_text = [&](std::size_t first) { return vocab[perm[first]] + " " + vocab[perm[first + 1]]; };

      for (int h = 0; h < kNumAnswers; ++h) item.answers[static_cast<std::size_t>(h)] = pair_text(2 * h);
      item.question = pair_text(2 * kNumAnswers);

      const std::size_t planted = rng.below(spec.n_subtitles);
      SubtitleFile subs;
      std::size_t distractor = 2 * kNumAnswers + 2;
      for (std::size_t s = 0; s < spec.n_subtitles; ++s) {
        std::string text;
        if (s == planted) {
          text = item.answers[static_cast<std::size_t>(correct)];
        } else {
          text = pair_text(distractor);
          distractor += 2;
        }
        const auto start = static_cast<std::int64_t>(s) * 2000;
        subs.entries.push_back({start, start + 1500, std::move(text)});
      }

      const Vector target =
          embed_sentence(out.memory, item.answers[static_cast<std::size_t>(correct)], true).vector;
      std::vector<std::size_t> order(total_regions);
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      rng.shuffle(std::span<std::size_t>(order));
      std::vector<bool> is_planted(total_regions, false);
      for (std::size_t k = 0; k < total_regions / 2; ++k) is_planted[order[k]] = true;

      ClipFeatures clip(spec.frames, spec.channels, spec.height, spec.width);
      for (std::size_t r = 0; r < total_regions; ++r) {
        const Vector source = is_planted[r] ? target : detail::random_unit(rng, d);
        Vector value = out.hidden_map * source;
        if (spec.noise_sigma > 0.0) value += spec.noise_sigma * detail::gaussian_vector(rng, c);
        for (Eigen::Index k = 0; k < value.size(); ++k) value(k) = static_cast<double>(static_cast<float>(value(k)));
        clip.set_region(r / regions, r % regions, value);
      }

      out.features.emplace(item.clip_ids.front(), std::move(clip));
      out.subtitles.emplace(item.movie_id, std::move(subs));
      out.planted_subtitle.emplace(item.movie_id, planted);
      items.push_back(std::move(item));
    }
  };
  make_items("train", spec.n_train, out.train);
  make_items("eval", spec.n_eval, out.eval);
  return out;
}

/// Writes embeddings.txt, train.jsonl, eval.jsonl, features/<clip>.lmnf,
/// subtitles/<movie>.srt and manifest.json (paths relative to `dir`).
inline void write_synthetic(const SyntheticDataset& data, const SyntheticSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "features");
  std::filesystem::create_directories(dir / "subtitles");
  std::ostringstream emb;
  write_word2vec_text(data.memory, emb);
  write_file_atomic(dir / "embeddings.txt", emb.str());
  write_file_atomic(dir / "train.jsonl", to_jsonl(data.train));
  write_file_atomic(dir / "eval.jsonl", to_jsonl(data.eval));
  for (const auto& [id, clip] : data.features) save_features(clip, dir / "features" / (id + ".lmnf"));
  for (const auto& [id, subs] : data.subtitles) write_file_atomic(dir / "subtitles" / (id + ".srt"), to_srt_text(subs));
  const nlohmann::json manifest = {{"embeddings", "embeddings.txt"}, {"qa", "train.jsonl"},
                                   {"eval_qa", "eval.jsonl"},        {"features_dir", "features"},
                                   {"subtitles_dir", "subtitles"},   {"frames", spec.frames}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace lmn::io
