#pragma once

// Seeded random instances expressed both as library values and as the loop
// reference's plain vectors.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "lmn/lmn.hpp"
#include "reference/loop_reference.hpp"

namespace lmn::testing {

struct Shape {
  std::size_t vocab = 5;
  std::size_t dim = 4;
  std::size_t frames = 2;
  std::size_t height = 1;
  std::size_t width = 2;
  std::size_t channels = 3;
  std::size_t subtitles = 3;  // 0 = video-only
  ModelConfig config{};
};

struct Instance {
  ref::Instance reference;
  StaticWordMemory memory;
  ModelParams params;
  Example example;
};

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double x : values) v(k++) = x;
  return v;
}

inline ref::Vec random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  ref::Vec v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Vector to_vector(const ref::Vec& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline ref::Vec to_ref(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Matrix to_matrix(const ref::Mat& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

inline ref::Mat to_ref(const Matrix& m) {
  ref::Mat rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows[static_cast<std::size_t>(r)] = to_ref(Vector(m.row(r).transpose()));
  return rows;
}

inline ClipFeatures to_clip(const std::vector<ref::Mat>& regions, std::size_t height, std::size_t width) {
  const std::size_t t = regions.size(), c = regions.front().front().size(), hw = height * width;
  std::vector<double> data(t * c * hw);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < hw; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) data[(i * c + ch) * hw + j] = regions[i][j][ch];
  return ClipFeatures(t, c, height, width, std::move(data));
}

inline std::vector<std::string> word_list(std::size_t n) {
  std::vector<std::string> words;
  for (std::size_t k = 0; k < n; ++k) words.push_back("w" + std::to_string(k));
  return words;
}

inline Instance make_instance(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  ref::Instance r;
  for (std::size_t k = 0; k < shape.vocab; ++k) r.words.push_back(random_vec(rng, shape.dim));
  for (std::size_t k = 0; k < shape.dim; ++k) r.weights.push_back(random_vec(rng, shape.channels));
  for (std::size_t i = 0; i < shape.frames; ++i) {
    ref::Mat frame;
    for (std::size_t j = 0; j < shape.height * shape.width; ++j) frame.push_back(random_vec(rng, shape.channels));
    r.regions.push_back(frame);
  }
  if (shape.subtitles > 0) {
    ref::Mat subs;
    for (std::size_t n = 0; n < shape.subtitles; ++n) subs.push_back(ref::unit(random_vec(rng, shape.dim)));
    r.subs = subs;
  }
  r.question = ref::unit(random_vec(rng, shape.dim));
  for (int h = 0; h < kNumAnswers; ++h) r.answers.push_back(ref::unit(random_vec(rng, shape.dim)));
  r.label = static_cast<int>(rng.below(kNumAnswers));
  r.swm_hops = shape.config.swm_hops;
  r.um_hops = shape.config.um_hops;
  r.qg = shape.config.question_guided;
  r.carry = shape.config.carry_frames;
  r.average = shape.config.average_clip;

  StaticWordMemory memory(word_list(shape.vocab), to_matrix(r.words));
  ModelParams params{ProjectionWeights{to_matrix(r.weights)}, shape.config};
  Example ex;
  ex.qid = "q" + std::to_string(seed);
  ex.features = to_clip(r.regions, shape.height, shape.width);
  if (r.subs) ex.subtitles = SubtitleMemory{to_matrix(*r.subs), std::vector<std::string>(r.subs->size()), "m"};
  ex.question = to_vector(r.question);
  ex.answers = to_matrix(r.answers);
  ex.label = r.label;
  return {std::move(r), std::move(memory), std::move(params), std::move(ex)};
}

inline double max_abs_diff(const ref::Vec& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b(static_cast<Eigen::Index>(k))));
  return m;
}

// Sweep over small random instances.
//
// An instance is redrawn when
//   - an update gate input v.s_n of a live (nonzero) memory row is within 1e-6
//     of the ReLU kink,
//   - some logit exceeds 1e4 in magnitude (absolute 1e-10 agreement is then
//     below double resolution), or
//   - every gradient entry is below 1e-3 (the loss is flat or saturated and
//     a 1e-5 central difference cannot resolve 1e-4 relative error).

enum class Verdict { kAccepted, kNearKink, kLargeLogits, kFlat };

inline Verdict classify(const Model& model, const Instance& in) {
  Model::Pass pass;
  model.infer(in.params, in.example, &pass);
  const auto& stages = pass.clip_trace.stages;
  if (in.example.subtitles) {
    for (std::size_t s = 1; s < stages.size(); ++s) {
      if (stages[s].transition != ClipTrace::Transition::kUpdate) continue;
      const Matrix& before = stages[s - 1].memory;
      for (Eigen::Index n = 0; n < before.rows(); ++n) {
        if (before.row(n).norm() > 0.0 && std::abs(stages[s].transition_input(n)) < 1e-6) return Verdict::kNearKink;
      }
    }
  }
  if (pass.dist.logits.cwiseAbs().maxCoeff() > 1e4) return Verdict::kLargeLogits;
  if (model.backward(in.params, in.example).cwiseAbs().maxCoeff() < 1e-3) return Verdict::kFlat;
  return Verdict::kAccepted;
}

struct SweepConfig {
  ModelConfig config;
  bool video_only = false;
};

// swm_hops x um_hops x qg with subtitles, swm_hops alone video-only, plus the
// carried-frame variant of every multi-hop subtitle setting.
inline std::vector<SweepConfig> sweep_configs() {
  std::vector<SweepConfig> out;
  for (std::size_t swm = 1; swm <= 3; ++swm) {
    for (std::size_t um = 1; um <= 3; ++um) {
      for (bool qg : {false, true}) {
        ModelConfig c;
        c.swm_hops = swm;
        c.um_hops = um;
        c.question_guided = qg;
        out.push_back({c, false});
      }
    }
    ModelConfig v;
    v.swm_hops = swm;
    out.push_back({v, true});
  }
  for (std::size_t um = 2; um <= 3; ++um) {
    for (bool qg : {false, true}) {
      ModelConfig c;
      c.um_hops = um;
      c.question_guided = qg;
      c.carry_frames = true;
      out.push_back({c, false});
    }
  }
  ModelConfig avg;
  avg.um_hops = 2;
  avg.average_clip = true;
  out.push_back({avg, false});
  return out;
}

// |V| <= 10, d <= 6, T <= 4, H*W <= 6, C <= 8, N <= 6.
inline Shape random_shape(Rng& rng, const SweepConfig& sc) {
  Shape s;
  s.vocab = 2 + rng.below(9);
  s.dim = 2 + rng.below(5);
  s.frames = 1 + rng.below(4);
  s.height = 1 + rng.below(2);
  s.width = 1 + rng.below(3);
  s.channels = 1 + rng.below(8);
  s.subtitles = sc.video_only ? 0 : 1 + rng.below(6);
  s.config = sc.config;
  return s;
}

struct SweepDraw {
  Shape shape;
  std::uint64_t seed = 0;
  std::size_t near_kink = 0;
  std::size_t large_logits = 0;
  std::size_t flat = 0;
};

// First accepted instance of the seed sequence base, base + 1, ...
inline SweepDraw draw_conditioned(const SweepConfig& sc, std::uint64_t base) {
  SweepDraw draw;
  for (std::uint64_t seed = base;; ++seed) {
    Rng rng(seed ^ 0x5bd1e995ULL);
    const Shape shape = random_shape(rng, sc);
    const Instance in = make_instance(shape, seed);
    const Model model(in.memory);
    switch (classify(model, in)) {
      case Verdict::kAccepted:
        draw.shape = shape;
        draw.seed = seed;
        return draw;
      case Verdict::kNearKink: ++draw.near_kink; break;
      case Verdict::kLargeLogits: ++draw.large_logits; break;
      case Verdict::kFlat: ++draw.flat; break;
    }
  }
}

}  // namespace lmn::testing
