#pragma once

// Frame-level representations: regional CNN features are projected into the
// word space and re-expressed as cosine-weighted sums of word vectors, then
// summed over regions.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lmn/error.hpp"
#include "lmn/types.hpp"
#include "lmn/word_memory.hpp"

namespace lmn {

// T x C x H x W feature maps stored in (frame, channel, row, column) order.
// Region j of a frame is the C-vector at spatial cell j, row-major over H, W.
class ClipFeatures {
 public:
  ClipFeatures() = default;

  ClipFeatures(std::size_t frames, std::size_t channels, std::size_t height, std::size_t width)
      : ClipFeatures(frames, channels, height, width,
                     std::vector<double>(frames * channels * height * width, 0.0)) {}

  ClipFeatures(std::size_t frames, std::size_t channels, std::size_t height, std::size_t width,
               std::vector<double> data)
      : frames_(frames), channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (frames_ < 1 || channels_ < 1 || height_ < 1 || width_ < 1) {
      throw DimensionError("clip features: every extent must be >= 1");
    }
    if (data_.size() != frames_ * channels_ * height_ * width_) {
      throw DimensionError("clip features: payload size does not match T*C*H*W");
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw Error("clip features: non-finite entry");
    }
  }

  std::size_t frames() const noexcept { return frames_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t regions() const noexcept { return height_ * width_; }
  std::size_t frame_size() const noexcept { return channels_ * regions(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }

  // C x (H*W) view of one frame; column j is regional feature l_ij.
  Eigen::Map<const RowMajorMatrix> frame(std::size_t i) const {
    return {data_.data() + i * frame_size(), static_cast<Eigen::Index>(channels_),
            static_cast<Eigen::Index>(regions())};
  }
  Eigen::Map<RowMajorMatrix> frame(std::size_t i) {
    return {data_.data() + i * frame_size(), static_cast<Eigen::Index>(channels_),
            static_cast<Eigen::Index>(regions())};
  }

  Vector region(std::size_t i, std::size_t j) const {
    return frame(i).col(static_cast<Eigen::Index>(j));
  }

  void set_region(std::size_t i, std::size_t j, const Vector& value) {
    require_dims(value.size() == static_cast<Eigen::Index>(channels_), "set_region channels");
    frame(i).col(static_cast<Eigen::Index>(j)) = value;
  }

  friend bool operator==(const ClipFeatures&, const ClipFeatures&) = default;

 private:
  std::size_t frames_ = 0, channels_ = 0, height_ = 0, width_ = 0;
  std::vector<double> data_;
};

// W_l, the d x C projection from feature channels into the word space. The
// model's only learnable tensor.
struct ProjectionWeights {
  Matrix matrix;

  Eigen::Index word_dim() const noexcept { return matrix.rows(); }
  Eigen::Index channels() const noexcept { return matrix.cols(); }
};

// T x d, row i = v_i.
struct FrameRepresentations {
  Matrix matrix;

  Eigen::Index frames() const noexcept { return matrix.rows(); }
  Vector frame(Eigen::Index i) const { return matrix.row(i).transpose(); }
  Vector sum() const { return matrix.colwise().sum().transpose(); }
};

/// W_l * l (no bias, no nonlinearity).
inline Vector project_region(const Vector& region, const ProjectionWeights& weights) {
  require_dims(region.size() == weights.channels(), "project_region: feature channels vs W_l columns");
  return weights.matrix * region;
}

/// One attention pass over the word memory: alpha_k = cos(region, w_k) and
/// the result is sum_k alpha_k * w_k / ||w_k||. Raw cosine weights, no softmax.
inline Vector word_attend(const Vector& region, const StaticWordMemory& mem,
                          Vector* weights_out = nullptr) {
  require_dims(region.size() == mem.dim(), "word_attend: region vs embedding dimension");
  const Vector unit = unit_normalize(region);
  Vector out = Vector::Zero(mem.dim());
  if (weights_out) weights_out->resize(static_cast<Eigen::Index>(mem.size()));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(mem.size()); ++k) {
    const Vector word = unit_normalize(mem.matrix().row(k).transpose());
    const double alpha = unit.dot(word);
    if (weights_out) (*weights_out)(k) = alpha;
    out += alpha * word;
  }
  return out;
}

// Cached form of the word memory for repeated attention. Since
// sum_k (x.w_k) w_k = (W^T W) x for normalized rows, one hop is a d x d
// matrix product with the Gram matrix of the normalized memory.
class FrameEncoder {
 public:
  // Per-region intermediates needed to backpropagate through the hops.
  struct Trace {
    std::size_t regions_per_frame = 0;
    std::size_t hops = 0;
    // inputs[h] is d x (T*HW): the pre-normalization input of hop h, one
    // column per region in (frame, region) order.
    std::vector<Matrix> inputs;
  };

  explicit FrameEncoder(const StaticWordMemory& mem) : dim_(mem.dim()) {
    normalized_.resize(static_cast<Eigen::Index>(mem.size()), dim_);
    for (Eigen::Index k = 0; k < normalized_.rows(); ++k) {
      normalized_.row(k) = unit_normalize(mem.matrix().row(k).transpose()).transpose();
    }
    gram_ = normalized_.transpose() * normalized_;
  }

  Eigen::Index dim() const noexcept { return dim_; }
  const Matrix& gram() const noexcept { return gram_; }
  const Matrix& normalized_memory() const noexcept { return normalized_; }

  // Columnwise unit normalization (zero columns stay zero) followed by the
  // Gram product.
  Matrix attend_columns(const Matrix& columns) const {
    return gram_ * normalize_columns(columns);
  }

  FrameRepresentations encode(const ClipFeatures& clip, const ProjectionWeights& weights,
                              std::size_t hops, Trace* trace = nullptr) const {
    check(clip, weights, hops);
    const auto regions = static_cast<Eigen::Index>(clip.regions());
    const auto frames = static_cast<Eigen::Index>(clip.frames());
    Matrix current(dim_, frames * regions);
    for (Eigen::Index i = 0; i < frames; ++i) {
      current.middleCols(i * regions, regions).noalias() =
          weights.matrix * clip.frame(static_cast<std::size_t>(i));
    }
    if (trace) {
      trace->regions_per_frame = clip.regions();
      trace->hops = hops;
      trace->inputs.clear();
      trace->inputs.reserve(hops);
    }
    for (std::size_t h = 0; h < hops; ++h) {
      if (trace) trace->inputs.push_back(current);
      current = attend_columns(current);
    }
    FrameRepresentations out{Matrix::Zero(frames, dim_)};
    for (Eigen::Index i = 0; i < frames; ++i) {
      for (Eigen::Index j = 0; j < regions; ++j) out.matrix.row(i) += current.col(i * regions + j).transpose();
    }
    return out;
  }

  // Given dL/dv_i (T x d), returns dL/dW_l (d x C).
  Matrix backward(const ClipFeatures& clip, const Trace& trace, const Matrix& frame_grad) const {
    const auto regions = static_cast<Eigen::Index>(trace.regions_per_frame);
    const auto frames = static_cast<Eigen::Index>(clip.frames());
    Matrix grad(dim_, frames * regions);
    for (Eigen::Index i = 0; i < frames; ++i) {
      for (Eigen::Index j = 0; j < regions; ++j) grad.col(i * regions + j) = frame_grad.row(i).transpose();
    }
    for (std::size_t h = trace.hops; h-- > 0;) {
      const Matrix& input = trace.inputs[h];
      const Matrix upstream = gram_ * grad;  // Gram is symmetric
      for (Eigen::Index r = 0; r < input.cols(); ++r) {
        const double norm = input.col(r).norm();
        if (norm == 0.0) {
          grad.col(r).setZero();
          continue;
        }
        const Vector unit = input.col(r) / norm;
        grad.col(r) = (upstream.col(r) - unit * unit.dot(upstream.col(r))) / norm;
      }
    }
    Matrix weight_grad = Matrix::Zero(dim_, static_cast<Eigen::Index>(clip.channels()));
    for (Eigen::Index i = 0; i < frames; ++i) {
      weight_grad.noalias() +=
          grad.middleCols(i * regions, regions) * clip.frame(static_cast<std::size_t>(i)).transpose();
    }
    return weight_grad;
  }

  static Matrix normalize_columns(const Matrix& columns) {
    Matrix out(columns.rows(), columns.cols());
    for (Eigen::Index c = 0; c < columns.cols(); ++c) {
      const double norm = columns.col(c).norm();
      if (norm == 0.0) {
        out.col(c).setZero();
      } else {
        out.col(c) = columns.col(c) / norm;
      }
    }
    return out;
  }

 private:
  void check(const ClipFeatures& clip, const ProjectionWeights& weights, std::size_t hops) const {
    if (hops < 1) throw Error("encode_frames: hops must be >= 1");
    require_dims(weights.word_dim() == dim_, "encode_frames: W_l rows vs embedding dimension");
    require_dims(weights.channels() == static_cast<Eigen::Index>(clip.channels()),
                 "encode_frames: W_l columns vs feature channels");
  }

  Eigen::Index dim_;
  Matrix normalized_;
  Matrix gram_;
};

/// Projects every region, applies `hops` word-attention passes with the same
/// memory, and sums regions per frame.
inline FrameRepresentations encode_frames(const ClipFeatures& clip, const ProjectionWeights& weights,
                                          const StaticWordMemory& mem, std::size_t hops) {
  return FrameEncoder(mem).encode(clip, weights, hops);
}

}  // namespace lmn
