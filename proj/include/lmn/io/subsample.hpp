#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lmn/error.hpp"
#include "lmn/frame_encoder.hpp"

namespace lmn::io {

/// Equally spaced frame indices floor(k * M / target), k = 0..target-1.
/// When M < target, indices repeat.
inline std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t target) {
  if (total < 1 || target < 1) throw Error("subsample: frame counts must be >= 1");
  std::vector<std::size_t> idx(target);
  for (std::size_t k = 0; k < target; ++k) idx[k] = k * total / target;
  return idx;
}

/// Concatenates the clips' frames in order and keeps `target` equally spaced
/// frames.
inline ClipFeatures subsample_frames(std::span<const ClipFeatures> clips, std::size_t target) {
  if (clips.empty()) throw Error("subsample: no clips");
  const auto& first = clips.front();
  std::size_t total = 0;
  for (const auto& c : clips) {
    if (c.channels() != first.channels() || c.height() != first.height() || c.width() != first.width()) {
      throw DimensionError("subsample: clips disagree on C x H x W");
    }
    total += c.frames();
  }
  const std::size_t frame_size = first.frame_size();
  std::vector<double> data;
  data.reserve(target * frame_size);
  for (std::size_t global : subsample_indices(total, target)) {
    std::size_t local = global;
    std::size_t c = 0;
    while (local >= clips[c].frames()) local -= clips[c++].frames();
    const auto src = clips[c].data().subspan(local * frame_size, frame_size);
    data.insert(data.end(), src.begin(), src.end());
  }
  return ClipFeatures(target, first.channels(), first.height(), first.width(), std::move(data));
}

}  // namespace lmn::io
