#pragma once

// Assembles model-ready examples from QA items plus feature and subtitle
// sources, either on disk or in memory.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lmn/error.hpp"
#include "lmn/io/binary.hpp"
#include "lmn/io/subsample.hpp"
#include "lmn/io/subtitles.hpp"
#include "lmn/io/synthetic.hpp"
#include "lmn/model.hpp"

namespace lmn::io {

/// <dir>/<movie_id>.srt, else <dir>/<movie_id>.txt (one sentence per line).
inline SubtitleFile load_movie_subtitles(const std::filesystem::path& dir, const std::string& movie_id) {
  const auto srt = dir / (movie_id + ".srt");
  if (std::filesystem::exists(srt)) return parse_srt(srt);
  const auto txt = dir / (movie_id + ".txt");
  if (std::filesystem::exists(txt)) return load_plaintext_subtitles(txt);
  throw Error("no subtitles for movie '" + movie_id + "' in " + dir.string());
}

struct DiskSource {
  std::filesystem::path features_dir;
  std::optional<std::filesystem::path> subtitles_dir;  // absent: video-only
  std::size_t frames = 32;
};

inline std::vector<Example> load_examples(const StaticWordMemory& mem, const std::vector<QAItem>& items,
                                          const DiskSource& source, bool normalize_sentences) {
  std::map<std::string, SubtitleMemory> movies;
  std::vector<Example> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    std::vector<ClipFeatures> clips;
    for (const auto& id : item.clip_ids) clips.push_back(load_features(source.features_dir / (id + ".lmnf")));
    ClipFeatures features = subsample_frames(clips, source.frames);

    std::optional<SubtitleMemory> subs;
    if (source.subtitles_dir) {
      auto it = movies.find(item.movie_id);
      if (it == movies.end()) {
        const auto file = load_movie_subtitles(*source.subtitles_dir, item.movie_id);
        it = movies.emplace(item.movie_id, build_memory(file.texts(), mem, normalize_sentences, item.movie_id)).first;
      }
      subs = it->second;
    }
    out.push_back(prepare_example(mem, item, std::move(features), std::move(subs), normalize_sentences));
  }
  return out;
}

/// Examples straight from a generated corpus, without touching disk.
inline std::vector<Example> synthetic_examples(const SyntheticDataset& data, const std::vector<QAItem>& items,
                                               bool with_subtitles, bool normalize_sentences) {
  std::vector<Example> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    std::vector<ClipFeatures> clips;
    for (const auto& id : item.clip_ids) clips.push_back(data.features.at(id));
    std::size_t frames = 0;
    for (const auto& c : clips) frames += c.frames();
    std::optional<SubtitleMemory> subs;
    if (with_subtitles) {
      subs = build_memory(data.subtitles.at(item.movie_id).texts(), data.memory, normalize_sentences, item.movie_id);
    }
    out.push_back(
        prepare_example(data.memory, item, subsample_frames(clips, frames), std::move(subs), normalize_sentences));
  }
  return out;
}

}  // namespace lmn::io
