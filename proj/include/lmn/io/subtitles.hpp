#pragma once

// SubRip (.srt) subset and one-sentence-per-line plaintext subtitles.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lmn/error.hpp"
#include "lmn/io/files.hpp"

namespace lmn::io {

struct SubtitleEntry {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::string text;

  friend bool operator==(const SubtitleEntry&, const SubtitleEntry&) = default;
};

struct SubtitleFile {
  std::vector<SubtitleEntry> entries;

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.text);
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

// Reads exactly `width` digits (or at least one when width == 0).
inline bool read_digits(std::string_view s, std::size_t& pos, std::size_t width, std::int64_t& out) {
  const std::size_t start = pos;
  out = 0;
  while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9' && (width == 0 || pos - start < width)) {
    out = out * 10 + (s[pos] - '0');
    ++pos;
  }
  return width == 0 ? pos > start : pos - start == width;
}

// HH:MM:SS,mmm
inline bool read_timestamp(std::string_view s, std::size_t& pos, std::int64_t& ms) {
  std::int64_t h = 0, m = 0, sec = 0, milli = 0;
  if (!read_digits(s, pos, 0, h) || pos >= s.size() || s[pos++] != ':') return false;
  if (!read_digits(s, pos, 2, m) || pos >= s.size() || s[pos++] != ':') return false;
  if (!read_digits(s, pos, 2, sec) || pos >= s.size() || s[pos++] != ',') return false;
  if (!read_digits(s, pos, 3, milli)) return false;
  if (m > 59 || sec > 59) return false;
  ms = ((h * 60 + m) * 60 + sec) * 1000 + milli;
  return true;
}

inline bool parse_timing(std::string_view line, std::int64_t& start, std::int64_t& end) {
  line = trim(line);
  std::size_t pos = 0;
  if (!read_timestamp(line, pos, start)) return false;
  while (pos < line.size() && line[pos] == ' ') ++pos;
  if (line.substr(pos, 3) != "-->") return false;
  pos += 3;
  while (pos < line.size() && line[pos] == ' ') ++pos;
  if (!read_timestamp(line, pos, end)) return false;
  // Trailing position hints ("X1:... Y1:...") are tolerated.
  return pos == line.size() || line[pos] == ' ';
}

inline std::string strip_tags(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == '<') {
      const std::size_t close = text.find('>', pos);
      if (close != std::string_view::npos) {
        pos = close + 1;
        continue;
      }
    }
    out.push_back(text[pos++]);
  }
  return out;
}

inline std::string format_timestamp(std::int64_t ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld,%03lld", static_cast<long long>(ms / 3600000),
                static_cast<long long>(ms / 60000 % 60), static_cast<long long>(ms / 1000 % 60),
                static_cast<long long>(ms % 1000));
  return buf;
}

}  // namespace detail

/// Parses SubRip text. Blocks are separated by blank lines; each holds an
/// index line, a "HH:MM:SS,mmm --> HH:MM:SS,mmm" line and one or more text
/// lines, which are joined with single spaces after angle-bracket tags are
/// removed.
inline SubtitleFile parse_srt_text(std::string_view text, const std::string& source = "<srt>") {
  const auto lines = detail::split_lines(text);
  SubtitleFile file;
  std::size_t block_no = 0;
  std::size_t k = 0;
  while (k < lines.size()) {
    if (detail::trim(lines[k]).empty()) {
      ++k;
      continue;
    }
    ++block_no;
    const std::size_t block_line = k + 1;
    std::size_t end = k;
    while (end < lines.size() && !detail::trim(lines[end]).empty()) ++end;

    std::size_t cursor = k;
    // The index line may be missing; a timing line is recognised by "-->".
    if (lines[cursor].find("-->") == std::string_view::npos) ++cursor;
    if (cursor >= end) {
      throw FormatError(source, block_line, "block " + std::to_string(block_no) + ": missing timestamp line");
    }
    SubtitleEntry entry;
    if (!detail::parse_timing(lines[cursor], entry.start_ms, entry.end_ms)) {
      throw FormatError(source, cursor + 1,
                        "block " + std::to_string(block_no) + ": malformed timestamp line '" +
                            std::string(detail::trim(lines[cursor])) + "'");
    }
    if (entry.start_ms > entry.end_ms) {
      throw FormatError(source, cursor + 1, "block " + std::to_string(block_no) + ": start time after end time");
    }
    ++cursor;
    if (cursor >= end) {
      throw FormatError(source, block_line, "block " + std::to_string(block_no) + ": no text lines");
    }
    for (; cursor < end; ++cursor) {
      const std::string part = detail::strip_tags(detail::trim(lines[cursor]));
      const auto trimmed = detail::trim(part);
      if (trimmed.empty()) continue;
      if (!entry.text.empty()) entry.text.push_back(' ');
      entry.text.append(trimmed);
    }
    file.entries.push_back(std::move(entry));
    k = end;
  }
  if (file.entries.empty()) throw FormatError(source, 0, "empty subtitle file");
  return file;
}

inline SubtitleFile parse_srt(const std::filesystem::path& path) {
  return parse_srt_text(read_file(path), path.string());
}

/// Emits entries in SubRip form, numbered from 1.
inline std::string to_srt_text(const SubtitleFile& file) {
  std::string out;
  for (std::size_t k = 0; k < file.entries.size(); ++k) {
    const auto& e = file.entries[k];
    out += std::to_string(k + 1) + "\n" + detail::format_timestamp(e.start_ms) + " --> " +
           detail::format_timestamp(e.end_ms) + "\n" + e.text + "\n\n";
  }
  return out;
}

/// One sentence per nonempty line; timestamps are zero.
inline SubtitleFile parse_plaintext_subtitles(std::string_view text, const std::string& source = "<text>") {
  SubtitleFile file;
  for (auto line : detail::split_lines(text)) {
    line = detail::trim(line);
    if (!line.empty()) file.entries.push_back({0, 0, std::string(line)});
  }
  if (file.entries.empty()) throw FormatError(source, 0, "empty subtitle file");
  return file;
}

inline SubtitleFile load_plaintext_subtitles(const std::filesystem::path& path) {
  return parse_plaintext_subtitles(read_file(path), path.string());
}

}  // namespace lmn::io
