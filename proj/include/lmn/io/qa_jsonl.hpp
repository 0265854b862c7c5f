#pragma once

// QA datasets: one JSON object per line,
//   {"qid", "question", "answers": [5 strings], "movie_id", "clip_ids": [...],
//    "correct_index"?: 0..4}

#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "lmn/answering.hpp"
#include "lmn/error.hpp"
#include "lmn/io/files.hpp"

namespace lmn::io {

namespace detail {

inline std::string require_string(const nlohmann::json& obj, const char* key, const std::string& source,
                                  std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(source, line, std::string("missing field \"") + key + "\"");
  if (!it->is_string()) throw FormatError(source, line, std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace detail

inline QAItem parse_qa_item(std::string_view line, const std::string& source = "<qa>", std::size_t line_no = 0) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(source, line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw FormatError(source, line_no, "expected a JSON object");

  QAItem item;
  item.qid = detail::require_string(obj, "qid", source, line_no);
  item.question = detail::require_string(obj, "question", source, line_no);
  item.movie_id = detail::require_string(obj, "movie_id", source, line_no);

  auto answers = obj.find("answers");
  if (answers == obj.end() || !answers->is_array()) throw FormatError(source, line_no, "missing answers array");
  if (answers->size() != kNumAnswers) {
    throw FormatError(source, line_no, "expected 5 answers, got " + std::to_string(answers->size()));
  }
  for (std::size_t h = 0; h < kNumAnswers; ++h) {
    if (!(*answers)[h].is_string()) throw FormatError(source, line_no, "answers must be strings");
    item.answers[h] = (*answers)[h].get<std::string>();
  }

  auto clips = obj.find("clip_ids");
  if (clips == obj.end() || !clips->is_array()) throw FormatError(source, line_no, "missing clip_ids array");
  if (clips->empty()) throw FormatError(source, line_no, "expected at least 1 clip id");
  for (const auto& c : *clips) {
    if (!c.is_string()) throw FormatError(source, line_no, "clip_ids must be strings");
    item.clip_ids.push_back(c.get<std::string>());
  }

  if (auto ci = obj.find("correct_index"); ci != obj.end() && !ci->is_null()) {
    if (!ci->is_number_integer()) throw FormatError(source, line_no, "correct_index must be an integer");
    const auto v = ci->get<long long>();
    if (v < 0 || v >= kNumAnswers) {
      throw FormatError(source, line_no, "correct_index " + std::to_string(v) + " out of range 0..4");
    }
    item.correct_index = static_cast<int>(v);
  }
  return item;
}

inline std::vector<QAItem> parse_qa_jsonl(std::string_view text, const std::string& source = "<qa>") {
  std::vector<QAItem> items;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    items.push_back(parse_qa_item(line, source, line_no));
  }
  return items;
}

inline std::vector<QAItem> load_qa_jsonl(const std::filesystem::path& path) {
  return parse_qa_jsonl(read_file(path), path.string());
}

inline nlohmann::json to_json(const QAItem& item) {
  nlohmann::json obj = {{"qid", item.qid},
                        {"question", item.question},
                        {"answers", item.answers},
                        {"movie_id", item.movie_id},
                        {"clip_ids", item.clip_ids}};
  if (item.correct_index) obj["correct_index"] = *item.correct_index;
  return obj;
}

inline std::string to_jsonl(const std::vector<QAItem>& items) {
  std::string out;
  for (const auto& item : items) out += to_json(item).dump() + "\n";
  return out;
}

}  // namespace lmn::io
