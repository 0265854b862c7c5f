// lmn: train, evaluate and inspect the layered memory network.
//
//   lmn synth --out data/
//   lmn train --manifest data/manifest.json --out run/
//   lmn eval --manifest data/manifest.json --params run/params.lmnp
//
// Errors go to stderr as a single "error: ..." line with exit status 1.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lmn/lmn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Inputs {
  std::string manifest;
  std::string embeddings;
  std::string qa;
  std::string features_dir;
  std::string subtitles_dir;
  std::size_t frames = 32;
  bool video_only = false;

  CLI::Option* qa_opt = nullptr;
  CLI::Option* frames_opt = nullptr;
};

struct ModelFlags {
  std::size_t swm_hops = 1;
  std::size_t um_hops = 1;
  bool qg = false;
  bool normalize_sentences = true;
  bool average_clip = false;
  bool carry_frames = false;
  std::string preset;

  lmn::ModelConfig config() const {
    lmn::ModelConfig c;
    c.swm_hops = swm_hops;
    c.um_hops = um_hops;
    c.question_guided = qg;
    c.normalize_sentences = normalize_sentences;
    c.average_clip = average_clip;
    c.carry_frames = carry_frames;
    if (preset == "best") {
      c.um_hops = 2;
      c.question_guided = true;
    }
    c.validate();
    return c;
  }
};

void add_inputs(CLI::App& cmd, Inputs& in) {
  cmd.add_option("--manifest", in.manifest, "JSON file naming the inputs (paths relative to it)");
  cmd.add_option("--embeddings", in.embeddings, "word2vec text file");
  in.qa_opt = cmd.add_option("--qa", in.qa, "QA JSONL file");
  cmd.add_option("--features-dir", in.features_dir, "directory of <clip_id>.lmnf files");
  cmd.add_option("--subtitles-dir", in.subtitles_dir, "directory of <movie_id>.srt or .txt files");
  in.frames_opt = cmd.add_option("--frames", in.frames, "frames sampled per question")->check(CLI::PositiveNumber);
  cmd.add_flag("--video-only", in.video_only, "ignore subtitles");
}

void add_model_flags(CLI::App& cmd, ModelFlags& m) {
  cmd.add_option("--swm-hops", m.swm_hops, "word memory hops")->check(CLI::PositiveNumber);
  cmd.add_option("--um-hops", m.um_hops, "subtitle memory passes")->check(CLI::PositiveNumber);
  cmd.add_flag("--qg,!--no-qg", m.qg, "question-guided subtitle weighting");
  cmd.add_flag("--normalize-sentences,!--no-normalize-sentences", m.normalize_sentences,
               "unit-normalize sentence embeddings");
  cmd.add_flag("--average-clip", m.average_clip, "divide the clip vector by the frame count");
  cmd.add_flag("--um-carry-frames", m.carry_frames, "update hops reuse the previous hop's frames");
  cmd.add_option("--preset", m.preset, "named configuration")->check(CLI::IsMember({"best"}));
}

// Fills unset inputs from the manifest. `qa_key` picks the QA entry.
void resolve(Inputs& in, const std::string& qa_key) {
  if (!in.manifest.empty()) {
    const fs::path path(in.manifest);
    const json m = json::parse(lmn::io::read_file(path), nullptr, false);
    if (m.is_discarded() || !m.is_object()) throw lmn::Error("malformed manifest: " + path.string());
    const fs::path base = path.parent_path();
    auto take = [&](std::string& field, const char* key) {
      if (!field.empty() || !m.contains(key)) return;
      if (!m[key].is_string()) throw lmn::Error(std::string("manifest field \"") + key + "\" must be a string");
      field = (base / m[key].get<std::string>()).string();
    };
    take(in.embeddings, "embeddings");
    if (in.qa_opt->count() == 0) {
      take(in.qa, m.contains(qa_key) ? qa_key.c_str() : "qa");
    }
    take(in.features_dir, "features_dir");
    take(in.subtitles_dir, "subtitles_dir");
    if (in.frames_opt->count() == 0 && m.contains("frames")) in.frames = m["frames"].get<std::size_t>();
  }
  if (in.embeddings.empty()) throw lmn::Error("no embeddings file given (--embeddings or manifest)");
  if (in.qa.empty()) throw lmn::Error("no QA file given (--qa or manifest)");
  if (in.features_dir.empty()) throw lmn::Error("no features directory given (--features-dir or manifest)");
}

struct Loaded {
  lmn::StaticWordMemory memory;
  std::vector<lmn::QAItem> items;
  std::vector<lmn::Example> examples;
};

Loaded load(Inputs& in, const std::string& qa_key, bool normalize) {
  resolve(in, qa_key);
  auto memory = lmn::load_word2vec_text(in.embeddings);
  auto items = lmn::io::load_qa_jsonl(in.qa);
  if (items.empty()) throw lmn::Error("empty dataset: " + in.qa);
  lmn::io::DiskSource source{in.features_dir, std::nullopt, in.frames};
  if (!in.video_only && !in.subtitles_dir.empty()) source.subtitles_dir = fs::path(in.subtitles_dir);
  auto examples = lmn::io::load_examples(memory, items, source, normalize);
  return {std::move(memory), std::move(items), std::move(examples)};
}

lmn::ModelParams load_model(const std::string& path, const ModelFlags& flags, const Loaded& data) {
  lmn::ModelParams params{lmn::io::load_params(path), flags.config()};
  const auto channels = static_cast<Eigen::Index>(data.examples.front().features.channels());
  if (params.projection.word_dim() != data.memory.dim() || params.projection.channels() != channels) {
    throw lmn::DimensionError("params " + path + " are " + std::to_string(params.projection.word_dim()) + "x" +
                              std::to_string(params.projection.channels()) + " but the data needs " +
                              std::to_string(data.memory.dim()) + "x" + std::to_string(channels));
  }
  return params;
}

std::size_t find_item(const Loaded& data, const std::string& qid) {
  for (std::size_t k = 0; k < data.items.size(); ++k)
    if (data.items[k].qid == qid) return k;
  throw lmn::Error("unknown qid '" + qid + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Inputs in;
  ModelFlags model;
  lmn::TrainConfig train;
  std::string out = ".";
};

int cmd_train(TrainArgs& a) {
  const auto data = load(a.in, "qa", a.model.normalize_sentences);
  a.train.workers = lmn::worker_count();
  const auto channels = static_cast<Eigen::Index>(data.examples.front().features.channels());
  const lmn::ModelParams init{lmn::init_projection(data.memory.dim(), channels, a.train.seed), a.model.config()};
  const auto [params, report] = lmn::train(data.examples, data.memory, a.train, init);
  const fs::path out(a.out);
  lmn::io::save_params(params.projection, out / "params.lmnp");
  lmn::io::write_file_atomic(out / "report.json", lmn::to_json(report).dump(2) + "\n");
  std::cout << "best_epoch " << report.best_epoch << " best_dev_acc " << format_double(report.best_dev_acc)
            << " epochs " << report.epochs.size() << " params " << report.params_digest << "\n";
  return 0;
}

struct EvalArgs {
  Inputs in;
  ModelFlags model;
  std::string params;
  std::string out;
};

int cmd_eval(EvalArgs& a) {
  const auto data = load(a.in, "eval_qa", a.model.normalize_sentences);
  const auto params = load_model(a.params, a.model, data);
  const lmn::Model model(data.memory);
  const auto idx = lmn::all_indices(data.examples.size());
  const auto dists = lmn::infer_all(model, params, data.examples, idx, lmn::worker_count());
  std::vector<int> predictions, labels;
  json per = json::array();
  for (std::size_t k = 0; k < dists.size(); ++k) {
    const auto& item = data.items[k];
    if (!item.correct_index) throw lmn::Error("item '" + item.qid + "' has no correct_index");
    const int p = lmn::predict(dists[k]);
    predictions.push_back(p);
    labels.push_back(*item.correct_index);
    per.push_back({{"qid", item.qid},
                   {"predicted", p},
                   {"probability", dists[k].probs(p)},
                   {"correct_index", *item.correct_index}});
  }
  const json result = {{"accuracy", lmn::accuracy(predictions, labels)},
                       {"n", predictions.size()},
                       {"per_question", std::move(per)}};
  if (!a.out.empty()) lmn::io::write_file_atomic(a.out, result.dump(2) + "\n");
  std::cout << "accuracy " << format_double(result["accuracy"].get<double>()) << " n " << predictions.size()
            << "\n";
  return 0;
}

struct AnswerArgs {
  Inputs in;
  ModelFlags model;
  std::string params;
  std::string qid;
};

int cmd_answer(AnswerArgs& a) {
  const auto data = load(a.in, "qa", a.model.normalize_sentences);
  const auto params = load_model(a.params, a.model, data);
  const std::size_t k = find_item(data, a.qid);
  const auto dist = lmn::Model(data.memory).infer(params, data.examples[k]);
  const int p = lmn::predict(dist);
  const auto& item = data.items[k];
  std::cout << item.question << "\n";
  for (int h = 0; h < lmn::kNumAnswers; ++h) {
    std::cout << (h == p ? "* " : "  ") << h << " " << format_double(dist.probs(h)) << " "
              << item.answers[static_cast<std::size_t>(h)] << "\n";
  }
  return 0;
}

struct RankArgs {
  Inputs in;
  ModelFlags model;
  std::string params;
  std::string qid;
  std::size_t frame = 0;
  std::string memory = "construction";
};

int cmd_rank(RankArgs& a) {
  const auto data = load(a.in, "qa", a.model.normalize_sentences);
  const auto params = load_model(a.params, a.model, data);
  const std::size_t k = find_item(data, a.qid);
  const auto& ex = data.examples[k];
  if (!ex.subtitles) throw lmn::Error("rank-subtitles needs subtitles (--subtitles-dir or manifest)");
  if (a.frame >= ex.features.frames()) {
    throw lmn::Error("frame index " + std::to_string(a.frame) + " out of range 0.." +
                     std::to_string(ex.features.frames() - 1));
  }
  const lmn::Model model(data.memory);
  const auto frames =
      model.encoder().encode(ex.features, params.projection, params.config.swm_hops);
  lmn::SubtitleMemory memory = *ex.subtitles;
  if (a.memory == "final") {
    lmn::encode_clip(frames.matrix, *ex.subtitles, ex.question, params.config.clip_options(), &memory);
  }
  const auto ranked = lmn::rank_subtitles(frames.frame(static_cast<Eigen::Index>(a.frame)), memory);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    std::cout << r + 1 << "\t" << format_double(ranked[r].similarity) << "\t"
              << memory.sentences[ranked[r].index] << "\n";
  }
  return 0;
}

struct GradcheckArgs {
  Inputs in;
  ModelFlags model;
  std::string params;
  std::string qid;
  double step = 1e-5;
  std::size_t max_entries = 256;
  std::uint64_t seed = 1;
};

int cmd_gradcheck(GradcheckArgs& a) {
  const auto data = load(a.in, "qa", a.model.normalize_sentences);
  const auto channels = static_cast<Eigen::Index>(data.examples.front().features.channels());
  const lmn::ModelParams params =
      a.params.empty() ? lmn::ModelParams{lmn::init_projection(data.memory.dim(), channels, a.seed), a.model.config()}
                       : load_model(a.params, a.model, data);
  const std::size_t k = a.qid.empty() ? 0 : find_item(data, a.qid);
  const auto result =
      lmn::gradcheck(lmn::Model(data.memory), params, data.examples[k], a.step, a.max_entries, a.seed);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", result.max_relative_error);
  std::cout << "qid " << data.items[k].qid << " entries " << result.entries_checked << " max_relative_error "
            << buf << "\n";
  return 0;
}

struct SynthArgs {
  lmn::io::SyntheticSpec spec;
  std::string out;
};

int cmd_synth(SynthArgs& a) {
  const auto data = lmn::io::generate_synthetic(a.spec);
  lmn::io::write_synthetic(data, a.spec, a.out);
  std::cout << "wrote " << data.train.size() << " train and " << data.eval.size() << " eval items to " << a.out
            << "\n";
  return 0;
}

void add_train_flags(CLI::App& cmd, lmn::TrainConfig& t) {
  cmd.add_option("--lr", t.learning_rate, "learning rate")->check(CLI::PositiveNumber);
  cmd.add_option("--batch-size", t.batch_size, "minibatch size")->check(CLI::PositiveNumber);
  cmd.add_option("--max-epochs", t.max_epochs, "epoch budget");
  cmd.add_option("--patience", t.patience, "epochs without dev improvement before stopping")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--dev-fraction", t.dev_fraction, "share of items held out for early stopping");
  cmd.add_option("--seed", t.seed, "seed for initialization and shuffling");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layered memory network for video question answering"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "fit W_l and write params.lmnp and report.json");
  add_inputs(*train_cmd, train.in);
  add_model_flags(*train_cmd, train.model);
  add_train_flags(*train_cmd, train.train);
  train_cmd->add_option("--out", train.out, "output directory");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "accuracy of saved params on a labeled dataset");
  add_inputs(*eval_cmd, eval.in);
  add_model_flags(*eval_cmd, eval.model);
  eval_cmd->add_option("--params", eval.params, "params file")->required();
  eval_cmd->add_option("--out", eval.out, "write the JSON result here");

  AnswerArgs answer;
  auto* answer_cmd = app.add_subcommand("answer", "score the five answers of one question");
  add_inputs(*answer_cmd, answer.in);
  add_model_flags(*answer_cmd, answer.model);
  answer_cmd->add_option("--params", answer.params, "params file")->required();
  answer_cmd->add_option("--qid", answer.qid, "question id")->required();

  RankArgs rank;
  auto* rank_cmd = app.add_subcommand("rank-subtitles", "subtitles ordered by similarity to one frame");
  add_inputs(*rank_cmd, rank.in);
  add_model_flags(*rank_cmd, rank.model);
  rank_cmd->add_option("--params", rank.params, "params file")->required();
  rank_cmd->add_option("--qid", rank.qid, "question id")->required();
  rank_cmd->add_option("--frame", rank.frame, "0-based frame index");
  rank_cmd->add_option("--memory", rank.memory, "memory state to rank against")
      ->check(CLI::IsMember({"construction", "final"}));

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "compare backward() with central differences");
  add_inputs(*grad_cmd, grad.in);
  add_model_flags(*grad_cmd, grad.model);
  grad_cmd->add_option("--params", grad.params, "params file (default: seeded initialization)");
  grad_cmd->add_option("--qid", grad.qid, "question id (default: first item)");
  grad_cmd->add_option("--step", grad.step, "finite-difference step")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--max-entries", grad.max_entries, "entries checked, sampled when W_l is larger")
      ->check(CLI::PositiveNumber);
  grad_cmd->add_option("--seed", grad.seed, "seed for initialization and entry sampling");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a planted-signal synthetic corpus");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.spec.seed, "generator seed");
  synth_cmd->add_option("--vocab", synth.spec.vocab_size, "vocabulary size");
  synth_cmd->add_option("--dim", synth.spec.dim, "embedding dimension d");
  synth_cmd->add_option("--channels", synth.spec.channels, "feature channels C");
  synth_cmd->add_option("--frames", synth.spec.frames, "frames per clip T");
  synth_cmd->add_option("--height", synth.spec.height, "feature map height");
  synth_cmd->add_option("--width", synth.spec.width, "feature map width");
  synth_cmd->add_option("--subtitles", synth.spec.n_subtitles, "subtitles per movie");
  synth_cmd->add_option("--train", synth.spec.n_train, "training items");
  synth_cmd->add_option("--eval", synth.spec.n_eval, "evaluation items");
  synth_cmd->add_option("--noise", synth.spec.noise_sigma, "feature noise sigma");
  synth_cmd->add_option("--condition", synth.spec.condition, "condition number of the hidden map");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*answer_cmd) return cmd_answer(answer);
    if (*rank_cmd) return cmd_rank(rank);
    if (*grad_cmd) return cmd_gradcheck(grad);
    if (*synth_cmd) return cmd_synth(synth);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
