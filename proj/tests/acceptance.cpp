// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lmn/lmn.hpp"
#include "reference/loop_reference.hpp"
#include "srt_corpus.hpp"
#include "support.hpp"

using namespace lmn;
using namespace lmn::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Two conditioned instances per sweep cell.
std::vector<SweepDraw> sweep() {
  std::vector<SweepDraw> out;
  std::uint64_t base = 1000000;
  for (const auto& sc : sweep_configs()) {
    for (int rep = 0; rep < 2; ++rep) {
      out.push_back(draw_conditioned(sc, base));
      base += 1000;
    }
  }
  return out;
}

void oracle_equivalence(const std::vector<SweepDraw>& draws) {
  const auto start = Clock::now();
  double worst = 0.0;
  for (const auto& d : draws) {
    const auto in = make_instance(d.shape, d.seed);
    const auto expected = ref::forward(in.reference);
    const auto [loss, dist] = Model(in.memory).forward(in.params, in.example);
    worst = std::max({worst, std::abs(expected.loss - loss), max_abs_diff(expected.logits, dist.logits),
                      max_abs_diff(expected.probs, dist.probs)});
  }
  const double secs = seconds_since(start);
  report(1, "oracle equivalence", worst <= 1e-10 && secs < 10.0 && draws.size() >= 20,
         std::to_string(draws.size()) + " instances, max abs error " + fmt("%.2e", worst) + " (<= 1e-10), " +
             fmt("%.2f", secs) + " s (< 10 s)");
}

void gradient_correctness(const std::vector<SweepDraw>& draws) {
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t kinks = 0, large = 0, flat = 0;
  for (const auto& d : draws) {
    kinks += d.near_kink;
    large += d.large_logits;
    flat += d.flat;
    const auto in = make_instance(d.shape, d.seed);
    worst = std::max(worst, gradcheck(Model(in.memory), in.params, in.example, 1e-5).max_relative_error);
  }
  const double secs = seconds_since(start);
  report(2, "gradient correctness", worst <= 1e-4 && secs < 60.0 && kinks > 0,
         std::to_string(draws.size()) + " instances, max relative error " + fmt("%.2e", worst) +
             " (<= 1e-4, step 1e-5), redraws: " + std::to_string(kinks) + " near ReLU kink, " +
             std::to_string(large) + " large logits, " + std::to_string(flat) + " flat, " + fmt("%.2f", secs) +
             " s (< 60 s)");
}

struct Run {
  double eval_acc = 0.0;
  double control_acc = 0.0;
  double seconds = 0.0;
};

Run train_synthetic(std::uint64_t seed, const ModelConfig& config) {
  io::SyntheticSpec spec;
  spec.seed = seed;
  const auto data = io::generate_synthetic(spec);
  const auto train_set = io::synthetic_examples(data, data.train, true, config.normalize_sentences);
  const auto eval_set = io::synthetic_examples(data, data.eval, true, config.normalize_sentences);
  TrainConfig tc;
  tc.seed = seed;
  tc.workers = 1;
  const ModelParams init{init_projection(static_cast<Eigen::Index>(spec.dim),
                                         static_cast<Eigen::Index>(spec.channels), seed),
                         config};
  const auto start = Clock::now();
  const auto [params, rep] = train(train_set, data.memory, tc, init);
  Run r;
  r.seconds = seconds_since(start);
  const Model model(data.memory);
  const auto idx = all_indices(eval_set.size());
  r.eval_acc = labeled_accuracy(model, params, eval_set, idx, 1);
  r.control_acc = labeled_accuracy(model, init, eval_set, idx, 1);
  return r;
}

void learnability() {
  const auto r = train_synthetic(1, ModelConfig{});
  report(3, "synthetic learnability", r.eval_acc >= 0.80 && r.control_acc <= 0.35 && r.seconds < 300.0,
         "eval accuracy " + fmt("%.3f", r.eval_acc) + " (>= 0.80), untrained control " +
             fmt("%.3f", r.control_acc) + " (<= 0.35), " + fmt("%.1f", r.seconds) + " s (< 300 s)");
}

void extension_ordering() {
  ModelConfig base, um2, um2qg;
  um2.um_hops = 2;
  um2qg.um_hops = 2;
  um2qg.question_guided = true;
  double a1 = 0, a2 = 0, a3 = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    a1 += train_synthetic(seed, base).eval_acc / 3.0;
    a2 += train_synthetic(seed, um2).eval_acc / 3.0;
    a3 += train_synthetic(seed, um2qg).eval_acc / 3.0;
  }
  report(4, "extension ordering", a2 >= a1 - 0.02 && a3 >= a2 - 0.02,
         "mean eval accuracy over seeds 1-3: um1 " + fmt("%.3f", a1) + ", um2 " + fmt("%.3f", a2) + " (>= um1 - 0.02), " +
             "um2+qg " + fmt("%.3f", a3) + " (>= um2 - 0.02)");
}

// ---------------------------------------------------------------------------

void invariants() {
  std::vector<std::string> broken;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) broken.push_back(what);
  };

  Rng rng(2024);
  double simplex = 0.0;
  for (int t = 0; t < 200; ++t) {
    Vector z(1 + static_cast<Eigen::Index>(rng.below(8)));
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.uniform(-50, 50);
    const Vector q = softmax(z);
    simplex = std::max(simplex, std::abs(q.sum() - 1.0));
    check(q.minCoeff() >= 0.0, "softmax negative");
  }
  check(simplex <= 1e-12, "softmax simplex " + fmt("%.1e", simplex));

  double law = 0.0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Shape shape;
    shape.dim = 5;
    shape.subtitles = 2 + seed % 5;
    auto in = make_instance(shape, seed);
    in.example.subtitles->rows.col(4).setZero();
    in.example.question = Vector::Unit(5, 4);
    const auto frames = encode_frames(in.example.features, in.params.projection, in.memory, 1);
    const std::size_t um = 1 + seed % 3;
    const auto off = encode_clip(frames, *in.example.subtitles, in.example.question, {um, false, false});
    const auto on = encode_clip(frames, *in.example.subtitles, in.example.question, {um, true, false});
    const double n2 = static_cast<double>(shape.subtitles * shape.subtitles);
    law = std::max(law, (on.vector * n2 - off.vector).norm() / off.vector.norm());
  }
  check(law <= 1e-10, "1/N^2 law " + fmt("%.1e", law));

  double scaling = 0.0, region_perm = 0.0, frame_perm = 0.0, sub_perm = 0.0;
  bool bitwise = true;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Shape shape{6, 4, 3, 2, 2, 5, 4};
    shape.config.um_hops = 1 + seed % 2;
    shape.config.question_guided = seed % 3 == 0;
    const auto in = make_instance(shape, seed);
    const Model model(in.memory);
    const auto base = model.infer(in.params, in.example);
    const double scale = std::max(1.0, base.logits.cwiseAbs().maxCoeff());

    Rng prng(seed);
    Example scaled = in.example, regions = in.example, frames = in.example, subs = in.example;
    for (std::size_t i = 0; i < shape.frames; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        scaled.features.set_region(i, j, prng.uniform(0.01, 100.0) * in.example.features.region(i, j));
    for (std::size_t i = 0; i < shape.frames; ++i)
      for (std::size_t j = 0; j < 4; ++j) regions.features.set_region(i, j, in.example.features.region(i, 3 - j));
    for (std::size_t i = 0; i < shape.frames; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        frames.features.set_region(i, j, in.example.features.region(shape.frames - 1 - i, j));
    subs.subtitles->rows = in.example.subtitles->rows.colwise().reverse();
    subs.subtitles->rows = in.example.subtitles->rows(Eigen::indexing::all, Eigen::indexing::all);
    for (Eigen::Index n = 0; n < 4; ++n) subs.subtitles->rows.row(n) = in.example.subtitles->rows.row((n + 1) % 4);

    const auto frames_ref = encode_frames(in.example.features, in.params.projection, in.memory, 2);
    const auto frames_scaled = encode_frames(scaled.features, in.params.projection, in.memory, 2);
    scaling = std::max(scaling, (frames_ref.matrix - frames_scaled.matrix).cwiseAbs().maxCoeff());
    region_perm = std::max(region_perm, (model.infer(in.params, regions).logits - base.logits).cwiseAbs().maxCoeff() / scale);
    frame_perm = std::max(frame_perm, (model.infer(in.params, frames).logits - base.logits).cwiseAbs().maxCoeff() / scale);
    sub_perm = std::max(sub_perm, (model.infer(in.params, subs).logits - base.logits).cwiseAbs().maxCoeff() / scale);

    ModelParams plain = in.params;
    plain.config.um_hops = 1;
    plain.config.question_guided = false;
    const Vector v = subtitle_attend(encode_frames(in.example.features, plain.projection, in.memory, 1),
                                     *in.example.subtitles)
                         .vector;
    bitwise = bitwise && model.infer(plain, in.example).logits ==
                             score_answers(v, in.example.question, in.example.answers).logits;
  }
  check(scaling <= 1e-12, "positive scaling " + fmt("%.1e", scaling));
  check(region_perm <= 1e-12, "region permutation " + fmt("%.1e", region_perm));
  check(frame_perm <= 1e-12, "frame permutation " + fmt("%.1e", frame_perm));
  check(sub_perm <= 1e-12, "subtitle permutation " + fmt("%.1e", sub_perm));
  check(bitwise, "um_hops=1, qg=off differs from the base model");

  double uniform_ce = 0.0;
  for (double c : {-3.0, 0.0, 0.5, 40.0}) {
    AnswerDistribution d{Vector::Constant(kNumAnswers, c), Vector::Constant(kNumAnswers, 0.2)};
    for (int h = 0; h < kNumAnswers; ++h) uniform_ce = std::max(uniform_ce, std::abs(cross_entropy(d, h) - std::log(5.0)));
  }
  check(uniform_ce <= 1e-12, "uniform cross-entropy " + fmt("%.1e", uniform_ce));

  std::string detail = "softmax simplex " + fmt("%.1e", simplex) + ", 1/N^2 law " + fmt("%.1e", law) +
                       " rel, scaling " + fmt("%.1e", scaling) + ", permutations " +
                       fmt("%.1e", std::max({region_perm, frame_perm, sub_perm})) + ", base reduction " +
                       (bitwise ? "bitwise" : "differs") + ", ln 5 " + fmt("%.1e", uniform_ce);
  for (const auto& b : broken) detail += "; broken: " + b;
  report(5, "algebraic invariants", broken.empty(), detail);
}

// ---------------------------------------------------------------------------

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

void format_fidelity() {
  std::vector<std::string> broken;
  Rng rng(6);
  std::size_t tensors = 0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t T = 1 + rng.below(4), C = 1 + rng.below(9), H = 1 + rng.below(3), W = 1 + rng.below(3);
    std::vector<double> data(T * C * H * W);
    for (double& x : data) x = static_cast<float>(rng.normal() * 10);
    const ClipFeatures clip(T, C, H, W, data);
    const auto bytes = io::encode_features(clip);
    if (io::encode_features(io::decode_features(bytes)) != bytes || !(io::decode_features(bytes) == clip)) {
      broken.push_back("LMNF round trip");
    }
    ProjectionWeights w{Matrix(static_cast<Eigen::Index>(1 + rng.below(6)), static_cast<Eigen::Index>(1 + rng.below(6)))};
    for (Eigen::Index k = 0; k < w.matrix.size(); ++k) w.matrix(k) = rng.normal() * 1e3;
    const auto pbytes = io::encode_params(w);
    if (io::encode_params(io::decode_params(pbytes)) != pbytes) broken.push_back("LMNP round trip");
    tensors += 2;
  }

  const fs::path corpus = fs::path(LMN_TEST_DATA_DIR) / "srt";
  const auto cases = srt_cases();
  for (const auto& c : cases) {
    try {
      if (io::parse_srt(corpus / c.file).entries != c.entries) broken.push_back("SRT " + c.file);
    } catch (const std::exception& e) {
      broken.push_back("SRT " + c.file + ": " + e.what());
    }
  }
  const auto failures_expected = srt_failures();
  for (const auto& f : failures_expected) {
    if (error_of([&] { io::parse_srt(corpus / f.file); }).find(f.message) == std::string::npos) {
      broken.push_back("SRT error " + f.file);
    }
  }

  const std::string ok =
      R"({"qid":"q","question":"?","answers":["a","b","c","d","e"],"movie_id":"m","clip_ids":["c"],"correct_index":2})";
  auto with = [&](const std::string& from, const std::string& to) {
    std::string s = ok;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  const std::vector<std::pair<std::string, std::string>> qa_cases{
      {with(R"("a","b","c","d","e")", R"("a","b","c","d")"), "expected 5 answers"},
      {with(R"("correct_index":2)", R"("correct_index":7)"), "correct_index 7 out of range 0..4"},
      {"\n" + ok.substr(1), ":2: malformed JSON"},
      {with(R"("qid":"q",)", ""), "missing field \"qid\""},
      {with(R"(["c"])", "[]"), "expected at least 1 clip id"},
  };
  for (const auto& [text, message] : qa_cases) {
    if (error_of([&] { io::parse_qa_jsonl(text, "qa.jsonl"); }).find(message) == std::string::npos) {
      broken.push_back("QA '" + message + "'");
    }
  }
  if (io::parse_qa_jsonl(with(R"(,"correct_index":2)", "")).at(0).correct_index) broken.push_back("QA optional label");

  std::string detail = std::to_string(tensors) + " LMNF/LMNP tensors byte-exact, " + std::to_string(cases.size()) +
                       " SRT files + " + std::to_string(failures_expected.size()) + " malformed, " +
                       std::to_string(qa_cases.size()) + " QA schema violations";
  for (const auto& b : broken) detail += "; broken: " + b;
  report(6, "format fidelity", broken.empty() && cases.size() >= 10, detail);
}

// ---------------------------------------------------------------------------

int run(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "lmn_acceptance_determinism";
  fs::remove_all(root);
  const std::string cli = LMN_CLI_PATH;
  bool ok = run(cli + " synth --out " + (root / "data").string() + " > /dev/null") == 0;
  std::vector<std::string> reports, params;
  for (const char* threads : {"1", "1", "2", "4"}) {
    const auto out = root / (std::string("run_") + threads + "_" + std::to_string(reports.size()));
    ok = ok && run(std::string("LMN_THREADS=") + threads + " " + cli + " train --manifest " +
                   (root / "data" / "manifest.json").string() + " --seed 1 --out " + out.string() + " > /dev/null") == 0;
    if (!ok) break;
    reports.push_back(io::read_file(out / "report.json"));
    params.push_back(io::read_file(out / "params.lmnp"));
  }
  for (std::size_t k = 1; ok && k < reports.size(); ++k) ok = reports[k] == reports[0] && params[k] == params[0];
  report(7, "determinism", ok && reports.size() == 4,
         "4 CLI train runs (LMN_THREADS 1, 1, 2, 4): report.json and params.lmnp " +
             std::string(ok ? "byte-identical" : "differ or a run failed"));
  fs::remove_all(root);
}

}  // namespace

int main() {
  const auto draws = sweep();
  oracle_equivalence(draws);
  gradient_correctness(draws);
  learnability();
  extension_ordering();
  invariants();
  format_fidelity();
  determinism();
  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
