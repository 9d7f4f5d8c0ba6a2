#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "speechgrade/analysis.hpp"
#include "speechgrade/corpus.hpp"
#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"
#include "speechgrade/text.hpp"

using namespace sg;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  std::vector<ResponseRecord> records;
  GradeScale scale;
  Preprocessor prep;
  ScoringModel model;
};

Fixture& fixture() {
  static Fixture* f = [] {
    set_log_quiet(true);
    const fs::path dir = fs::temp_directory_path() / "sg_analysis_corpus";
    SynthSpec spec;
    spec.n_classes = 2;
    spec.per_class = 4;
    spec.seed = 99;
    spec.base_duration_s = 0.5;
    SynthResult r = generate_synthetic_corpus(spec, dir.string());
    Preprocessor prep =
        Preprocessor::fit(r.records, SpectrogramConfig{}, r.scale);
    Rng rng(17);
    ScoringModel model(ModelKind::Fused, ModelConfig::compact(),
                       prep.vocab().size(), r.scale.size(), rng);
    set_log_quiet(false);
    return new Fixture{r.records, r.scale, std::move(prep), std::move(model)};
  }();
  return *f;
}

}  // namespace

TEST_CASE("attention_split_report: single response, row sums, ordering") {
  auto& f = fixture();
  std::vector<ResponseRecord> one{f.records[0]};
  std::vector<SplitReportRow> single =
      attention_split_report(f.model, f.prep, one, GroupBy::Prompt);
  REQUIRE(single.size() == 1);

  std::vector<PreparedResponse> prepared =
      prepare_records(f.prep, one, true, true);
  std::vector<ResponseEval> ev =
      score_responses(f.model, prepared, f.scale.size());
  auto [tp, ap] = modality_split(ev[0].trace);
  CHECK(single[0].text_pct == doctest::Approx(tp));
  CHECK(single[0].audio_pct == doctest::Approx(ap));
  CHECK(single[0].count == 1);

  std::vector<SplitReportRow> by_grade =
      attention_split_report(f.model, f.prep, f.records, GroupBy::HumanGrade);
  REQUIRE(by_grade.size() == 2);
  CHECK(by_grade[0].group == "A2");  // scale order, not lexicographic
  for (const SplitReportRow& row : by_grade)
    CHECK(row.text_pct + row.audio_pct == doctest::Approx(100.0).epsilon(1e-6));

  // group means equal the mean of per-response percentages, recomputed
  std::vector<ResponseEval> all = score_responses(
      f.model, prepare_records(f.prep, f.records, true, true), f.scale.size());
  double text_sum = 0.0;
  std::size_t n_a2 = 0;
  for (std::size_t i = 0; i < f.records.size(); ++i) {
    if (f.records[i].grade_label != "A2") continue;
    text_sum += modality_split(all[i].trace).first;
    ++n_a2;
  }
  CHECK(by_grade[0].text_pct ==
        doctest::Approx(text_sum / static_cast<double>(n_a2)).epsilon(1e-9));
  CHECK(by_grade[0].count == n_a2);
}

TEST_CASE("attention_split_report rejects non-fused checkpoints") {
  auto& f = fixture();
  Rng rng(3);
  ScoringModel text_only(ModelKind::Text, ModelConfig::compact(),
                         f.prep.vocab().size(), f.scale.size(), rng);
  CHECK_THROWS_AS(
      attention_split_report(text_only, f.prep, f.records, GroupBy::Prompt),
      ContractError);
}

TEST_CASE("ablate_swapped_audio: identity substitution reproduces evaluate") {
  auto& f = fixture();
  ThresholdSet mid = ThresholdSet::midpoints(f.scale.size());
  EvalResult base = evaluate(f.model, f.prep, f.records, &mid);

  // the corpus's own audio directory doubles as the replacement source
  const std::string audio_dir =
      (fs::path(f.records[0].audio_path).parent_path()).string();
  AblationResult swapped =
      ablate_swapped_audio(f.model, f.prep, f.records, mid, audio_dir);
  CHECK(swapped.skipped == 0);
  CHECK(swapped.evaluated == f.records.size());
  CHECK(swapped.qwk == doctest::Approx(base.qwk));
  CHECK(swapped.qwk_thresholded == doctest::Approx(*base.qwk_thresholded));
}

TEST_CASE("ablate_swapped_audio: missing files are skipped and counted") {
  auto& f = fixture();
  set_log_quiet(true);
  const fs::path dir = fs::temp_directory_path() / "sg_analysis_partial";
  fs::create_directories(dir);
  // provide replacements for all but two responses
  for (std::size_t i = 0; i + 2 < f.records.size(); ++i)
    fs::copy_file(f.records[i].audio_path,
                  dir / (f.records[i].id + ".wav"),
                  fs::copy_options::overwrite_existing);
  ThresholdSet mid = ThresholdSet::midpoints(f.scale.size());
  AblationResult r =
      ablate_swapped_audio(f.model, f.prep, f.records, mid, dir.string());
  set_log_quiet(false);
  CHECK(r.skipped == 2);
  CHECK(r.evaluated == f.records.size() - 2);
}

TEST_CASE("ablate_white_noise: deterministic and non-destructive") {
  auto& f = fixture();
  ThresholdSet mid = ThresholdSet::midpoints(f.scale.size());

  std::ifstream in(f.records[0].audio_path, std::ios::binary);
  const std::string before((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  in.close();

  AblationResult a = ablate_white_noise(f.model, f.prep, f.records, mid, 7);
  AblationResult b = ablate_white_noise(f.model, f.prep, f.records, mid, 7);
  CHECK(a.qwk == b.qwk);
  CHECK(a.qwk_thresholded == b.qwk_thresholded);

  std::ifstream in2(f.records[0].audio_path, std::ios::binary);
  const std::string after((std::istreambuf_iterator<char>(in2)),
                          std::istreambuf_iterator<char>());
  CHECK(before == after);  // dataset files untouched
}

TEST_CASE("export_attention_trace: raw simplex, minmax peaks, token order") {
  auto& f = fixture();
  std::vector<TracePosition> trace =
      export_attention_trace(f.model, f.prep, f.records[1]);
  REQUIRE(!trace.empty());

  double raw_sum = 0.0;
  double minmax_peak[2] = {-1.0, -1.0};
  for (const TracePosition& p : trace) {
    raw_sum += p.raw;
    const int m = p.modality == Modality::Audio ? 0 : 1;
    minmax_peak[m] = std::max(minmax_peak[m], p.minmax);
  }
  CHECK(raw_sum == doctest::Approx(1.0).epsilon(1e-9));
  // per-modality maxima scale to exactly 1 unless that modality is constant
  for (double peak : minmax_peak)
    if (peak >= 0.0) CHECK((peak == doctest::Approx(1.0) || peak == 0.0));

  const std::vector<std::string> tokens = tokenize(f.records[1].transcript);
  for (const TracePosition& p : trace)
    if (p.modality == Modality::Text) {
      REQUIRE(p.index < tokens.size());
      CHECK(p.token == tokens[p.index]);
    } else {
      CHECK(p.t1 >= p.t0);
    }

  const std::string lines = trace_to_lines(trace);
  CHECK(lines.find("modality=audio") != std::string::npos);
  CHECK(lines.find("modality=text") != std::string::npos);
}

TEST_CASE("export_attention_trace: constant weights map to all-zero minmax") {
  auto& f = fixture();
  Rng rng(23);
  ScoringModel flat(ModelKind::Fused, ModelConfig::compact(),
                    f.prep.vocab().size(), f.scale.size(), rng);
  Tensor* attn = flat.find_parameter("head.attention");
  REQUIRE(attn != nullptr);
  std::fill(attn->data().begin(), attn->data().end(), 0.0);  // uniform weights

  std::vector<TracePosition> trace =
      export_attention_trace(flat, f.prep, f.records[0]);
  for (const TracePosition& p : trace) CHECK(p.minmax == 0.0);
}
