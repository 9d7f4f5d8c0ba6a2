#include "speechgrade/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <thread>

#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"

namespace fs = std::filesystem;

namespace sg {

namespace {

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

void require_fused(const ScoringModel& model, const char* what) {
  if (model.kind() != ModelKind::Fused)
    throw ContractError(std::string(what) + " requires an MMAF checkpoint, got " +
                        model_kind_name(model.kind()));
}

}  // namespace

std::vector<SplitReportRow> attention_split_report(
    const ScoringModel& model, const Preprocessor& prep,
    const std::vector<ResponseRecord>& records, GroupBy group_by,
    int threads) {
  require_fused(model, "attention_split_report");
  if (records.empty())
    throw DegenerateInputError("attention_split_report: no responses");
  std::vector<PreparedResponse> prepared =
      prepare_records(prep, records, true, true, threads);
  std::vector<ResponseEval> evals =
      score_responses(model, prepared, model.n_grades(), nullptr, threads);

  std::map<std::string, std::vector<std::pair<double, double>>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto [text_pct, audio_pct] = modality_split(evals[i].trace);
    std::string key;
    switch (group_by) {
      case GroupBy::Prompt: key = records[i].prompt; break;
      case GroupBy::HumanGrade: key = records[i].grade_label; break;
      case GroupBy::PredictedGrade:
        key = prep.scale().label(
            static_cast<std::size_t>(evals[i].prediction.rounded_grade));
        break;
    }
    groups[key].emplace_back(text_pct, audio_pct);
  }

  // grade-keyed reports ordered by the scale, not lexicographically
  std::vector<std::string> ordered_keys;
  if (group_by == GroupBy::Prompt) {
    for (const auto& [k, v] : groups) ordered_keys.push_back(k);
  } else {
    for (const std::string& label : prep.scale().labels())
      if (groups.count(label)) ordered_keys.push_back(label);
  }

  std::vector<SplitReportRow> rows;
  for (const std::string& key : ordered_keys) {
    const auto& splits = groups[key];
    SplitReportRow row;
    row.group = key;
    row.count = splits.size();
    for (const auto& [t, a] : splits) {
      row.text_pct += t;
      row.audio_pct += a;
    }
    row.text_pct /= static_cast<double>(splits.size());
    row.audio_pct /= static_cast<double>(splits.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

AblationResult evaluate_substituted(
    const ScoringModel& model, const Preprocessor& prep,
    const std::vector<ResponseRecord>& records,
    const std::vector<const AudioClip*>& replacement,  // null -> skip record
    const ThresholdSet& thresholds, int threads) {
  require_fused(model, "audio ablation");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (replacement[i]) kept.push_back(i);
  AblationResult out;
  out.skipped = records.size() - kept.size();
  if (kept.empty())
    throw DegenerateInputError("ablation: no responses left to evaluate");

  std::vector<PreparedResponse> prepared(kept.size());
  if (threads < 1) threads = 1;
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k)
      prepared[k] = prep.prepare(records[kept[k]], true, true,
                                 replacement[kept[k]]);
  };
  if (threads == 1 || kept.size() < 2) {
    worker(0, kept.size());
  } else {
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), kept.size());
    std::vector<std::thread> pool;
    const std::size_t chunk = (kept.size() + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(kept.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  EvalResult result = evaluate_prepared(model, prepared, model.n_grades(),
                                        &thresholds, threads);
  out.qwk = result.qwk;
  out.qwk_thresholded = *result.qwk_thresholded;
  out.evaluated = kept.size();
  return out;
}

}  // namespace

AblationResult ablate_white_noise(const ScoringModel& model,
                                  const Preprocessor& prep,
                                  const std::vector<ResponseRecord>& records,
                                  const ThresholdSet& thresholds,
                                  std::uint64_t seed, int threads) {
  // per-record streams derived from (seed, index) so ordering and thread
  // count cannot change the noise
  std::vector<AudioClip> noise(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AudioClip original = read_wav(records[i].audio_path);
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
    noise[i] = white_noise_like(original, rng);
  }
  std::vector<const AudioClip*> ptrs(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) ptrs[i] = &noise[i];
  return evaluate_substituted(model, prep, records, ptrs, thresholds, threads);
}

AblationResult ablate_swapped_audio(const ScoringModel& model,
                                    const Preprocessor& prep,
                                    const std::vector<ResponseRecord>& records,
                                    const ThresholdSet& thresholds,
                                    const std::string& replacement_dir,
                                    int threads) {
  std::vector<AudioClip> clips(records.size());
  std::vector<const AudioClip*> ptrs(records.size(), nullptr);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const fs::path candidate = fs::path(replacement_dir) / (records[i].id + ".wav");
    if (!fs::exists(candidate)) {
      log_warn("ablate-swap: no replacement audio for " + records[i].id +
               ", skipping");
      continue;
    }
    clips[i] = read_wav(candidate.string());
    ptrs[i] = &clips[i];
  }
  return evaluate_substituted(model, prep, records, ptrs, thresholds, threads);
}

std::vector<TracePosition> export_attention_trace(const ScoringModel& model,
                                                  const Preprocessor& prep,
                                                  const ResponseRecord& record) {
  const bool wa = model.uses_audio(), wt = model.uses_text();
  PreparedResponse prepared = prep.prepare(record, wa, wt);
  ScoredTensor scored = model.score(wa ? &prepared.frames : nullptr,
                                    wt ? &prepared.tokens : nullptr, {});

  // min-max scaling separately per modality across the whole response;
  // constant weights map to all zeros
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  for (const auto& p : scored.trace.positions) {
    const int m = p.modality == Modality::Audio ? 0 : 1;
    lo[m] = std::min(lo[m], p.weight);
    hi[m] = std::max(hi[m], p.weight);
  }

  const std::size_t frame_cols = prepared.frames.frame_size;
  const auto& cfg = prep.spectrogram_config();
  const double col_seconds =
      static_cast<double>(cfg.hop) / static_cast<double>(cfg.sample_rate);
  const std::vector<std::string> tokens = tokenize(record.transcript);

  std::vector<TracePosition> out;
  out.reserve(scored.trace.positions.size());
  for (const auto& p : scored.trace.positions) {
    TracePosition tp;
    tp.modality = p.modality;
    tp.index = p.index;
    tp.raw = p.weight;
    const int m = p.modality == Modality::Audio ? 0 : 1;
    const double span = hi[m] - lo[m];
    tp.minmax = span > 0.0 ? (p.weight - lo[m]) / span : 0.0;
    if (p.modality == Modality::Text) {
      tp.token = p.index < tokens.size() ? tokens[p.index] : "<unk>";
    } else {
      const std::size_t col0 = p.index * frame_cols;
      const std::size_t col1 =
          std::min(col0 + frame_cols, prepared.frames.num_valid_columns);
      tp.t0 = static_cast<double>(col0) * col_seconds;
      tp.t1 = static_cast<double>(col1) * col_seconds;
    }
    out.push_back(std::move(tp));
  }
  return out;
}

std::string trace_to_lines(const std::vector<TracePosition>& positions) {
  std::ostringstream os;
  for (const TracePosition& p : positions) {
    if (p.modality == Modality::Audio)
      os << "modality=audio\tindex=" << p.index << "\tt0=" << fmt(p.t0, 3)
         << "\tt1=" << fmt(p.t1, 3);
    else
      os << "modality=text\tindex=" << p.index << "\ttoken=" << p.token;
    os << "\traw=" << fmt(p.raw, 9) << "\tminmax=" << fmt(p.minmax, 6) << "\n";
  }
  return os.str();
}

std::string split_report_to_lines(const std::vector<SplitReportRow>& rows) {
  std::ostringstream os;
  for (const SplitReportRow& r : rows)
    os << "group=" << r.group << "\tcount=" << r.count
       << "\ttext_pct=" << fmt(r.text_pct, 4)
       << "\taudio_pct=" << fmt(r.audio_pct, 4) << "\n";
  return os.str();
}

}  // namespace sg
