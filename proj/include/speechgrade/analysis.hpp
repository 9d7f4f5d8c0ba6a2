#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speechgrade/metrics.hpp"
#include "speechgrade/model.hpp"
#include "speechgrade/training.hpp"

namespace sg {

enum class GroupBy { Prompt, HumanGrade, PredictedGrade };

struct SplitReportRow {
  std::string group;
  double text_pct = 0.0;
  double audio_pct = 0.0;
  std::size_t count = 0;
};

// Mean of per-response modality splits within each group; fused checkpoints
// only. Rows sum to 100%.
std::vector<SplitReportRow> attention_split_report(
    const ScoringModel& model, const Preprocessor& prep,
    const std::vector<ResponseRecord>& records, GroupBy group_by,
    int threads = 1);

struct AblationResult {
  double qwk = 0.0;              // default rounding
  double qwk_thresholded = 0.0;  // with the supplied threshold set
  std::size_t skipped = 0;       // responses without replacement audio
  std::size_t evaluated = 0;
};

// Every response's audio replaced by seeded white noise before the frontend;
// transcripts intact.
AblationResult ablate_white_noise(const ScoringModel& model,
                                  const Preprocessor& prep,
                                  const std::vector<ResponseRecord>& records,
                                  const ThresholdSet& thresholds,
                                  std::uint64_t seed, int threads = 1);

// Audio replaced per response by <replacement_dir>/<id>.wav; missing files
// skip the response and are counted.
AblationResult ablate_swapped_audio(const ScoringModel& model,
                                    const Preprocessor& prep,
                                    const std::vector<ResponseRecord>& records,
                                    const ThresholdSet& thresholds,
                                    const std::string& replacement_dir,
                                    int threads = 1);

struct TracePosition {
  Modality modality = Modality::Audio;
  std::size_t index = 0;
  double raw = 0.0;
  double minmax = 0.0;  // scaled per modality; all zeros when constant
  std::string token;    // text positions
  double t0 = 0.0;      // audio positions: covered time range in seconds
  double t1 = 0.0;
};

// Per-position attention export for one response, min-max scaled separately
// per modality across the whole response.
std::vector<TracePosition> export_attention_trace(const ScoringModel& model,
                                                  const Preprocessor& prep,
                                                  const ResponseRecord& record);

std::string trace_to_lines(const std::vector<TracePosition>& positions);
std::string split_report_to_lines(const std::vector<SplitReportRow>& rows);

}  // namespace sg
